"""Verification suites run by the command-line interface.

Each suite is a generator taking a typed configuration (see ``config``) and
yielding ``(records, verdicts)`` pairs in a fixed order, so output is
deterministic and can be flushed incrementally.  Every random draw is keyed
by ``(seed, suite stream, unit index)``, so results do not depend on the
thread count.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy.optimize import brentq

from . import critical as cr
from . import entropy as en
from . import exact
from . import inequalities as iq
from . import matrix_theory as mt
from .corpus import HIERARCHICAL_ALPHA, corpus
from .diagrams import diagram_A, diagram_B, diagram_report, nabla, nabla_triple_sum
from .estimators import (
    Moments,
    chi_derivative_fd,
    mc_chi,
    mc_Phi,
    mc_phi_dct,
    mc_tail,
    mc_two_point,
    sample_chi,
    sample_tails,
)
from .lattice import boundary_tail_sum, build_hierarchical, build_torus_longrange, build_torus_nn
from .percolation import make_rng, map_batches
from .report import Verdict, read_csv, record

REF = {
    "schur": "Schur product theorem",
    "ando": "Ando inequality for commuting psd matrices",
    "ando_power": "Hadamard power inequality T2oT2 <= ToT3",
    "block": "block-matrix Schur complement criterion",
    "block_diff": "block-difference lemma",
    "sqrt": "principal square root",
    "sqrt_invariance": "principal square root of an invariant matrix is invariant",
    "tracial": "normalized trace is a tracial state",
    "fejer": "trace of a product of invariant psd matrices is nonnegative",
    "chain": "diagram chain B <= A <= nabla^2",
    "mass_transport": "mass-transport identity for the six-edge diagrams",
    "fourier": "Fourier route for the diagrams on tori",
    "fourier_positive": "nonnegative Fourier transform of the two-point function",
    "diagram_floor": "diagrams are at least one",
    "monotone": "diagrams nondecreasing in beta",
    "triangle_routes": "triangle diagram via triple sum equals matrix cube",
    "mc_exact": "Monte Carlo estimator agrees with exact enumeration",
    "psd_bound": "two-point matrix is psd with singleton lower bound",
    "stated_ab": "susceptibility differential inequality, A and B form (stated)",
    "stated_nabla": "susceptibility differential inequality, triangle form (stated)",
    "derived_ab": "susceptibility differential inequality, A and B form (as derived)",
    "derived_nabla": "susceptibility differential inequality, triangle form (as derived)",
    "integrated_identity": "integrated susceptibility bound, identity-consistency",
    "integrated_bound": "integrated susceptibility bound, finite-volume rendition (identity-consistency)",
    "three_point": "tree-graph bound on the three-point function",
    "four_point": "tree-graph bound on the four-point function",
    "tree_sums": "summed tree-graph bounds",
    "phi_lemma": "lower bound on the boundary functional Phi",
    "kl_bound": "Bernoulli KL bound for exponential parameters",
    "pinsker": "generalized Pinsker inequality",
    "chain_rule": "chain rule for relative entropy",
    "tree_verdict": "exploration tree decides {|K| >= n}",
    "rev_monotone": "revealment nondecreasing in the target size",
    "dewan_muirhead": "decision-tree comparison inequality",
    "tail_comparison": "cluster-tail comparison across beta",
    "revealment_bound": "weighted revealment bounded by E[|K| ^ n]",
    "beta_n_monotone": "finite-volume critical sequence is nondecreasing",
    "phi_root": "finite-volume critical point solves phi = 1/2",
    "phi_root_fresh": "finite-volume critical point solves phi = 1/2 (independent samples)",
    "beta_1_closed_form": "finite-volume critical point matches exact root",
    "beta_c_order": "critical estimate lies above the finite-volume sequence",
    "chi_scaling": "susceptibility at criticality grows like L^(alpha n)",
    "chi_saturation": "susceptibility slope smaller below criticality",
    "nabla_regime": "growth regime of the finite-volume triangle diagram",
    "xi_trend": "correlation length exponent",
    "xi_mean_field": "correlation length mean-field lower bound direction",
    "window": "susceptibility inside the critical window",
    "phi_critical": "phi at the critical estimate is at least 1",
    "plot_input": "plot-data input parsed",
}

_H = re.compile(r"^H\((\d+),(\d+),(\d+)\)$")
_LR = re.compile(r"^LR\((\d+),(\d+),([0-9.eE+-]+)\)$")
_T = re.compile(r"^T\((\d+),(\d+)\)$")


def model_from_name(name: str, alpha: float = HIERARCHICAL_ALPHA):
    """Corpus name, ``H(d,L,n)`` (with ``alpha``), ``LR(d,side,alpha)`` or ``T(d,side)``."""
    name = name.replace(" ", "")
    if (m := _H.match(name)) and name not in {e.name for e in corpus()}:
        d, L, n = map(int, m.groups())
        return build_hierarchical(d, L, n, alpha)
    if m := _LR.match(name):
        return build_torus_longrange(int(m.group(1)), int(m.group(2)), float(m.group(3)))
    if m := _T.match(name):
        return build_torus_nn(int(m.group(1)), int(m.group(2)))
    return corpus([name])[0].model


def _entries(cfg):
    return corpus(list(cfg["models"]) if cfg.get("models") else None)


def _v(key, check_id, lhs, rhs, tol, ok, gated=True, **detail):
    return Verdict(check_id, REF[key], lhs, rhs, tol, bool(ok), gated, detail)


# -- matrix-verify ---------------------------------------------------------------------


def _unit(M):
    n = np.linalg.norm(M)
    return M / n if n > 0 else M


def _dims(rng, cfg, hi_key="dims.max"):
    return int(rng.integers(cfg["dims.min"], cfg[hi_key] + 1))


def matrix_verify(cfg):
    seed, trials = cfg["seed"], cfg["trials"]
    S_ = "matrix-verify"

    # Schur product theorem on unit-norm Wishart pairs of random rank
    worst, bad = math.inf, 0
    for t in range(trials):
        rng = make_rng(seed, 101, t)
        n = _dims(rng, cfg)
        S = _unit(mt.random_psd(rng, n, int(rng.integers(1, n + 1))))
        T = _unit(mt.random_psd(rng, n, int(rng.integers(1, n + 1))))
        lam = mt.check_schur(S, T, cfg["tol.schur"]).min_eigenvalue
        worst = min(worst, lam)
        bad += lam < -cfg["tol.schur"]
    rng = make_rng(seed, 102)
    u, w = rng.standard_normal(6), rng.standard_normal(6)
    rank1 = np.abs(mt.hadamard(np.outer(u, u), np.outer(w, w)) - np.outer(u * w, u * w)).max()
    yield [record(S_, None, None, "min_eigenvalue", worst, key="schur", n_samples=trials, seed=seed)], [
        _v("schur", "matrix.schur", worst, -cfg["tol.schur"], cfg["tol.schur"], bad == 0, violations=bad,
           trials=trials),
        _v("schur", "matrix.schur.rank_one", rank1, 0.0, 1e-12, rank1 <= 1e-12)]

    # Ando on commuting pairs
    worst, bad = math.inf, 0
    for t in range(trials):
        rng = make_rng(seed, 103, t)
        S, T = mt.commuting_psd_pair(rng, _dims(rng, cfg))
        S, T = _unit(S), _unit(T)
        lam = mt.check_ando(S, T).min_eigenvalue
        worst = min(worst, lam)
        bad += lam < -cfg["tol.ando"]
    yield [record(S_, None, None, "min_eigenvalue", worst, key="ando", n_samples=trials, seed=seed)], [
        _v("ando", "matrix.ando", worst, -cfg["tol.ando"], cfg["tol.ando"], bad == 0, violations=bad)]

    # Hadamard power inequality: random psd and every exact corpus matrix
    worst, bad = math.inf, 0
    for t in range(trials):
        rng = make_rng(seed, 104, t)
        n = _dims(rng, cfg)
        T = _unit(mt.random_psd(rng, n, int(rng.integers(1, n + 1))))
        lam = mt.check_ando_power(T, cfg["tol.schur"]).min_eigenvalue
        worst = min(worst, lam)
        bad += lam < -cfg["tol.schur"]
    recs = [record(S_, None, None, "min_eigenvalue", worst, key="ando_power.random", n_samples=trials, seed=seed)]
    cworst, cbad = math.inf, 0
    for e in _entries(cfg):
        for b in cfg["betas"]:
            lam = mt.check_ando_power(exact.exact_two_point(e.model, b)).min_eigenvalue
            recs.append(record(S_, e.model, b, "min_eigenvalue", lam, key="ando_power", label=e.name))
            cworst = min(cworst, lam)
            cbad += lam < -cfg["tol.schur"]
    yield recs, [
        _v("ando_power", "matrix.ando_power.random", worst, -cfg["tol.schur"], cfg["tol.schur"], bad == 0,
           violations=bad),
        _v("ando_power", "matrix.ando_power.corpus", cworst, -cfg["tol.schur"], cfg["tol.schur"], cbad == 0,
           violations=cbad)]

    # block-matrix criterion, margin filtered
    tol = cfg["tol.block"]
    agree, used, drawn = 0, 0, 0
    n_true = 0
    while used < trials:
        rng = make_rng(seed, 105, drawn)
        drawn += 1
        n = int(rng.integers(cfg["dims.min"], cfg["block.dims.max"] + 1))
        S = _unit(mt.random_psd(rng, n))
        T = _unit(mt.random_psd(rng, n)) + 0.05 * np.eye(n)
        X = rng.standard_normal((n, n)) * rng.uniform(0.0, 0.4) / n
        m_block, m_schur = mt.block_margins(S, T, X)
        if min(abs(m_block), abs(m_schur)) < 10 * tol:
            continue
        a, b = mt.check_block_equiv(S, T, X, tol)
        agree += a == b
        n_true += a
        used += 1
    yield [record(S_, None, None, "agreement", agree / used, key="block", n_samples=used, seed=seed)], [
        _v("block", "matrix.block_equivalence", agree, used, 0, agree == used, drawn=drawn, psd_instances=n_true)]

    # block-difference lemma: block psd implies S - T psd
    bad, n_block = 0, 0
    for t in range(trials):
        rng = make_rng(seed, 106, t)
        n = _dims(rng, cfg, "block.dims.max")
        P = _unit(mt.random_psd(rng, n, int(rng.integers(1, n + 1))))
        Q = _unit(mt.random_psd(rng, n, int(rng.integers(1, n + 1))))
        if t % 2:
            S, T = 0.5 * (P + Q), 0.5 * (P - Q)
        else:
            S, T = P, Q
        c_block, c_diff = mt.check_block_diff(S, T, 1e-10)
        n_block += c_block.psd
        bad += c_block.psd and not c_diff.psd
    yield [], [_v("block_diff", "matrix.block_difference", bad, 0, 0, bad == 0, block_psd_instances=n_block)]

    # principal square root reconstruction and invariance
    worst = 0.0
    for t in range(trials):
        rng = make_rng(seed, 107, t)
        n = _dims(rng, cfg)
        T = mt.random_psd(rng, n, int(rng.integers(1, n + 1)))
        R = mt.principal_sqrt(T)
        worst = max(worst, np.linalg.norm(R @ R - T) / np.linalg.norm(T))
    recs = [record(S_, None, None, "relative_error", worst, key="sqrt.random", n_samples=trials, seed=seed)]
    cworst, inv_worst = 0.0, 0.0
    for e in _entries(cfg):
        for b in cfg["betas"]:
            T = exact.exact_two_point(e.model, b)
            R = mt.principal_sqrt(T)
            cworst = max(cworst, np.linalg.norm(R @ R - T) / np.linalg.norm(T))
            if e.model.vertex_count <= 256:
                inv_worst = max(inv_worst, float(np.abs(R - R[0][e.model.difference_table]).max()))
    recs.append(record(S_, None, None, "relative_error", cworst, key="sqrt.corpus"))
    recs.append(record(S_, None, None, "max_deviation", inv_worst, key="sqrt.invariance"))
    yield recs, [
        _v("sqrt", "matrix.sqrt.random", worst, cfg["tol.sqrt"], cfg["tol.sqrt"], worst <= cfg["tol.sqrt"]),
        _v("sqrt", "matrix.sqrt.corpus", cworst, cfg["tol.sqrt"], cfg["tol.sqrt"], cworst <= cfg["tol.sqrt"]),
        _v("sqrt_invariance", "matrix.sqrt.invariance", inv_worst, 1e-10, 1e-10, inv_worst <= 1e-10)]

    # tracial state and Fejer-type positivity
    ok, trace_err = True, 0.0
    fejer_prop, fejer_gap = math.inf, 0.0
    for e in _entries(cfg):
        for b in cfg["betas"]:
            T = exact.exact_two_point(e.model, b)
            T2 = T @ T
            ok &= mt.tracial_checks(T, T2, e.model)["pass"]
            trace_err = max(trace_err, abs(mt.normalized_trace(T2 @ T) - nabla(T)) / max(1.0, nabla(T)))
            D = mt.hadamard(T, T2 @ T) - mt.hadamard(T2, T2)
            D = 0.5 * (D + D.T)
            val = mt.check_fejer(D, 0.5 * (T2 + T2.T), e.model)
            fejer_prop = min(fejer_prop, val)
            A, B = diagram_A(T), diagram_B(T)
            fejer_gap = max(fejer_gap, abs(val - (A - B)) / max(1.0, A))
    worst, n_pairs = math.inf, 0
    models = [e.model for e in _entries(cfg) if e.model.vertex_count >= 2]
    for t in range(trials):
        rng = make_rng(seed, 108, t)
        model = models[t % len(models)]
        S = _unit(mt.invariant_psd(rng, model))
        T = _unit(mt.invariant_psd(rng, model))
        worst = min(worst, mt.check_fejer(S, T, model))
        n_pairs += 1
    yield [record(S_, None, None, "min_trace", worst, key="fejer.random", n_samples=n_pairs, seed=seed),
           record(S_, None, None, "min_trace", fejer_prop, key="fejer.diagram_chain")], [
        _v("tracial", "matrix.tracial", trace_err, 1e-12, 1e-12, ok and trace_err <= 1e-12),
        _v("fejer", "matrix.fejer.random", worst, -1e-10, 1e-10, worst >= -1e-10),
        _v("fejer", "matrix.fejer.diagram_chain", fejer_prop, -1e-10, 1e-10, fejer_prop >= -1e-10),
        _v("fejer", "matrix.fejer.equals_A_minus_B", fejer_gap, 1e-10, 1e-10, fejer_gap <= 1e-10)]


# -- diagram-verify ------------------------------------------------------------------


def _chain_margin(rep):
    b, a, n2 = rep.chain()
    return max((b - a) / max(1.0, a), (a - n2) / max(1.0, n2))


def _delta_stderr(T, model, f, eps=1e-6):
    """Linearised stderr of ``f(T)`` from independent per-class standard errors."""
    est = T.meta["class_estimates"]
    means = np.array([e.value for e in est])
    ses = np.array([e.stderr for e in est])
    base = f(model.matrix_from_row(model.row_from_classes(means)))
    var = 0.0
    for k in range(len(means)):
        if ses[k] == 0:
            continue
        m = means.copy()
        m[k] += eps
        var += ((f(model.matrix_from_row(model.row_from_classes(m))) - base) / eps * ses[k]) ** 2
    return math.sqrt(var)


def diagram_verify(cfg):
    S_ = "diagram-verify"
    tc, tq, tf = cfg["tol.chain"], cfg["tol.quadsum"], cfg["tol.fourier"]
    for e in _entries(cfg):
        recs, verdicts = [], []
        prev = None
        chain_worst, quad_worst, four_worst, tau_min, floor_ok, mono_ok, tri_worst = \
            -math.inf, 0.0, 0.0, math.inf, True, True, 0.0
        for b in cfg["betas"]:
            T = exact.exact_two_point(e.model, b)
            rep = diagram_report(T, e.model, quadsum=e.model.vertex_count <= 40)
            for name in ("chi", "nabla", "A", "B", "A_quad", "B_quad", "fourier_nabla", "fourier_A", "fourier_B",
                         "min_tau_hat"):
                val = getattr(rep, name)
                if val is not None:
                    recs.append(record(S_, e.model, b, name, val, label=e.name))
            chain_worst = max(chain_worst, _chain_margin(rep))
            quad_worst = max(quad_worst, abs(rep.A_quad - rep.A) / max(1.0, rep.A),
                             abs(rep.B_quad - rep.B) / max(1.0, rep.B))
            if e.is_torus:
                four_worst = max(four_worst, *(abs(getattr(rep, "fourier_" + k) - getattr(rep, k))
                                               / max(1.0, getattr(rep, k)) for k in ("nabla", "A", "B")))
                tau_min = min(tau_min, rep.min_tau_hat)
            cur = (rep.chi, rep.nabla, rep.A, rep.B)
            floor_ok &= min(cur) >= 1 - 1e-12
            if prev is not None:
                mono_ok &= all(c >= p * (1 - 1e-12) for c, p in zip(cur, prev))
            prev = cur
            if e.model.vertex_count <= 10:
                tri_worst = max(tri_worst, abs(nabla_triple_sum(T) - rep.nabla) / max(1.0, rep.nabla))
        verdicts.append(_v("chain", f"diagram.chain.{e.name}", chain_worst, 0.0, tc, chain_worst <= tc))
        verdicts.append(_v("mass_transport", f"diagram.quadsum.{e.name}", quad_worst, tq, tq, quad_worst <= tq))
        if e.is_torus:
            verdicts.append(_v("fourier", f"diagram.fourier.{e.name}", four_worst, tf, tf, four_worst <= tf))
            verdicts.append(_v("fourier_positive", f"diagram.fourier_positive.{e.name}", tau_min, -1e-10, 1e-10,
                               tau_min >= -1e-10))
        verdicts.append(_v("diagram_floor", f"diagram.floor.{e.name}", float(floor_ok), 1, 0, floor_ok))
        verdicts.append(_v("monotone", f"diagram.monotone.{e.name}", float(mono_ok), 1, 0, mono_ok))
        if e.model.vertex_count <= 10:
            verdicts.append(_v("triangle_routes", f"diagram.triangle_routes.{e.name}", tri_worst, 1e-10, 1e-10,
                               tri_worst <= 1e-10))
        yield recs, verdicts

    # Monte Carlo two-point matrices of larger hierarchical balls
    for name in cfg["mc.models"]:
        model = model_from_name(name, cfg["mc.alpha"])
        b = cfg["mc.beta"]
        T = mc_two_point(model, b, cfg["mc.samples"], cfg["seed"], threads=cfg["threads"], stream=31)
        rep = diagram_report(T, quadsum=False)
        budget = cfg["mc.sigma"] * max(_delta_stderr(T, model, diagram_A), _delta_stderr(T, model, diagram_B),
                                       _delta_stderr(T, model, lambda M: nabla(M) ** 2))
        lhs = max(rep.B - rep.A, rep.A - rep.nabla**2)
        recs = [record(S_, model, b, k, getattr(rep, k), n_samples=cfg["mc.samples"], seed=cfg["seed"], label=name)
                for k in ("chi", "nabla", "A", "B")]
        yield recs, [_v("chain", f"diagram.chain.mc.{name}", lhs, 0.0, budget + tc * max(1.0, rep.nabla**2),
                        lhs <= budget + tc * max(1.0, rep.nabla**2), vertices=model.vertex_count,
                        B=rep.B, A=rep.A, nabla_sq=rep.nabla**2, strict=lhs <= tc * max(1.0, rep.nabla**2))]


# -- oracle-regression ---------------------------------------------------------------


def _z_gate(mc_vals, mc_se, ex_vals, sigma):
    """Worst ``|mc - exact| / se`` and pass flag; zero-variance entries must match to 1e-12."""
    mc_vals, mc_se, ex_vals = (np.atleast_1d(np.asarray(x, dtype=float)) for x in (mc_vals, mc_se, ex_vals))
    diff = np.abs(mc_vals - ex_vals)
    zero = mc_se <= 0
    ok = bool(np.all(diff[zero] <= 1e-12)) and bool(np.all(diff[~zero] <= sigma * mc_se[~zero] + 1e-12))
    z = np.where(zero, np.where(diff <= 1e-12, 0.0, np.inf), diff / np.where(zero, 1.0, mc_se))
    return float(z.max()) if z.size else 0.0, ok


def oracle_regression(cfg):
    S_ = "oracle-regression"
    n_mc, seed, th, sig = cfg["mc.samples"], cfg["seed"], cfg["threads"], cfg["mc.sigma"]
    for ei, e in enumerate(_entries(cfg)):
        m = e.model
        N = m.vertex_count
        S = e.test_set
        for b in cfg["betas"]:
            recs, verdicts = [], []
            rep = exact.exact_report(m, b)
            base = 1000 * ei

            def gate(fn, mc_v, mc_s, ex_v, keys):
                z, ok = _z_gate(mc_v, mc_s, ex_v, sig)
                for k, a, s, x in zip(keys, np.atleast_1d(mc_v), np.atleast_1d(mc_s), np.atleast_1d(ex_v)):
                    recs.append(record(S_, m, b, fn, a, key=k, stderr=s, n_samples=n_mc, seed=seed, label=e.name))
                    recs.append(record(S_, m, b, fn + ".exact", x, key=k, label=e.name))
                verdicts.append(_v("mc_exact", f"oracle.{fn}.{e.name}.beta={b:g}", z, sig, sig, ok))

            # two-point function, per distance class
            T = mc_two_point(m, b, n_mc, seed, threads=th, stream=base + 1)
            est = T.meta["class_estimates"]
            cls = m.offset_class
            row = rep.two_point[0]
            ex_cls = np.array([row[cls == k].mean() for k in range(m.class_count)])
            gate("T", [x.value for x in est], [x.stderr for x in est], ex_cls, list(range(m.class_count)))

            c = mc_chi(m, b, n_mc, seed, threads=th, stream=base + 2)
            gate("chi", c.value, c.stderr, rep.chi, [""])

            ks = list(range(2, N + 1))
            if ks:
                tails = mc_tail(m, b, ks, n_mc, seed, threads=th, stream=base + 3)
                ex_t = np.array([rep.law.tail(k) for k in ks])
                # indicator means: score test with the binomial stderr of the exact probability, so that
                # rare tails observed zero times are judged by their expected count
                score_se = np.sqrt(np.clip(ex_t * (1 - ex_t), 0.0, None) / n_mc)
                gate("tail", [t.value for t in tails], np.maximum(score_se, [t.stderr for t in tails]), ex_t, ks)

            P = mc_Phi(m, S, b, n_mc, seed, threads=th, stream=base + 4)
            gate("Phi", P.value, P.stderr, exact.exact_Phi(m, b, S), ["S=" + "|".join(map(str, S))])

            ext = np.full(N, boundary_tail_sum(m, b, m.n)) if m.kind == "hierarchical" else None
            f = mc_phi_dct(m, S, b, n_mc, seed, threads=th, stream=base + 5)
            gate("phi", f.value, f.stderr, exact.exact_phi_dct(m, b, S, 0, exterior=ext),
                 ["S=" + "|".join(map(str, S))])

            h = min(cfg["fd.step"], b / 2)
            d = chi_derivative_fd(m, b, h, n_mc, seed, threads=th, stream=base + 6)
            fd_bias = (exact.exact_chi(m, b + h) - exact.exact_chi(m, b - h)) / (2 * h) - rep.chi_derivative
            gate("dchi", d.value, d.stderr, rep.chi_derivative, [f"h={h:g}"])
            verdicts[-1].detail["finite_difference_bias"] = fd_bias
            yield recs, verdicts


# -- inequality-suite --------------------------------------------------------------


def inequality_suite(cfg):
    S_ = "inequality-suite"
    tol = cfg["tol.bound"]
    for e in _entries(cfg):
        m = e.model
        recs, verdicts = [], []
        worst = {k: (math.inf, None) for k in ("stated_ab", "stated_nabla", "derived_ab", "derived_nabla")}
        fails = {k: [] for k in worst}
        for b in cfg["betas"]:
            if b <= 0:
                continue
            db = iq.differential_bounds(m, b)
            recs.append(record(S_, m, b, "dchi", db.chi_derivative, label=e.name))
            for k in worst:
                rhs = getattr(db, k)
                recs.append(record(S_, m, b, "rhs", rhs, key=k, label=e.name))
                margin = db.chi_derivative - rhs
                if margin < worst[k][0]:
                    worst[k] = (margin, b)
                if not db.holds(k, tol):
                    fails[k].append(b)
        for k, (margin, b) in worst.items():
            verdicts.append(_v(k, f"inequality.{k}.{e.name}", margin, -tol, tol, not fails[k],
                               worst_beta=b, failing_betas=fails[k]))

        psd_ok, psd_margin = True, math.inf
        for b in cfg["betas"]:
            try:
                cert, bound = exact.verify_psd_bound(m, b)
                psd_margin = min(psd_margin, cert.min_eigenvalue - bound)
            except AssertionError:
                psd_ok = False
        verdicts.append(_v("psd_bound", f"inequality.psd_bound.{e.name}", psd_margin, -1e-10, 1e-10,
                           psd_ok and psd_margin >= -1e-10))

        if m.vertex_count <= iq.TREE_GRAPH_MAX_VERTICES:
            t3, t4, sums = math.inf, math.inf, True
            for b in cfg["betas"]:
                tg = iq.tree_graph(m, b)
                t3, t4 = min(t3, tg.three_point_margin), min(t4, tg.four_point_margin)
                sums &= tg.pair_sum <= tg.pair_bound * (1 + 1e-12) and tg.triple_sum <= tg.triple_bound * (1 + 1e-12)
            verdicts += [_v("three_point", f"inequality.three_point.{e.name}", t3, -1e-12, 1e-12, t3 >= -1e-12),
                         _v("four_point", f"inequality.four_point.{e.name}", t4, -1e-12, 1e-12, t4 >= -1e-12),
                         _v("tree_sums", f"inequality.tree_sums.{e.name}", float(sums), 1, 0, sums)]
        if m.vertex_count <= iq.PHI_LEMMA_MAX_VERTICES:
            worst_pl, ok = math.inf, True
            for b in cfg["betas"]:
                if b <= 0:
                    continue
                pl = iq.phi_lemma(m, b)
                worst_pl = min(worst_pl, pl.worst_margin)
                ok &= pl.holds
            verdicts.append(_v("phi_lemma", f"inequality.phi_lemma.{e.name}", worst_pl, 0.0, 1e-10, ok))

        betas = sorted(b for b in cfg["betas"] if b > 0)
        id_ok, in_ok = True, True
        id_worst, in_worst = 0.0, math.inf
        for r in (iq.integrated_bound(m, b, betas[-1], points=cfg["integral.points"]) for b in betas[:-1]):
            recs.append(record(S_, m, r.beta, "integrated_lhs", r.lhs, key=f"top={r.beta_top:g}", label=e.name))
            recs.append(record(S_, m, r.beta, "integrated_rhs", r.rhs, key=f"top={r.beta_top:g}", label=e.name))
            id_ok &= r.identity_holds
            in_ok &= r.holds
            id_worst = max(id_worst, abs(r.identity_lhs - r.identity_rhs) - r.identity_error_budget)
            in_worst = min(in_worst, r.lhs - r.rhs + r.discretization_budget)
        if len(betas) >= 2:
            verdicts += [_v("integrated_identity", f"inequality.integrated_identity.{e.name}", id_worst, 0.0,
                            "richardson", id_ok),
                         _v("integrated_bound", f"inequality.integrated_bound.{e.name}", in_worst, 0.0,
                            "richardson", in_ok)]
        yield recs, verdicts


# -- entropy-suite ------------------------------------------------------------------


def entropy_suite(cfg):
    S_ = "entropy-suite"
    seed, sig = cfg["seed"], cfg["mc.sigma"]
    grid = np.geomspace(cfg["grid.min"], cfg["grid.max"], cfg["grid.size"])
    bad, neg, worst = 0, 0, -math.inf
    for a in grid:
        for b in grid:
            kl, bound = en.kl_exp_bound_check(float(a), float(b))
            bad += kl > bound * (1 + 1e-12) + 1e-300
            neg += kl < -1e-15
            if bound > 0:
                worst = max(worst, kl / bound)
    yield [record(S_, None, None, "max_kl_over_bound", worst, n_samples=grid.size**2)], [
        _v("kl_bound", "entropy.kl_bound.grid", bad, 0, 0, bad == 0 and neg == 0, points=grid.size**2,
           negative=neg, max_ratio=worst)]

    betas = sorted(cfg["betas"])
    pairs = [(b1, b2) for i, b1 in enumerate(betas) for b2 in betas[i + 1:]]
    for e in _entries(cfg):
        m = e.model
        N = m.vertex_count
        recs, verdicts = [], []
        if m.edge_count <= 20:
            sizes = en.configuration_cluster_sizes(m)
            p_worst, c_worst, p_ok = -math.inf, 0.0, True
            for b1, b2 in pairs + [(b, b) for b in betas]:
                P1 = exact.configuration_probabilities(m, b1)
                P2 = exact.configuration_probabilities(m, b2)
                atom, edge = en.atom_kl(P1, P2), en.product_kl(m, b1, b2)
                c_worst = max(c_worst, abs(atom - edge) / max(1.0, edge))
                for n in range(1, N + 1):
                    mu, nu = (min(1.0, math.fsum(P[sizes >= n].tolist())) for P in (P1, P2))
                    ok = en.pinsker_check(mu, nu, max(atom, 0.0))
                    p_ok &= ok
                    p_worst = max(p_worst, (mu - nu) ** 2 - 2 * max(atom, 0.0) * max(mu, nu))
            verdicts += [_v("pinsker", f"entropy.pinsker.{e.name}", p_worst, 0.0, 1e-12, p_ok),
                         _v("chain_rule", f"entropy.chain_rule.{e.name}", c_worst, 1e-12, 1e-12, c_worst <= 1e-12)]
        if m.edge_count <= 12:
            mis = en.exhaustive_tree_check(m, range(1, N + 1))
            verdicts.append(_v("tree_verdict", f"entropy.tree_verdict.exhaustive.{e.name}", mis, 0, 0, mis == 0,
                               configurations=1 << m.edge_count))

        dm_ok, dm_worst, mono_ok, rv_ok = True, -math.inf, True, True
        for b in betas:
            prev = None
            law = exact.cluster_law(m, b)
            for n in range(1, N + 1):
                rev, _ = en.exact_revealment(m, b, n)
                if prev is not None:
                    mono_ok &= bool(np.all(rev >= prev - 1e-12))
                prev = rev
                trunc = math.fsum(law.tail(k) for k in range(1, n + 1))
                rv_ok &= float(rev @ m.edges[2]) <= trunc + 1e-12
        for b1, b2 in pairs + [(b2, b1) for b1, b2 in pairs]:
            for n in range(2, N + 1):
                r = en.dewan_muirhead_check(m, b1, b2, n)
                dm_ok &= r.holds
                dm_worst = max(dm_worst, r.lhs - r.rhs)
        verdicts += [_v("dewan_muirhead", f"entropy.dewan_muirhead.exact.{e.name}", dm_worst, 0.0, 1e-12, dm_ok),
                     _v("rev_monotone", f"entropy.rev_monotone.{e.name}", float(mono_ok), 1, 1e-12, mono_ok),
                     _v("revealment_bound", f"entropy.revealment_bound.exact.{e.name}", float(rv_ok), 1, 1e-12,
                        rv_ok)]

        tc_ok, tc_worst, skipped = True, -math.inf, 0
        for b1, b2 in pairs + [(b, b) for b in betas]:
            for n in range(0, N + 1):
                tcmp = en.dm_chi_bounds_exact(m, b1, b2, n)
                skipped += tcmp.skipped_bound2
                ok = tcmp.lhs <= tcmp.bound1 + 1e-12 and (tcmp.skipped_bound2 or tcmp.bound1 <= tcmp.bound2 + 1e-12)
                tc_ok &= ok
                tc_worst = max(tc_worst, tcmp.lhs - tcmp.bound1)
        verdicts.append(_v("tail_comparison", f"entropy.tail_comparison.exact.{e.name}", tc_worst, 0.0, 1e-12, tc_ok,
                           skipped_bound2_n0=skipped))
        yield recs, verdicts

    # Monte Carlo instances on a larger hierarchical ball
    alpha = cfg["mc.alpha"]
    big = build_hierarchical(1, 2, cfg["mc.level"], alpha)
    b1, b2, nt, n_mc = cfg["mc.beta1"], cfg["mc.beta2"], cfg["mc.n_target"], cfg["mc.samples"]
    r = en.dewan_muirhead_check(big, b1, b2, nt, budget=n_mc, seed=seed)
    recs = [record(S_, big, b1, "dm_lhs", r.lhs, key=f"beta2={b2:g},n={nt}", n_samples=n_mc, seed=seed),
            record(S_, big, b1, "dm_rhs", r.rhs, key=f"beta2={b2:g},n={nt}", n_samples=n_mc, seed=seed)]
    verdicts = [_v("dewan_muirhead", f"entropy.dewan_muirhead.mc.{big.label}", r.lhs, r.rhs, r.slack, r.holds,
                   p1=r.p1, p2=r.p2, weighted_revealment=r.weighted_revealment)]

    lo, hi = sorted((b1, b2))
    ks = list(range(1, nt + 1))

    def fn(batch):
        rows = []
        for beta in (lo, hi):
            lab = batch.labels(beta)
            rows += [sample_tails(lab, ks), sample_chi(lab)[:, None]]
        return Moments.of(np.concatenate(rows, axis=1))

    est = Moments.pool(map_batches(big, hi, n_mc, seed, fn, threads=cfg["threads"], stream=41)).estimates(seed)
    t1, chi1 = est[:nt], est[nt]
    t2 = est[nt + 1: 2 * nt + 1]
    tail1 = {k: t1[k - 1].value for k in ks}
    tcmp = en.dm_chi_bounds(lambda k: tail1[k], t2[nt - 1].value, lo, hi, nt, chi1.value)
    c = 4.0 / lo * (hi - lo) ** 2
    se_b1 = math.hypot(2 * t1[nt - 1].stderr, c * math.sqrt(sum(t.stderr**2 for t in t1)))
    allowance = sig * math.hypot(t2[nt - 1].stderr, se_b1)
    ok = tcmp.lhs <= tcmp.bound1 + allowance and tcmp.bound1 <= tcmp.bound2 + 1e-12
    recs.append(record(S_, big, hi, "tail_lhs", tcmp.lhs, key=f"n={nt}", stderr=t2[nt - 1].stderr, n_samples=n_mc,
                       seed=seed))
    recs.append(record(S_, big, lo, "tail_bound1", tcmp.bound1, key=f"n={nt}", stderr=se_b1, n_samples=n_mc,
                       seed=seed))
    recs.append(record(S_, big, lo, "tail_bound2", tcmp.bound2, key=f"n={nt}", n_samples=n_mc, seed=seed))
    verdicts.append(_v("tail_comparison", f"entropy.tail_comparison.mc.{big.label}", tcmp.lhs, tcmp.bound1,
                       allowance, ok, bound2=tcmp.bound2))

    # revealment bound and tree verdicts on sampled configurations
    rmodel = build_hierarchical(1, 2, cfg["revealment.level"], alpha)
    rb = cfg["revealment.beta"]
    law = exact.cluster_law(rmodel, rb)
    for n in (2, rmodel.vertex_count // 2, rmodel.vertex_count):
        ledger, _, _ = en.mc_revealment(rmodel, rb, n, n_mc, seed, stream=50 + n)
        trunc = math.fsum(law.tail(k) for k in range(1, n + 1))
        lhs, se = ledger.weighted_sum, ledger.weighted_stderr
        recs.append(record(S_, rmodel, rb, "weighted_revealment", lhs, key=f"n={n}", stderr=se, n_samples=n_mc,
                           seed=seed))
        recs.append(record(S_, rmodel, rb, "truncated_mean_size", trunc, key=f"n={n}"))
        verdicts.append(_v("revealment_bound", f"entropy.revealment_bound.mc.{rmodel.label}.n={n}", lhs, trunc,
                           sig * se, lhs <= trunc + sig * se))
    for name in ("torus3x3", "H(1,2,3)"):
        model = corpus([name])[0].model
        k = cfg["decision.samples"]
        try:
            for n in range(2, model.vertex_count + 1):
                en.mc_revealment(model, 0.8, n, max(k // model.vertex_count, 100), seed, check_verdict=True,
                                 stream=70 + n)
            ok = True
        except AssertionError:
            ok = False
        verdicts.append(_v("tree_verdict", f"entropy.tree_verdict.sampled.{name}", float(ok), 1, 0, ok, samples=k))
    yield recs, verdicts


# -- hierarchical-scan -----------------------------------------------------------------


def exact_beta_root(family: cr.Family, n: int, target: float = 0.5) -> float:
    """Root of the exact ``phi`` on a ball small enough for enumeration (Brent's method)."""
    model = family.ball(n)

    def g(b):
        return boundary_tail_sum(model, b, n) * exact.exact_chi(model, b) - target

    hi = 1.0
    while g(hi) < 0:
        hi *= 2
    return brentq(g, 1e-9, hi, xtol=1e-13)


def hierarchical_scan(cfg):
    S_ = "hierarchical-scan"
    d, L = cfg["model.d"], cfg["model.L"]
    seed, th = cfg["seed"], cfg["threads"]
    n_max, fb = cfg["scan.n_max"], cfg["fit.budget"]
    for alpha in cfg["model.alpha"]:
        fam = cr.Family(d, L, alpha)
        meta = {"d": d, "L": L, "alpha": alpha, "label": f"H(d={d},L={L},alpha={alpha:g})"}
        scan = cr.critical_scan(fam, n_max, budget=cfg["scan.budget"], seed=seed, tol=cfg["scan.tol"],
                                stderr_target=cfg["scan.stderr_target"] or None, threads=th)
        recs, verdicts = [], []
        for n, res in scan.solver.items():
            recs.append(record(S_, {**meta, "n": n}, res["beta_n"], "beta_n", res["beta_n"], key=n,
                               n_samples=res["n_samples"], seed=seed))
            recs.append(record(S_, {**meta, "n": n}, res["beta_n"], "phi_at_beta_n", res["phi"], key=n,
                               stderr=res["phi_stderr"], n_samples=res["n_samples"], seed=seed))
        bc = scan.beta_c_estimate
        recs.append(record(S_, meta, bc, "beta_c_estimate", bc, key="ratio=" + format(scan.extrapolation["ratio"], ".6g")))

        bn = [scan.beta_n[n] for n in sorted(scan.beta_n)]
        diffs = np.diff(bn)
        verdicts.append(_v("beta_n_monotone", f"critical.beta_n_monotone.alpha={alpha:g}", float(diffs.min()), 0.0,
                           1e-6, bool(np.all(diffs >= -1e-6)), beta_n=bn))
        tol_phi = cfg["scan.phi_tol"]
        phi_worst, fresh_worst, fresh_ok = 0.0, 0.0, True
        for n, res in scan.solver.items():
            phi_worst = max(phi_worst, abs(res["phi"] - 0.5) + 4 * res["phi_stderr"])
            fresh = cr.phi_ball(fam, res["beta_n"], n, max(res["n_samples"], 100), seed + 1, threads=th)
            comb = math.hypot(fresh.stderr, res["phi_stderr"])
            if res["exact"]:
                # deterministic level: the fresh value is the same exact function, off only by the bracket
                fresh_ok &= abs(fresh.value - res["phi"]) <= 1e-12 and abs(res["phi"] - 0.5) <= tol_phi
            else:
                fresh_ok &= abs(fresh.value - 0.5) <= 4 * comb
                fresh_worst = max(fresh_worst, abs(fresh.value - 0.5) / comb)
            recs.append(record(S_, {**meta, "n": n}, res["beta_n"], "phi_fresh", fresh.value, key=n,
                               stderr=fresh.stderr, n_samples=fresh.n_samples, seed=seed + 1))
        verdicts.append(_v("phi_root", f"critical.phi_root.alpha={alpha:g}", phi_worst, tol_phi, tol_phi,
                           phi_worst <= tol_phi, measure="|phi - 1/2| + 4 stderr"))
        verdicts.append(_v("phi_root_fresh", f"critical.phi_root_fresh.alpha={alpha:g}", fresh_worst, 4.0, 4.0,
                           fresh_ok, measure="max |phi_fresh - 1/2| / combined stderr"))
        exact_ns = [n for n in scan.solver if scan.solver[n]["exact"]]
        gap = max(abs(scan.beta_n[n] - exact_beta_root(fam, n)) for n in exact_ns) if exact_ns else 0.0
        verdicts.append(_v("beta_1_closed_form", f"critical.exact_root.alpha={alpha:g}", gap, 1e-6, 1e-6,
                           gap <= 1e-6, levels=exact_ns))
        verdicts.append(_v("beta_c_order", f"critical.beta_c_order.alpha={alpha:g}", bc, max(bn), 0, bc >= max(bn),
                           extrapolation=scan.extrapolation))

        n_range = range(cfg["fit.n_min"], n_max + 1)
        fit = cr.scaling_fit_chi(fam, bc, n_range, fb, seed + 2, threads=th)
        target = alpha * math.log(L)
        for n, v in fit.extra["chi"].items():
            recs.append(record(S_, {**meta, "n": n}, bc, "chi_ball", v, key=n, stderr=fit.extra["stderr"][n],
                               n_samples=fb, seed=seed + 2))
        rel = abs(fit.slope - target) / target
        verdicts.append(_v("chi_scaling", f"critical.chi_slope.alpha={alpha:g}", fit.slope, target,
                           cfg["tol.chi_slope"], rel <= cfg["tol.chi_slope"], r_squared=fit.r_squared,
                           relative_error=rel, beta=bc))
        low = cr.scaling_fit_chi(fam, bn[0], n_range, fb, seed + 2, threads=th)
        verdicts.append(_v("chi_saturation", f"critical.chi_saturation.alpha={alpha:g}", low.slope, fit.slope, 0,
                           low.slope < fit.slope, beta_low=bn[0]))

        ng = cr.nabla_growth_check(fam, bc, n_range, fb, seed + 3, threads=th)
        for n, v in ng.extra["nabla"].items():
            recs.append(record(S_, {**meta, "n": n}, bc, "nabla_ball", v, key=n, n_samples=fb, seed=seed + 3))
        if 3 * alpha < d:
            ok = ng.extra["max_over_min"] <= cfg["tol.nabla_ratio"]
            verdicts.append(_v("nabla_regime", f"critical.nabla_bounded.alpha={alpha:g}", ng.extra["max_over_min"],
                               cfg["tol.nabla_ratio"], 0, ok, regime=ng.extra["regime"]))
        elif 3 * alpha > d:
            t = ng.extra["target_slope"]
            rel = abs(ng.slope - t) / t
            verdicts.append(_v("nabla_regime", f"critical.nabla_slope.alpha={alpha:g}", ng.slope, t,
                               cfg["tol.nabla_slope"], rel <= cfg["tol.nabla_slope"], relative_error=rel,
                               regime=ng.extra["regime"], r_squared=ng.r_squared))
        else:
            verdicts.append(_v("nabla_regime", f"critical.nabla_regime.alpha={alpha:g}", ng.slope, 0, 0, True,
                               gated=False, regime=ng.extra["regime"]))

        if alpha < 2 * d / 5:
            xt = cr.correlation_length_trend(fam, scan.beta_n, bc)
            t = xt.extra["target_slope"] if alpha < d / 3 else xt.extra["alt_target_slope"]
            rel = abs(xt.slope - t) / abs(t)
            verdicts.append(_v("xi_trend", f"critical.xi_slope.alpha={alpha:g}", xt.slope, t, cfg["tol.xi_slope"],
                               rel <= cfg["tol.xi_slope"], relative_error=rel, r_squared=xt.r_squared))
            mf = xt.extra["mean_field_constant"]
            verdicts.append(_v("xi_mean_field", f"critical.xi_mean_field.alpha={alpha:g}", mf, 0.0, 0, mf > 0))

        band = cfg["window.band"]
        full = fam.ball(n_max)
        w_lo, w_hi, w_ok = math.inf, 0.0, True
        for n in range(max(cfg["fit.n_min"], 1), n_max):
            beta = 0.5 * (scan.beta_n[n] + scan.beta_n[n + 1])
            c = cr.chi_ball(fam, n_max, beta, fb, seed + 4 + n, threads=th)
            ratio = c.value / L ** (alpha * n)
            recs.append(record(S_, {**meta, "n": n_max}, beta, "window_ratio", ratio, key=n, stderr=c.stderr / L ** (alpha * n),
                               n_samples=fb, seed=seed + 4 + n))
            w_lo, w_hi = min(w_lo, ratio), max(w_hi, ratio)
            w_ok &= 1 / band <= ratio <= band
        verdicts.append(_v("window", f"critical.window.alpha={alpha:g}", w_hi, band, 0, w_ok, min_ratio=w_lo,
                           vertices=full.vertex_count))

        p_ok, p_min = True, math.inf
        for n in sorted(scan.beta_n):
            p = cr.phi_ball(fam, bc, n, fb, seed + 5, threads=th)
            recs.append(record(S_, {**meta, "n": n}, bc, "phi_at_beta_c", p.value, key=n, stderr=p.stderr,
                               n_samples=p.n_samples, seed=seed + 5))
            p_min = min(p_min, p.value)
            p_ok &= p.value + 4 * p.stderr >= cfg["tol.phi_critical"]
        verdicts.append(_v("phi_critical", f"critical.phi_at_beta_c.alpha={alpha:g}", p_min, cfg["tol.phi_critical"],
                           "4 stderr", p_ok))
        yield recs, verdicts


# -- plot-data ------------------------------------------------------------------------


def plot_data(cfg):
    """Reshape a suite CSV into ``series, x, y, yerr`` rows; the table is returned in the verdict detail."""
    rows = read_csv(cfg["input"])
    keep = set(cfg["functionals"]) if cfg["functionals"] else None
    xcol = cfg["x"]
    out = []
    for r in rows:
        if keep is not None and r["functional"] not in keep:
            continue
        x = r.get(xcol, "")
        if x == "":
            continue
        series = "|".join(s for s in (r["suite"], r["model"], r["functional"],
                                      "" if xcol == "key" else r["key"]) if s)
        out.append((series, x, r["value"], r["stderr"]))
    out.sort(key=lambda t: (t[0], float(t[1])))
    yield [], [_v("plot_input", "plot.input", len(rows), len(out), 0, len(rows) > 0, table=out)]


def validate(cfg):
    """Resolve model names and inputs before a run; raises ``ConfigError`` on bad values."""
    from pathlib import Path

    from .config import ConfigError

    for key in ("models", "mc.models"):
        for name in cfg.get(key) or ():
            try:
                model_from_name(name, cfg.get("mc.alpha", HIERARCHICAL_ALPHA))
            except KeyError as exc:
                raise ConfigError(str(exc.args[0]), None, key) from None
            except ValueError as exc:
                raise ConfigError(f"model {name!r}: {exc}", None, key) from None
    if cfg["suite"] == "plot-data" and not Path(cfg["input"]).is_file():
        raise ConfigError(f"input file {cfg['input']!r} does not exist", None, "input")
    if cfg["suite"] == "matrix-verify" and cfg["dims.min"] > min(cfg["dims.max"], cfg["block.dims.max"]):
        raise ConfigError("dims.min exceeds dims.max or block.dims.max", None, "dims.min")


SUITE_FUNCS = {
    "matrix-verify": matrix_verify,
    "diagram-verify": diagram_verify,
    "oracle-regression": oracle_regression,
    "inequality-suite": inequality_suite,
    "entropy-suite": entropy_suite,
    "hierarchical-scan": hierarchical_scan,
    "plot-data": plot_data,
}


def collect(cfg):
    """Run a suite to completion and return ``(records, verdicts)``."""
    records, verdicts = [], []
    for r, v in SUITE_FUNCS[cfg["suite"]](cfg):
        records += r
        verdicts += v
    return records, verdicts
