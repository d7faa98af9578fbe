"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Every criterion runs the corresponding suite at its default configuration
and judges the gated verdicts in its scope together with the runtime limit.
A failing criterion is reported as it is; nothing here is relaxed to turn a
line green.
"""

import os
import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from mfperc.config import load
from mfperc.suites import collect

THREADS = max(1, min(4, os.cpu_count() or 1))
README = Path(__file__).resolve().parents[1] / "README.md"

pytestmark = pytest.mark.acceptance
_CACHE = {}


def _run(suite, **overrides):
    key = (suite, tuple(sorted(overrides.items())))
    if key not in _CACHE:
        text = f"schema_version = 1\nsuite = {suite}\nthreads = {THREADS}\n"
        cfg = load(text, [f"{k}={v}" for k, v in overrides.items()])
        t0 = time.perf_counter()
        _, verdicts = collect(cfg)
        _CACHE[key] = (verdicts, time.perf_counter() - t0)
    return _CACHE[key]


def _judge(number, title, verdicts, elapsed, limit, select):
    scope = [v for v in verdicts if v.gated and select(v.check_id)]
    bad = [v.check_id for v in scope if not v.passed]
    slow = limit is not None and elapsed > limit
    ok = bool(scope) and not bad and not slow
    timing = f"{elapsed:.1f}s" + (f" (limit {limit:.0f}s)" if limit is not None else "")
    msg = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}; {len(scope) - len(bad)}/{len(scope)} checks, {timing}"
    if bad:
        shown = ", ".join(bad[:6]) + (" ..." if len(bad) > 6 else "")
        msg += f"; failing: {shown}"
    if slow:
        msg += "; over the runtime limit"
    ACCEPTANCE_LINES.append(msg)
    print(msg)
    assert ok, msg


def _prefix(*names):
    return lambda cid: any(cid.startswith(n + ".") or cid == n for n in names)


def test_criterion_1_oracle_regression():
    v, t = _run("oracle-regression")
    _judge(1, "MC functionals within 4 standard errors of exact values at 1e5 samples", v, t, 300,
           _prefix("oracle"))


def test_criterion_2_diagram_chain():
    v, t = _run("diagram-verify")
    _judge(2, "B <= A <= nabla^2 on exact corpus and on sampled hierarchical balls", v, t, 600,
           _prefix("diagram.chain"))


def test_criterion_3_differential_inequalities():
    v, t = _run("inequality-suite")
    _judge(3, "derivative of chi at least both stated right-hand sides, zero violations", v, t, 60,
           _prefix("inequality.stated_ab", "inequality.stated_nabla"))


def test_criterion_4_matrix_suites():
    v, t = _run("matrix-verify")
    _judge(4, "Schur, Ando, Hadamard power, block, Fejer and square-root suites", v, t, 120, _prefix("matrix"))


def test_criterion_5_entropy_suites():
    v, t = _run("entropy-suite")
    _judge(5, "KL grid, Pinsker, decision-tree comparison, tail comparison and revealment bound", v, t, 600,
           _prefix("entropy"))


def test_criterion_6_mass_transport_and_fourier():
    v, t = _run("diagram-verify")
    _judge(6, "quadruple-sum and Fourier routes agree with the matrix route", v, t, None,
           _prefix("diagram.quadsum", "diagram.fourier"))


def test_criterion_7_hierarchical_scan():
    v, t = _run("hierarchical-scan")
    wanted = {"critical.beta_n_monotone.alpha=0.2", "critical.phi_root.alpha=0.2",
              "critical.chi_slope.alpha=0.2", "critical.nabla_bounded.alpha=0.2",
              "critical.nabla_slope.alpha=0.5"}
    present = {x.check_id for x in v}
    assert wanted <= present, f"scan did not produce {sorted(wanted - present)}"
    _judge(7, "beta_n monotone, phi = 1/2, chi slope, bounded nabla (alpha 0.2) and nabla slope (alpha 0.5)",
           v, t, 1800, lambda cid: cid in wanted)


def test_criterion_8_desk_scale_limits_documented():
    text = README.read_text(encoding="utf-8").lower()
    needed = ["polylogarithmic", "critical exponents", "infinite-volume"]
    missing = [w for w in needed if w not in text]
    ok = not missing
    msg = (f"criterion 8 {'PASS' if ok else 'FAIL'}: README states what is not reproducible at desk scale"
           + (f"; missing {missing}" if missing else ""))
    ACCEPTANCE_LINES.append(msg)
    print(msg)
    assert ok, msg
