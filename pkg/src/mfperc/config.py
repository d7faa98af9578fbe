"""Experiment configuration: flat ``key = value`` text with dotted keys.

Example::

    # oracle regression on two models
    schema_version = 1
    suite = oracle-regression
    seed = 7
    models = C4, H(1,2,3)
    betas = 0.2, 0.8
    mc.samples = 100000

Rules: one assignment per line; ``#`` starts a comment; blank lines are
ignored; keys are dotted identifiers; a key may appear once.  Values are
typed by the schema of the named suite (``int``, ``float``, ``bool``,
``str`` or comma-separated lists of those).  Unknown keys, missing required
keys, bad values and duplicates are reported with the line number and key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

SCHEMA_VERSION = 1

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_-]*(\.[A-Za-z_][A-Za-z0-9_-]*)*$")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str = "<spec>"):
        self.message = message
        self.line = line
        self.key = key
        self.source = source
        where = source if line is None else f"{source}:{line}"
        field_part = f" field '{key}':" if key else ""
        super().__init__(f"{where}:{field_part} {message}")


@dataclass(frozen=True)
class Field:
    type: str
    default: object = None
    required: bool = False
    choices: tuple | None = None
    minimum: float | None = None
    doc: str = ""


def _f(type_, default=None, **kw) -> Field:
    return Field(type_, default, **kw)


SUITES = ("matrix-verify", "diagram-verify", "oracle-regression", "inequality-suite", "entropy-suite",
          "hierarchical-scan", "plot-data")

COMMON = {
    "schema_version": _f("int", required=True, doc="must equal 1"),
    "suite": _f("str", required=True, choices=SUITES),
    "seed": _f("int", 0, minimum=0),
    "threads": _f("int", 1, minimum=1),
    "output.dir": _f("str", "out"),
    "output.prefix": _f("str", ""),
}

CORPUS_KEYS = {
    "models": _f("list[str]", None, doc="corpus model names; empty means the full corpus"),
    "betas": _f("list[float]", (0.2, 0.5, 0.8, 1.2)),
}

SCHEMAS = {
    "matrix-verify": {
        "trials": _f("int", 1000, minimum=1),
        "dims.min": _f("int", 2, minimum=1),
        "dims.max": _f("int", 16, minimum=1),
        "block.dims.max": _f("int", 8, minimum=1),
        "tol.schur": _f("float", 1e-10, minimum=0),
        "tol.ando": _f("float", 1e-9, minimum=0),
        "tol.block": _f("float", 1e-9, minimum=0),
        "tol.sqrt": _f("float", 1e-10, minimum=0),
        **CORPUS_KEYS,
    },
    "diagram-verify": {
        **CORPUS_KEYS,
        "tol.chain": _f("float", 1e-10, minimum=0),
        "tol.quadsum": _f("float", 1e-10, minimum=0),
        "tol.fourier": _f("float", 1e-9, minimum=0),
        "mc.models": _f("list[str]", ("H(1,2,5)", "H(2,2,5)")),
        "mc.alpha": _f("float", 0.5),
        "mc.beta": _f("float", 0.8, minimum=0),
        "mc.samples": _f("int", 20000, minimum=100),
        "mc.sigma": _f("float", 4.0, minimum=0),
    },
    "oracle-regression": {
        **CORPUS_KEYS,
        "mc.samples": _f("int", 100000, minimum=100),
        "mc.sigma": _f("float", 4.0, minimum=0),
        "fd.step": _f("float", 0.02, minimum=0),
    },
    "inequality-suite": {
        **CORPUS_KEYS,
        "tol.bound": _f("float", 1e-9, minimum=0),
        "integral.points": _f("int", 65, minimum=3),
    },
    "entropy-suite": {
        **CORPUS_KEYS,
        "grid.size": _f("int", 50, minimum=2),
        "grid.min": _f("float", 1e-3, minimum=0),
        "grid.max": _f("float", 10.0, minimum=0),
        "mc.samples": _f("int", 100000, minimum=100),
        "mc.sigma": _f("float", 4.0, minimum=0),
        "mc.level": _f("int", 4, minimum=1),
        "mc.alpha": _f("float", 0.5),
        "mc.beta1": _f("float", 0.3, minimum=0),
        "mc.beta2": _f("float", 0.5, minimum=0),
        "mc.n_target": _f("int", 5, minimum=1),
        "revealment.level": _f("int", 3, minimum=1),
        "revealment.beta": _f("float", 0.5, minimum=0),
        "decision.samples": _f("int", 100000, minimum=1),
    },
    "hierarchical-scan": {
        "model.d": _f("int", 1, minimum=1),
        "model.L": _f("int", 2, minimum=2),
        "model.alpha": _f("list[float]", (0.2, 0.5)),
        "scan.n_max": _f("int", 8, minimum=4),
        "scan.budget": _f("int", 20000, minimum=100),
        "scan.stderr_target": _f("float", 2.4e-4, minimum=0),
        "scan.tol": _f("float", 1e-4, minimum=0),
        "scan.phi_tol": _f("float", 1e-3, minimum=0),
        "fit.n_min": _f("int", 3, minimum=0),
        "fit.budget": _f("int", 20000, minimum=100),
        "tol.chi_slope": _f("float", 0.3, minimum=0),
        "tol.nabla_ratio": _f("float", 2.0, minimum=1),
        "tol.nabla_slope": _f("float", 0.5, minimum=0),
        "tol.xi_slope": _f("float", 0.4, minimum=0),
        "tol.phi_critical": _f("float", 0.9, minimum=0),
        "window.band": _f("float", 10.0, minimum=1),
    },
    "plot-data": {
        "input": _f("str", required=True, doc="CSV produced by another suite"),
        "x": _f("str", "beta", choices=("beta", "key", "n", "alpha")),
        "functionals": _f("list[str]", None),
    },
}


def schema_for(suite: str) -> dict:
    return {**COMMON, **SCHEMAS[suite]}


_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}


def _split_list(text: str) -> list[str]:
    """Comma-separated items; commas inside parentheses do not split."""
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or items:
        items.append(tail)
    return [i for i in items if i != ""]


def convert(text: str, type_: str):
    text = text.strip()
    if type_.startswith("list["):
        inner = type_[5:-1]
        return tuple(convert(t, inner) for t in _split_list(text))
    if type_ == "int":
        return int(text)
    if type_ == "float":
        return float(text)
    if type_ == "bool":
        if text.lower() not in _BOOL:
            raise ValueError(f"expected a boolean, got {text!r}")
        return _BOOL[text.lower()]
    if type_ == "str":
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            return text[1:-1]
        return text
    raise ValueError(f"unknown type {type_}")


def parse_lines(text: str, source: str = "<spec>") -> dict[str, tuple[str, int]]:
    """Raw ``key -> (value text, line number)``."""
    out: dict[str, tuple[str, int]] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", no, None, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError("malformed key", no, key, source)
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})", no, key, source)
        out[key] = (value, no)
    return out


def _validate(key, value, fld: Field, line, source):
    if fld.choices is not None and value not in fld.choices:
        raise ConfigError(f"value {value!r} not in {list(fld.choices)}", line, key, source)
    if fld.minimum is not None:
        vals = value if isinstance(value, tuple) else (value,)
        for v in vals:
            if isinstance(v, (int, float)) and v < fld.minimum:
                raise ConfigError(f"value {v!r} below minimum {fld.minimum}", line, key, source)


def build(raw: dict[str, tuple[str, int]], source: str = "<spec>") -> dict:
    """Typed, validated configuration with defaults filled in."""
    if "suite" not in raw:
        raise ConfigError("missing required key", None, "suite", source)
    suite_text, suite_line = raw["suite"]
    suite = convert(suite_text, "str")
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {list(SUITES)}", suite_line, "suite", source)
    schema = schema_for(suite)
    cfg = {}
    for key, (text, line) in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key for suite {suite}", line, key, source)
        fld = schema[key]
        try:
            value = convert(text, fld.type)
        except ValueError as exc:
            raise ConfigError(f"cannot read {text!r} as {fld.type} ({exc})", line, key, source) from None
        _validate(key, value, fld, line, source)
        cfg[key] = value
    for key, fld in schema.items():
        if key not in cfg:
            if fld.required:
                raise ConfigError("missing required key", None, key, source)
            cfg[key] = fld.default
    if cfg["schema_version"] != SCHEMA_VERSION:
        line = raw.get("schema_version", ("", None))[1]
        raise ConfigError(f"unsupported schema version {cfg['schema_version']} (expected {SCHEMA_VERSION})",
                          line, "schema_version", source)
    if not cfg["output.prefix"]:
        cfg["output.prefix"] = suite
    return cfg


def load(text: str, overrides=(), source: str = "<spec>", implicit=None) -> dict:
    """Parse ``text``, apply ``key=value`` overrides (with ``--override`` as their source) and validate.

    ``implicit`` maps keys to value text used only when the spec text leaves them unset.
    """
    raw = parse_lines(text, source)
    for key, value in (implicit or {}).items():
        raw.setdefault(key, (value, None))
    for i, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ConfigError("override must be key=value", i, None, "--override")
        key, value = (s.strip() for s in item.split("=", 1))
        if not _KEY.match(key):
            raise ConfigError("malformed key", i, key, "--override")
        raw[key] = (value, -i)
    try:
        return build(raw, source)
    except ConfigError as exc:
        if exc.line is not None and exc.line < 0:
            raise ConfigError(exc.message, -exc.line, exc.key, "--override") from None
        raise


def canonical(cfg: dict) -> str:
    """Sorted ``key = value`` text of a typed config; the basis of the config hash."""
    from .report import fmt

    lines = []
    for key in sorted(cfg):
        v = cfg[key]
        if isinstance(v, tuple):
            text = ", ".join(fmt(x) for x in v)
        else:
            text = fmt(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def document_schema(suite: str) -> str:
    """Human-readable schema listing for one suite."""
    rows = []
    for key, fld in schema_for(suite).items():
        req = "required" if fld.required else f"default {fld.default!r}"
        extra = f"; one of {list(fld.choices)}" if fld.choices else ""
        rows.append(f"{key:24s} {fld.type:12s} {req}{extra}{'; ' + fld.doc if fld.doc else ''}")
    return "\n".join(rows)
