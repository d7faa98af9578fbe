"""Run outputs: long-format CSV records, JSON verdicts and the run manifest.

CSV columns (fixed order)::

    suite, model, d, L, n, alpha, beta, functional, key, value, stderr, n_samples, seed

Empty cells mean "not applicable".  Floats are written with 17 significant
digits so that identical runs give byte-identical files.

Verdict schema (one object per gated or informational check)::

    {"check_id": str, "paper_ref": str, "lhs": number | str, "rhs": number | str,
     "tolerance": number | str, "pass": bool, "gated": bool, "detail": object}

Non-finite numbers are written as the strings ``"inf"``, ``"-inf"`` or ``"nan"``.
Files are first written with a ``.partial`` suffix and renamed only when the
run completes, so a crash leaves the partial outputs in place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("suite", "model", "d", "L", "n", "alpha", "beta", "functional", "key", "value", "stderr",
               "n_samples", "seed")
SCHEMA_VERSION = 1


def fmt(x) -> str:
    """Deterministic text form of a cell value."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def json_number(x):
    if x is None or isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (int, float, bool, np.integer, np.floating, np.bool_)) or obj is None:
        return json_number(obj)
    return str(obj)


@dataclass(frozen=True)
class Record:
    suite: str
    model: str
    d: object
    L: object
    n: object
    alpha: object
    beta: object
    functional: str
    key: object
    value: object
    stderr: object = None
    n_samples: object = None
    seed: object = None

    def row(self) -> list[str]:
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]


def record(suite: str, model, beta, functional: str, value, *, key=None, stderr=None,
           n_samples=None, seed=None, label: str | None = None) -> Record:
    """Build a record; ``model`` is a ``LatticeModel``, a dict of parameters, or None."""
    if model is None:
        name, d, L, n, alpha = label or "", None, None, None, None
    elif isinstance(model, dict):
        name = label or model.get("label", "")
        d, L, n, alpha = model.get("d"), model.get("L"), model.get("n"), model.get("alpha")
    else:
        name = label or model.label
        d, L, n, alpha = model.d, model.L, model.n, model.alpha
    return Record(suite, name, d, L, n, alpha, beta, functional, key, value, stderr, n_samples, seed)


@dataclass
class Verdict:
    check_id: str
    paper_ref: str
    lhs: object
    rhs: object
    tolerance: object
    passed: bool
    gated: bool = True
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"check_id": self.check_id, "paper_ref": self.paper_ref, "lhs": json_number(self.lhs),
                "rhs": json_number(self.rhs), "tolerance": json_number(self.tolerance),
                "pass": bool(self.passed), "gated": bool(self.gated), "detail": _jsonable(self.detail)}


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def config_hash(canonical_text: str) -> str:
    return hashlib.sha256(canonical_text.encode("utf-8")).hexdigest()


def failures(verdicts) -> list[str]:
    return [v.check_id for v in verdicts if v.gated and not v.passed]


class RunWriter:
    """Writes ``<prefix>.csv``, ``<prefix>.verdicts.json`` and ``<prefix>.manifest.json`` under ``out``.

    Records and verdicts are appended as they arrive and flushed to the
    ``.partial`` files; ``finish`` renames them.  Used as a context manager, an
    exception leaves the ``.partial`` files behind.
    """

    def __init__(self, out_dir, prefix: str, manifest: dict):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.prefix = prefix
        self.manifest = dict(manifest)
        self.records: list[Record] = []
        self.verdicts: list[Verdict] = []
        self.paths = {"csv": self.out / f"{prefix}.csv",
                      "verdicts": self.out / f"{prefix}.verdicts.json",
                      "manifest": self.out / f"{prefix}.manifest.json"}
        self._csv = open(self._partial("csv"), "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._csv, lineterminator="\r\n")
        self._writer.writerow(CSV_COLUMNS)
        self._csv.flush()
        self.finished = False

    def _partial(self, name) -> Path:
        p = self.paths[name]
        return p.with_name(p.name + ".partial")

    def add_records(self, records):
        for r in records:
            self.records.append(r)
            self._writer.writerow(r.row())
        self._csv.flush()

    def add_verdicts(self, verdicts):
        self.verdicts.extend(verdicts)
        self._dump_json("verdicts", self._verdict_doc(), partial=True)

    def _verdict_doc(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "suite": self.manifest.get("suite"),
                "verdicts": [v.to_json() for v in self.verdicts], "failures": failures(self.verdicts),
                "all_pass": not failures(self.verdicts)}

    def _dump_json(self, name, doc, partial: bool):
        path = self._partial(name) if partial else self.paths[name]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(doc), fh, indent=2, sort_keys=False, allow_nan=False)
            fh.write("\n")

    def finish(self, extra_manifest: dict | None = None) -> int:
        self._csv.close()
        self._dump_json("verdicts", self._verdict_doc(), partial=True)
        fails = failures(self.verdicts)
        code = 0 if not fails else 1
        man = {**self.manifest, **(extra_manifest or {}), "exit_code": code, "failures": fails,
               "outputs": {k: p.name for k, p in self.paths.items()},
               "n_records": len(self.records), "n_verdicts": len(self.verdicts)}
        self._dump_json("manifest", man, partial=True)
        for name in ("csv", "verdicts", "manifest"):
            os.replace(self._partial(name), self.paths[name])
        self.finished = True
        return code

    def abort(self, exc: BaseException):
        if not self._csv.closed:
            self._csv.close()
        man = {**self.manifest, "exit_code": 3, "error": f"{type(exc).__name__}: {exc}",
               "failures": failures(self.verdicts)}
        self._dump_json("verdicts", self._verdict_doc(), partial=True)
        self._dump_json("manifest", man, partial=True)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not self.finished:
            self.abort(exc)
        return False
