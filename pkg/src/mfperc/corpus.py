"""The bundled corpus of oracle-sized models and the default beta grid."""

from __future__ import annotations

from dataclasses import dataclass

from .lattice import LatticeModel, build_dimer, build_hierarchical, build_torus_longrange, build_torus_nn

BETA_GRID = (0.2, 0.5, 0.8, 1.2)
HIERARCHICAL_ALPHA = 0.5


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    name: str
    model: LatticeModel

    @property
    def is_torus(self) -> bool:
        return self.model.kind in ("torus_nn", "torus_longrange")

    @property
    def test_set(self) -> tuple[int, ...]:
        """Set ``S`` used for the off-set and within-set functionals."""
        return (0,) if self.model.vertex_count <= 2 else (0, 1)


def _build():
    a = HIERARCHICAL_ALPHA
    return [
        CorpusEntry("dimer", build_dimer(1.0)),
        CorpusEntry("C3", build_torus_nn(1, 3)),
        CorpusEntry("C4", build_torus_nn(1, 4)),
        CorpusEntry("C6", build_torus_nn(1, 6)),
        CorpusEntry("torus3x3", build_torus_nn(2, 3)),
        CorpusEntry("H(1,2,1)", build_hierarchical(1, 2, 1, a)),
        CorpusEntry("H(1,2,2)", build_hierarchical(1, 2, 2, a)),
        CorpusEntry("H(1,2,3)", build_hierarchical(1, 2, 3, a)),
        CorpusEntry("H(2,2,1)", build_hierarchical(2, 2, 1, a)),
        CorpusEntry("LR-C4", build_torus_longrange(1, 4, 0.5)),
        CorpusEntry("LR-C5", build_torus_longrange(1, 5, 1.0)),
    ]


_CORPUS = None


def corpus(names=None) -> list[CorpusEntry]:
    """Corpus entries (shared instances, so exact results are cached across calls)."""
    global _CORPUS
    if _CORPUS is None:
        _CORPUS = _build()
    if names is None:
        return list(_CORPUS)
    table = {e.name: e for e in _CORPUS}
    missing = [n for n in names if n not in table]
    if missing:
        raise KeyError(f"unknown corpus models {missing}; available: {sorted(table)}")
    return [table[n] for n in names]
