"""NP-similarity and the malware/benign verdict."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

from .family import FamilyModel
from .grd import GrdMatrix, GroupOrderMismatch, cast
from .metrics import (
    BcMode,
    four_to_one_fraction,
    member_scores,
    one_to_four_fraction,
)

VerdictRule = Literal["filter-then-decide", "np-argmax"]
VERDICT_RULES = ("filter-then-decide", "np-argmax")

DEFAULT_LAMBDA = 0.56


@dataclass(frozen=True)
class NpWeights:
    a: float = 4.0
    b: float = 2.0
    c1: float = 1.5
    c2: float = 1.2

    def __post_init__(self):
        if min(self.a, self.b, self.c1, self.c2) <= 0:
            raise ValueError("NP weights must be positive")
        if self.c1 < self.c2:
            raise ValueError("c1 must be >= c2")

    @property
    def Q(self) -> float:
        """Largest attainable F1*F2*F3, so that NP stays within [0, 1]."""
        s = self.a + self.b
        return self.c1 * s * s * s

    @classmethod
    def parse(cls, text: str) -> NpWeights:
        """Read ``"a,b,c1,c2"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected 'a,b,c1,c2', got {text!r}")
        return cls(*(float(p) for p in parts))


def f1_component(Fk, Tc, w: NpWeights = NpWeights()) -> float:
    f41 = four_to_one_fraction(Fk, Tc)
    f14 = one_to_four_fraction(Tc, Fk)
    # Exact rational test: both covers complete means identical red/edge topology.
    if f41 == 1 and f14 == 1:
        return w.c1 * (w.a + w.b)
    phi = w.a * float(f41 or 0) + w.b * float(f14 or 0)
    return w.c2 * phi


def f2_component(Tc, family: FamilyModel, w: NpWeights = NpWeights()) -> float:
    s = member_scores(Tc, family)
    return w.a * s.j_max + w.b * s.j_mean


def f3_component(T, family: FamilyModel, w: NpWeights = NpWeights(), bc_mode: BcMode = "absolute") -> float:
    s = member_scores(T, family, bc_mode)
    return w.a * s.bc_max + w.b * s.bc_mean


@dataclass(frozen=True)
class FamilyScore:
    family: str
    np: float
    tn_max: float
    f1: float = 0.0
    f2: float = 0.0
    f3: float = 0.0


def score_family(
    T: GrdMatrix,
    family: FamilyModel,
    w: NpWeights = NpWeights(),
    bc_mode: BcMode = "absolute",
) -> FamilyScore:
    """NP-similarity and max Tanimoto of ``T`` against one family."""
    if T.group_order != family.group_order:
        raise GroupOrderMismatch(f"sample and family {family.name!r} use different group orders")
    s = member_scores(T, family, bc_mode)
    if T.is_empty():
        return FamilyScore(family.name, 0.0, s.tn_max)
    f1 = f1_component(family.id_matrix, cast(T), w)
    f2 = w.a * s.j_max + w.b * s.j_mean
    f3 = w.a * s.bc_max + w.b * s.bc_mean
    return FamilyScore(family.name, f1 * f2 * f3 / w.Q, s.tn_max, f1, f2, f3)


def np_similarity(
    T: GrdMatrix,
    family: FamilyModel,
    w: NpWeights = NpWeights(),
    bc_mode: BcMode = "absolute",
) -> float:
    return score_family(T, family, w, bc_mode).np


@dataclass(frozen=True)
class Verdict:
    is_malware: bool
    best_family: str | None
    np_score: float
    tn_score: float
    threshold: float
    per_family_scores: tuple[FamilyScore, ...] = ()
    diagnostics: tuple[str, ...] = field(default=())

    def is_malware_at(self, lam: float) -> bool:
        """Re-threshold the same family selection at another lambda."""
        return self.best_family is not None and self.np_score >= lam

    def line(self) -> str:
        label = "MALWARE" if self.is_malware else "BENIGN"
        return f"{label} {self.best_family or '-'} {self.np_score:.6f} {self.tn_score:.6f}"


def select_family(scores: Sequence[FamilyScore], rule: VerdictRule = "filter-then-decide") -> FamilyScore:
    """Pick the deciding family.

    ``filter-then-decide`` keeps only families at the maximum Tanimoto and
    takes the highest NP among them; ``np-argmax`` ignores Tanimoto. Ties
    go to the lexicographically smallest name.
    """
    if not scores:
        raise ValueError("no family scores to select from")
    if rule == "filter-then-decide":
        top = max(s.tn_max for s in scores)
        candidates = [s for s in scores if s.tn_max == top]
    elif rule == "np-argmax":
        candidates = list(scores)
    else:
        raise ValueError(f"unknown verdict rule {rule!r}")
    return min(candidates, key=lambda s: (-s.np, s.family))


def detect(
    T: GrdMatrix,
    families: Sequence[FamilyModel],
    lam: float = DEFAULT_LAMBDA,
    w: NpWeights = NpWeights(),
    rule: VerdictRule = "filter-then-decide",
    bc_mode: BcMode = "absolute",
) -> Verdict:
    if not families:
        raise ValueError("detect needs at least one trained family")
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    scores = tuple(score_family(T, f, w, bc_mode) for f in families)
    if T.is_empty():
        return Verdict(False, None, 0.0, 0.0, lam, scores, ("empty sample: no group edges",))
    best = select_family(scores, rule)
    return Verdict(best.np >= lam, best.family, best.np, best.tn_max, lam, scores)
