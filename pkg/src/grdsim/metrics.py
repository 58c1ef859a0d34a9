"""Similarity between a test sample and family members or ID-matrices.

Pairwise metrics are written in terms of :func:`intersect_count`. The
family-level max/mean variants score all members in one pass through
:func:`grdsim.kernels.pair_counts`.

Zero-denominator conventions: two all-zero matrices are identical and
score 1; a cover with an empty reference set scores 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal

import numpy as np

from . import kernels
from .family import RED, FamilyModel, IdMatrix
from .grd import CastMatrix, GrdMatrix

logger = logging.getLogger(__name__)

BcMode = Literal["absolute", "signed"]


def _arr(x) -> np.ndarray:
    if isinstance(x, GrdMatrix):
        return x.weights
    if isinstance(x, CastMatrix):
        return x.bits
    if isinstance(x, IdMatrix):
        return x.tags
    return np.asarray(x)


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def intersect_count(A, B, p: int, q: int) -> int:
    """Number of cells where ``A == p`` and ``B == q``."""
    a, b = _arr(A), _arr(B)
    _same_shape(a, b)
    return int(np.count_nonzero((a == p) & (b == q)))


def count_equal(A, p: int) -> int:
    """``|A = p|``, the number of cells of ``A`` holding ``p``."""
    a = _arr(A)
    return intersect_count(a, a, p, p)


def four_to_one_fraction(Fk, Tc) -> Fraction | None:
    """Share of the family's red cells present in the sample; None without red cells."""
    red = count_equal(Fk, RED)
    if red == 0:
        return None
    return Fraction(intersect_count(Fk, Tc, RED, 1), red)


def one_to_four_fraction(Tc, Fk) -> Fraction | None:
    """Share of the sample's edges landing on red cells; None for an empty sample."""
    ones = count_equal(Tc, 1)
    if ones == 0:
        return None
    return Fraction(intersect_count(Tc, Fk, 1, RED), ones)


def four_to_one(Fk, Tc) -> float:
    frac = four_to_one_fraction(Fk, Tc)
    if frac is None:
        logger.info("family ID-matrix has no red cells; Four.to.One cover is 0")
        return 0.0
    return frac.numerator / frac.denominator


def one_to_four(Tc, Fk) -> float:
    frac = one_to_four_fraction(Tc, Fk)
    if frac is None:
        logger.info("test sample has no edges; One.to.Four cover is 0")
        return 0.0
    return frac.numerator / frac.denominator


def jaccard(Tc, Mc) -> float:
    both = intersect_count(Tc, Mc, 1, 1)
    only_t = intersect_count(Tc, Mc, 1, 0)
    only_m = intersect_count(Tc, Mc, 0, 1)
    denom = both + only_t + only_m
    if denom == 0:
        return 1.0
    return both / denom


def bray_curtis(T, M, mode: BcMode = "absolute") -> float:
    """One minus the Bray-Curtis dissimilarity of two weight matrices.

    ``mode="signed"`` reproduces the printed formula without the absolute
    value; it can leave [0, 1] and is kept only for comparison runs.
    """
    t, m = _arr(T).astype(np.int64), _arr(M).astype(np.int64)
    _same_shape(t, m)
    total = int((t + m).sum())
    if total == 0:
        return 1.0
    if mode == "absolute":
        diff = int(np.abs(t - m).sum())
    elif mode == "signed":
        diff = int((t - m).sum())
    else:
        raise ValueError(f"unknown Bray-Curtis mode {mode!r}")
    return 1.0 - diff / total


def tanimoto(T, M) -> float:
    t, m = _arr(T).astype(np.int64), _arr(M).astype(np.int64)
    _same_shape(t, m)
    dot = int((t * m).sum())
    denom = int((t * t).sum()) + int((m * m).sum()) - dot
    if denom == 0:
        return 1.0
    return dot / denom


def _ratio(num: np.ndarray, den: np.ndarray, empty: float) -> np.ndarray:
    out = np.full(num.shape, empty, dtype=np.float64)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out


@dataclass(frozen=True)
class MemberScores:
    """Per-member Jaccard, Bray-Curtis and Tanimoto for one sample vs. one family."""

    jaccard: np.ndarray
    bray_curtis: np.ndarray
    tanimoto: np.ndarray

    @staticmethod
    def _mean(v: np.ndarray) -> float:
        return float(np.sum(v)) / len(v)

    @property
    def j_max(self) -> float:
        return float(self.jaccard.max())

    @property
    def j_mean(self) -> float:
        return self._mean(self.jaccard)

    @property
    def bc_max(self) -> float:
        return float(self.bray_curtis.max())

    @property
    def bc_mean(self) -> float:
        return self._mean(self.bray_curtis)

    @property
    def tn_max(self) -> float:
        return float(self.tanimoto.max())


def member_scores(T, family: FamilyModel, bc_mode: BcMode = "absolute") -> MemberScores:
    """Score a sample against every member of ``family`` in one kernel pass."""
    t = _arr(T)
    if t.shape != (family.n_star, family.n_star):
        raise ValueError(f"shape mismatch: {t.shape} vs family n*={family.n_star}")
    c = kernels.pair_counts(t, family.weight_stack)
    if bc_mode == "absolute":
        bc_diff = c[:, kernels.ABSDIFF]
    elif bc_mode == "signed":
        bc_diff = c[:, kernels.SIGNED]
    else:
        raise ValueError(f"unknown Bray-Curtis mode {bc_mode!r}")
    sumsq_t = int((t.astype(np.int64) ** 2).sum())
    tn_den = sumsq_t + c[:, kernels.SUMSQ_M] - c[:, kernels.DOT]
    return MemberScores(
        jaccard=_ratio(c[:, kernels.INTER], c[:, kernels.UNION], 1.0),
        bray_curtis=1.0 - _ratio(bc_diff, c[:, kernels.TOTAL], 0.0),
        tanimoto=_ratio(c[:, kernels.DOT], tn_den, 1.0),
    )


def jaccard_max(Tc, family: FamilyModel) -> float:
    return member_scores(Tc, family).j_max


def jaccard_mean(Tc, family: FamilyModel) -> float:
    return member_scores(Tc, family).j_mean


def bc_max(T, family: FamilyModel, mode: BcMode = "absolute") -> float:
    return member_scores(T, family, mode).bc_max


def bc_mean(T, family: FamilyModel, mode: BcMode = "absolute") -> float:
    return member_scores(T, family, mode).bc_mean


def tn_max(T, family: FamilyModel) -> float:
    return member_scores(T, family).tn_max
