"""Family ID-matrices and trained family models."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .grd import CastMatrix, GrdMatrix, GroupOrderMismatch, _parse_matrix_rows, cast

WHITE, GRAY, RED = 2, 3, 4

DEFAULT_RED = 0.95
DEFAULT_WHITE = 0.05

FAM_MAGIC = "FAM"
FAM_VERSION = 1


class FamilyFormatError(ValueError):
    pass


def _exact(x: float) -> Fraction:
    # Through str so 0.95 means 95/100 rather than its binary neighbour.
    return Fraction(str(x))


@dataclass(frozen=True, eq=False)
class IdMatrix:
    tags: np.ndarray
    member_count: int
    red_threshold: float = DEFAULT_RED
    white_threshold: float = DEFAULT_WHITE

    def __post_init__(self):
        t = np.array(self.tags, dtype=np.int64, copy=True)
        t.setflags(write=False)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError(f"ID-matrix must be square, got shape {t.shape}")
        if not np.isin(t, (WHITE, GRAY, RED)).all():
            raise ValueError("ID-matrix tags must be 2, 3 or 4")
        if self.member_count < 1:
            raise ValueError("member_count must be >= 1")
        _check_thresholds(self.red_threshold, self.white_threshold)
        object.__setattr__(self, "tags", t)

    @property
    def n_star(self) -> int:
        return self.tags.shape[0]

    def tag_counts(self) -> dict[int, int]:
        return {tag: int((self.tags == tag).sum()) for tag in (WHITE, GRAY, RED)}

    def __eq__(self, other):
        if not isinstance(other, IdMatrix):
            return NotImplemented
        return (
            np.array_equal(self.tags, other.tags)
            and self.member_count == other.member_count
            and self.red_threshold == other.red_threshold
            and self.white_threshold == other.white_threshold
        )

    __hash__ = None


def _check_thresholds(red: float, white: float) -> None:
    if not 0 < red <= 1:
        raise ValueError(f"red threshold must lie in (0, 1], got {red}")
    if not 0 <= white < 1:
        raise ValueError(f"white threshold must lie in [0, 1), got {white}")
    if not white < red:
        raise ValueError("white threshold must be below red threshold")


def build_id_matrix(
    members: Sequence[GrdMatrix | np.ndarray],
    red_threshold: float = DEFAULT_RED,
    white_threshold: float = DEFAULT_WHITE,
) -> IdMatrix:
    """Tag every cell by the share ``p`` of members with a nonzero weight there.

    Red (4) for ``p >= red_threshold``, White (2) for ``p <= white_threshold``,
    Gray (3) strictly between. Comparisons are exact rationals.
    """
    if not members:
        raise ValueError("cannot build an ID-matrix from zero members")
    _check_thresholds(red_threshold, white_threshold)
    arrays = [m.weights if isinstance(m, GrdMatrix) else np.asarray(m) for m in members]
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise ValueError(f"member shapes differ: {shape} vs {a.shape}")
    m = len(arrays)
    present = np.sum([a > 0 for a in arrays], axis=0)

    red, white = _exact(red_threshold), _exact(white_threshold)
    # present/m >= r  <=>  present * r.den >= r.num * m
    tags = np.full(shape, GRAY, dtype=np.int64)
    tags[present * red.denominator >= red.numerator * m] = RED
    tags[present * white.denominator <= white.numerator * m] = WHITE
    return IdMatrix(tags, m, red_threshold, white_threshold)


@dataclass(frozen=True, eq=False)
class Member:
    sample_id: str
    grd: GrdMatrix

    @cached_property
    def cast(self) -> CastMatrix:
        return cast(self.grd)

    def __eq__(self, other):
        if not isinstance(other, Member):
            return NotImplemented
        return self.sample_id == other.sample_id and self.grd == other.grd

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FamilyModel:
    name: str
    id_matrix: IdMatrix
    members: tuple[Member, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError(f"family {self.name!r} has no members")
        if not self.name or any(ch.isspace() for ch in self.name):
            raise ValueError(f"family name must be non-empty without whitespace: {self.name!r}")
        order = self.members[0].grd.group_order
        for mem in self.members:
            if mem.grd.group_order != order:
                raise GroupOrderMismatch(f"family {self.name!r} mixes group orders")
        if self.id_matrix.n_star != len(order):
            raise ValueError("ID-matrix size does not match member matrices")
        if self.id_matrix.member_count != len(self.members):
            raise ValueError("ID-matrix member_count does not match the member list")

    @property
    def group_order(self) -> tuple[str, ...]:
        return self.members[0].grd.group_order

    @property
    def n_star(self) -> int:
        return len(self.group_order)

    @property
    def member_count(self) -> int:
        return len(self.members)

    @cached_property
    def weight_stack(self) -> np.ndarray:
        """Members' weights flattened into one C-contiguous ``(m, n*^2)`` array."""
        stack = np.ascontiguousarray(
            np.stack([mem.grd.weights.ravel() for mem in self.members]), dtype=np.int64
        )
        stack.setflags(write=False)
        return stack

    def __eq__(self, other):
        if not isinstance(other, FamilyModel):
            return NotImplemented
        return (
            self.name == other.name
            and self.id_matrix == other.id_matrix
            and self.members == other.members
        )

    __hash__ = None


def train_family(
    name: str,
    grds: Sequence[GrdMatrix],
    sample_ids: Sequence[str] | None = None,
    red_threshold: float = DEFAULT_RED,
    white_threshold: float = DEFAULT_WHITE,
) -> FamilyModel:
    grds = list(grds)
    if sample_ids is None:
        sample_ids = [f"m{i:04d}" for i in range(len(grds))]
    if len(sample_ids) != len(grds):
        raise ValueError("sample_ids and grds differ in length")
    idm = build_id_matrix(grds, red_threshold, white_threshold)
    members = tuple(Member(str(sid), g) for sid, g in zip(sample_ids, grds))
    return FamilyModel(name, idm, members)


def _rows(a: np.ndarray) -> list[str]:
    return [" ".join(str(int(v)) for v in row) for row in a]


def format_family(f: FamilyModel) -> str:
    idm = f.id_matrix
    lines = [
        f"{FAM_MAGIC} {FAM_VERSION} {f.name} {f.n_star} {f.member_count} "
        f"{idm.red_threshold!r} {idm.white_threshold!r}",
        "\t".join(f.group_order),
    ]
    lines += _rows(idm.tags)
    for mem in f.members:
        if not mem.sample_id or any(ch.isspace() for ch in mem.sample_id):
            raise ValueError(f"sample id must be non-empty without whitespace: {mem.sample_id!r}")
        lines.append(f"MEMBER {mem.sample_id}")
        lines += _rows(mem.grd.weights)
    return "\n".join(lines) + "\n"


def parse_family(text: str) -> FamilyModel:
    lines = text.splitlines()
    if not lines:
        raise FamilyFormatError("empty family file")
    header = lines[0].split()
    if len(header) != 7 or header[0] != FAM_MAGIC:
        raise FamilyFormatError(f"bad family header {lines[0]!r}")
    if header[1] != str(FAM_VERSION):
        raise FamilyFormatError(f"unsupported family file version {header[1]}")
    name = header[2]
    try:
        n, count = int(header[3]), int(header[4])
        red, white = float(header[5]), float(header[6])
    except ValueError:
        raise FamilyFormatError(f"bad family header {lines[0]!r}") from None

    expected = 2 + n + count * (n + 1)
    if len(lines) < expected:
        raise FamilyFormatError(
            f"shape mismatch: header implies {expected} lines, file has {len(lines)}"
        )
    if any(l.strip() for l in lines[expected:]):
        raise FamilyFormatError("shape mismatch: trailing content after last member")
    names = tuple(lines[1].split("\t"))
    if len(names) != n:
        raise FamilyFormatError(f"shape mismatch: {len(names)} group names for n*={n}")
    tags = _parse_matrix_rows(lines[2 : 2 + n], n, 3, FamilyFormatError)

    members = []
    pos = 2 + n
    for _ in range(count):
        kind, _, sid = lines[pos].partition(" ")
        if kind != "MEMBER" or not sid.strip():
            raise FamilyFormatError(f"line {pos + 1}: expected 'MEMBER <sample_id>'")
        w = _parse_matrix_rows(lines[pos + 1 : pos + 1 + n], n, pos + 2, FamilyFormatError)
        members.append(Member(sid.strip(), GrdMatrix(w, names)))
        pos += n + 1

    # The stored tags must be reproducible from the stored members.
    rebuilt = build_id_matrix([m.grd for m in members], red, white)
    if not np.array_equal(rebuilt.tags, tags):
        raise FamilyFormatError("checksum mismatch: ID-matrix disagrees with member matrices")
    return FamilyModel(name, rebuilt, tuple(members))


def save_family(f: FamilyModel, path: str | Path) -> None:
    Path(path).write_text(format_family(f), encoding="utf-8")


def load_family(path: str | Path) -> FamilyModel:
    path = Path(path)
    try:
        return parse_family(path.read_text(encoding="utf-8"))
    except FamilyFormatError as exc:
        raise FamilyFormatError(f"{path}: {exc}") from None
