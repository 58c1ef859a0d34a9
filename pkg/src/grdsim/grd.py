"""Group dependency (GrD) matrices.

System-calls are collapsed into functional groups and every ScD edge adds
one to the cell ``(group(src), group(dst))`` of an ``n* x n*`` matrix.
Groups that no edge touches stay as all-zero rows and columns.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

import numpy as np

from .trace import ScdGraph

logger = logging.getLogger(__name__)

GRD_MAGIC = "GRD"
GRD_VERSION = 1

OnUnknown = Literal["skip", "error"]


class GroupsFormatError(ValueError):
    pass


class GrdFormatError(ValueError):
    pass


class UnknownSyscallError(ValueError):
    def __init__(self, names: Iterable[str]):
        self.names = sorted(set(names))
        super().__init__(f"system-calls missing from the group map: {', '.join(self.names)}")


class GroupOrderMismatch(ValueError):
    """Matrices built under different group orders cannot be compared cell by cell."""


@dataclass(frozen=True)
class GroupMap:
    group_names: tuple[str, ...]
    syscall_to_group: dict[str, int] = field(hash=False)

    def __post_init__(self):
        if len(set(self.group_names)) != len(self.group_names):
            raise GroupsFormatError("group names must be unique")
        n = len(self.group_names)
        for name, idx in self.syscall_to_group.items():
            if not 0 <= idx < n:
                raise GroupsFormatError(f"{name} maps to invalid group index {idx}")

    @property
    def n_star(self) -> int:
        return len(self.group_names)

    def group_of(self, syscall: str) -> str:
        return self.group_names[self.syscall_to_group[syscall]]

    def index(self, group_name: str) -> int:
        return self.group_names.index(group_name)

    def sizes(self) -> dict[str, int]:
        counts = Counter(self.syscall_to_group.values())
        return {g: counts.get(i, 0) for i, g in enumerate(self.group_names)}


def load_groups(text: str) -> GroupMap:
    """Parse a ``<syscall>\\t<group>`` table; group order is order of first appearance."""
    group_index: dict[str, int] = {}
    mapping: dict[str, int] = {}
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if first:
            first = False
            if fields[0].lower() in ("syscall", "syscall_name"):
                continue
        if len(fields) != 2 or not all(fields):
            raise GroupsFormatError(f"line {lineno}: expected '<syscall>\\t<group>', got {line!r}")
        name, group = fields
        if name in mapping:
            raise GroupsFormatError(f"line {lineno}: duplicate system-call {name!r}")
        mapping[name] = group_index.setdefault(group, len(group_index))
    if not group_index:
        raise GroupsFormatError("groups file defines no groups")
    return GroupMap(tuple(group_index), mapping)


def default_groups_text() -> str:
    return resources.files("grdsim").joinpath("data/groups.tsv").read_text(encoding="utf-8")


def default_groups() -> GroupMap:
    return load_groups(default_groups_text())


def read_groups(path: str | Path | None = None) -> GroupMap:
    if path is None:
        return default_groups()
    return load_groups(Path(path).read_text(encoding="utf-8"))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.int64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GrdMatrix:
    weights: np.ndarray
    group_order: tuple[str, ...]

    def __post_init__(self):
        w = _frozen(self.weights)
        n = len(self.group_order)
        if w.shape != (n, n):
            raise ValueError(f"weights shape {w.shape} does not match {n} groups")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "group_order", tuple(self.group_order))

    @property
    def n_star(self) -> int:
        return len(self.group_order)

    def __eq__(self, other):
        if not isinstance(other, GrdMatrix):
            return NotImplemented
        return self.group_order == other.group_order and np.array_equal(self.weights, other.weights)

    __hash__ = None

    @property
    def total(self) -> int:
        return int(self.weights.sum())

    def is_empty(self) -> bool:
        return not self.weights.any()

    def edges(self) -> dict[tuple[str, str], int]:
        """Nonzero cells keyed by ``(source group, target group)``."""
        rows, cols = np.nonzero(self.weights)
        g = self.group_order
        return {(g[i], g[j]): int(self.weights[i, j]) for i, j in zip(rows, cols)}

    def non_isolated(self) -> list[str]:
        touched = self.weights.any(axis=0) | self.weights.any(axis=1)
        return [g for g, t in zip(self.group_order, touched) if t]

    def isolated(self) -> list[str]:
        """The Iset of the graph: groups with no incident edge."""
        touched = set(self.non_isolated())
        return [g for g in self.group_order if g not in touched]

    def cast(self) -> CastMatrix:
        return cast(self)


@dataclass(frozen=True, eq=False)
class CastMatrix:
    bits: np.ndarray

    def __post_init__(self):
        b = _frozen(self.bits)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError(f"cast matrix must be square, got shape {b.shape}")
        if not np.isin(b, (0, 1)).all():
            raise ValueError("cast matrix entries must be 0 or 1")
        object.__setattr__(self, "bits", b)

    @property
    def n_star(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other):
        if not isinstance(other, CastMatrix):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


def cast(m: GrdMatrix | np.ndarray) -> CastMatrix:
    w = m.weights if isinstance(m, GrdMatrix) else np.asarray(m)
    return CastMatrix((w > 0).astype(np.int64))


def build_grd(g: ScdGraph, gm: GroupMap, on_unknown: OnUnknown = "skip") -> GrdMatrix:
    """Collapse an ScD graph into its weighted group dependency matrix.

    Edges with an endpoint outside ``gm`` are dropped (``on_unknown="skip"``,
    logged once per graph) or rejected (``"error"``).
    """
    if on_unknown not in ("skip", "error"):
        raise ValueError(f"on_unknown must be 'skip' or 'error', got {on_unknown!r}")
    names = g.names_by_id()
    unknown = {n for n in names.values() if n not in gm.syscall_to_group}
    if unknown and on_unknown == "error":
        raise UnknownSyscallError(unknown)

    weights = np.zeros((gm.n_star, gm.n_star), dtype=np.int64)
    skipped = 0
    for e in g.edges:
        src = gm.syscall_to_group.get(names[e.src_id])
        dst = gm.syscall_to_group.get(names[e.dst_id])
        if src is None or dst is None:
            skipped += 1
            continue
        weights[src, dst] += 1
    if unknown:
        logger.warning(
            "skipped %d edge(s) touching ungrouped system-calls: %s",
            skipped, ", ".join(sorted(unknown)),
        )
    return GrdMatrix(weights, gm.group_names)


def format_grd(m: GrdMatrix) -> str:
    lines = [f"{GRD_MAGIC} {GRD_VERSION} {m.n_star}", "\t".join(m.group_order)]
    lines += [" ".join(str(int(v)) for v in row) for row in m.weights]
    return "\n".join(lines) + "\n"


def _parse_matrix_rows(lines: list[str], n: int, start_lineno: int, err=GrdFormatError) -> np.ndarray:
    if len(lines) < n:
        raise err(f"expected {n} matrix rows, found {len(lines)}")
    rows = []
    for k, line in enumerate(lines[:n]):
        try:
            row = [int(x) for x in line.split()]
        except ValueError:
            raise err(f"line {start_lineno + k}: non-integer matrix entry") from None
        if len(row) != n:
            raise err(f"line {start_lineno + k}: expected {n} entries, found {len(row)}")
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(n, n)


def parse_grd(text: str) -> GrdMatrix:
    lines = text.splitlines()
    if not lines:
        raise GrdFormatError("empty GrD file")
    header = lines[0].split()
    if len(header) != 3 or header[0] != GRD_MAGIC:
        raise GrdFormatError(f"bad GrD header {lines[0]!r}")
    if header[1] != str(GRD_VERSION):
        raise GrdFormatError(f"unsupported GrD version {header[1]}")
    n = int(header[2])
    if len(lines) < 2:
        raise GrdFormatError("missing group-name line")
    names = tuple(lines[1].split("\t"))
    if len(names) != n:
        raise GrdFormatError(f"header declares {n} groups, name line has {len(names)}")
    body = lines[2:]
    weights = _parse_matrix_rows(body, n, 3)
    if any(l.strip() for l in body[n:]):
        raise GrdFormatError("trailing content after matrix rows")
    if (weights < 0).any():
        raise GrdFormatError("negative weight")
    return GrdMatrix(weights, names)


def read_grd(path: str | Path) -> GrdMatrix:
    path = Path(path)
    try:
        return parse_grd(path.read_text(encoding="utf-8"))
    except GrdFormatError as exc:
        raise GrdFormatError(f"{path}: {exc}") from None


def write_grd(m: GrdMatrix, path: str | Path) -> None:
    Path(path).write_text(format_grd(m), encoding="utf-8")


def check_group_order(matrices: Iterable[GrdMatrix], group_order: tuple[str, ...]) -> None:
    for m in matrices:
        if m.group_order != tuple(group_order):
            raise GroupOrderMismatch(
                "matrix was built under a different group order than the active groups file"
            )
