"""System-call dependency traces and the ScD graph they describe.

A trace file (``.scdep``) is line oriented::

    # comment
    S <id> <name> <in_args> <out_args>
    D <src_id>:<src_out_idx>,<dst_id>:<dst_in_idx>

``S`` lines declare system-calls, ``D`` lines record that output argument
``src_out_idx`` of ``src_id`` was passed as input argument ``dst_in_idx``
of ``dst_id``. Repeated ``D`` lines are distinct invocations and are kept.
"""
from __future__ import annotations

import graphlib
import logging
import re
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

_DEP_RE = re.compile(r"^(\d+):(\d+),(\d+):(\d+)$")


class TraceFormatError(ValueError):
    """Raised for malformed trace content; carries the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SyscallRecord:
    id: int
    name: str
    in_args: int
    out_args: int


@dataclass(frozen=True)
class DependencyRecord:
    src_id: int
    src_out_idx: int
    dst_id: int
    dst_in_idx: int

    def as_trace(self) -> str:
        return f"{self.src_id}:{self.src_out_idx},{self.dst_id}:{self.dst_in_idx}"


@dataclass(frozen=True)
class ScdGraph:
    """Directed multigraph of system-call invocations.

    ``calls`` keeps declaration order and ``edges`` keeps file order, so two
    graphs compare equal only if they serialize identically.
    """

    calls: tuple[SyscallRecord, ...] = ()
    edges: tuple[DependencyRecord, ...] = ()

    def __post_init__(self):
        ids = set()
        for c in self.calls:
            if c.id in ids:
                raise ValueError(f"duplicate syscall id {c.id}")
            ids.add(c.id)
        for e in self.edges:
            if e.src_id not in ids or e.dst_id not in ids:
                raise ValueError(f"edge {e.as_trace()} references an unknown syscall id")

    def call(self, syscall_id: int) -> SyscallRecord:
        for c in self.calls:
            if c.id == syscall_id:
                return c
        raise KeyError(syscall_id)

    def names_by_id(self) -> dict[int, str]:
        return {c.id: c.name for c in self.calls}

    @property
    def node_count(self) -> int:
        return len(self.calls)

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def node_count(g: ScdGraph) -> int:
    return len(g.calls)


def edge_count(g: ScdGraph) -> int:
    """Number of dependency records, parallel edges counted separately."""
    return len(g.edges)


def _parse_count(token: str, what: str, lineno: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise TraceFormatError(f"{what} must be an integer, got {token!r}", lineno) from None
    if value < 0:
        raise TraceFormatError(f"{what} must be non-negative, got {value}", lineno)
    return value


def parse_trace(text: str, *, source: str = "<trace>") -> ScdGraph:
    """Parse ``.scdep`` content into an :class:`ScdGraph`.

    Argument-index overruns and cycles are logged as warnings; the trace
    pseudo-calls (``ACCESS_MASK`` and friends) carry argument types, not
    true signatures, so their counts are unreliable.
    """
    calls: dict[int, SyscallRecord] = {}
    edges: list[DependencyRecord] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, _, rest = line.partition(" ")
        if kind == "S":
            parts = rest.split()
            if len(parts) != 4:
                raise TraceFormatError(
                    f"syscall line needs '<id> <name> <in_args> <out_args>', got {rest!r}", lineno
                )
            sid = _parse_count(parts[0], "syscall id", lineno)
            if sid in calls:
                raise TraceFormatError(f"duplicate syscall id {sid}", lineno)
            calls[sid] = SyscallRecord(
                sid,
                parts[1],
                _parse_count(parts[2], "in_args", lineno),
                _parse_count(parts[3], "out_args", lineno),
            )
        elif kind == "D":
            m = _DEP_RE.match(rest.strip())
            if m is None:
                raise TraceFormatError(
                    f"dependency line needs '<src>:<out>,<dst>:<in>', got {rest.strip()!r}", lineno
                )
            src, out_idx, dst, in_idx = (int(x) for x in m.groups())
            if out_idx < 1 or in_idx < 1:
                raise TraceFormatError("argument indices are 1-based", lineno)
            for sid in (src, dst):
                if sid not in calls:
                    raise TraceFormatError(f"dependency references unknown syscall id {sid}", lineno)
            if out_idx > calls[src].out_args:
                logger.warning(
                    "%s:%d: output index %d exceeds out_args=%d of %s",
                    source, lineno, out_idx, calls[src].out_args, calls[src].name,
                )
            if in_idx > calls[dst].in_args:
                logger.warning(
                    "%s:%d: input index %d exceeds in_args=%d of %s",
                    source, lineno, in_idx, calls[dst].in_args, calls[dst].name,
                )
            edges.append(DependencyRecord(src, out_idx, dst, in_idx))
        else:
            raise TraceFormatError(f"unknown record type {kind!r}", lineno)

    g = ScdGraph(tuple(calls.values()), tuple(edges))
    if find_cycle(g):
        logger.warning("%s: dependency graph is cyclic", source)
    return g


def find_cycle(g: ScdGraph) -> list[int] | None:
    """Return the ids along one directed cycle, or None for a dag."""
    sorter = graphlib.TopologicalSorter({c.id: () for c in g.calls})
    for e in g.edges:
        sorter.add(e.dst_id, e.src_id)
    try:
        sorter.prepare()
    except graphlib.CycleError as exc:
        return list(exc.args[1])
    return None


def serialize_trace(g: ScdGraph) -> str:
    lines = [f"S {c.id} {c.name} {c.in_args} {c.out_args}" for c in g.calls]
    lines += [f"D {e.as_trace()}" for e in g.edges]
    return "\n".join(lines) + "\n"


def read_trace(path: str | Path) -> ScdGraph:
    path = Path(path)
    return parse_trace(path.read_text(encoding="utf-8"), source=str(path))
