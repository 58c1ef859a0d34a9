import logging

import pytest
from hypothesis import given
from hypothesis import strategies as st

from grdsim.trace import (
    DependencyRecord,
    ScdGraph,
    SyscallRecord,
    TraceFormatError,
    edge_count,
    find_cycle,
    node_count,
    parse_trace,
    serialize_trace,
)


def test_example_counts(example_graph):
    assert node_count(example_graph) == 9
    assert edge_count(example_graph) == 17


def test_example_parallel_edges_kept(example_graph):
    s2_s3 = [e for e in example_graph.edges if (e.src_id, e.dst_id) == (2, 3)]
    assert len(s2_s3) == 10
    assert all(e == DependencyRecord(2, 1, 3, 1) for e in s2_s3)


def test_example_first_edge_direction(example_graph):
    assert example_graph.edges[0] == DependencyRecord(src_id=1, src_out_idx=1, dst_id=0, dst_in_idx=1)


def test_single_call_no_edges():
    g = parse_trace("S 0 NtClose 1 0\n")
    assert (node_count(g), edge_count(g)) == (1, 0)


def test_empty_graph():
    g = parse_trace("# nothing here\n\n")
    assert (node_count(g), edge_count(g)) == (0, 0)


def test_self_dependency_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="grdsim.trace"):
        g = parse_trace("S 0 NtClose 1 1\nD 0:1,0:1\n")
    assert (node_count(g), edge_count(g)) == (1, 1)
    assert "cyclic" in caplog.text


def test_identical_lines_keep_multiplicity():
    text = "S 0 A 1 1\nS 1 B 1 1\n" + "D 0:1,1:1\n" * 7
    assert edge_count(parse_trace(text)) == 7


def test_sparse_ids():
    g = parse_trace("S 10 A 0 1\nS 42 B 1 0\nD 10:1,42:1\n")
    assert g.call(42).name == "B"


@pytest.mark.parametrize(
    "text, lineno, fragment",
    [
        ("S 0 A 1\n", 1, "syscall line"),
        ("S 0 A 1 1\nS 0 B 1 1\n", 2, "duplicate syscall id"),
        ("S 0 A 1 1\nD 0:1,1:1\n", 2, "unknown syscall id 1"),
        ("S 0 A 1 1\nD 0:1;0:1\n", 2, "dependency line"),
        ("S 0 A x 1\n", 1, "in_args"),
        ("S 0 A 1 1\nD 0:0,0:1\n", 2, "1-based"),
        ("X 0\n", 1, "unknown record type"),
        ("D 0:1,1:1\nS 0 A 1 1\nS 1 B 1 1\n", 1, "unknown syscall id"),
    ],
)
def test_malformed(text, lineno, fragment):
    with pytest.raises(TraceFormatError) as exc:
        parse_trace(text)
    assert exc.value.lineno == lineno
    assert fragment in str(exc.value)


def test_arg_index_overrun_is_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="grdsim.trace"):
        g = parse_trace("S 0 ACCESS_MASK 0 1\nS 1 NtOpenSection 2 1\nD 0:3,1:1\n")
    assert edge_count(g) == 1
    assert "output index 3 exceeds" in caplog.text


def test_dag_has_no_cycle(example_graph):
    assert find_cycle(example_graph) is None


def test_constructor_rejects_dangling_edge():
    with pytest.raises(ValueError):
        ScdGraph((SyscallRecord(0, "A", 1, 1),), (DependencyRecord(0, 1, 5, 1),))


@st.composite
def graphs(draw):
    ids = draw(st.lists(st.integers(0, 500), min_size=1, max_size=12, unique=True))
    name = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,12}", fullmatch=True)
    calls = tuple(
        SyscallRecord(i, draw(name), draw(st.integers(0, 6)), draw(st.integers(0, 6))) for i in ids
    )
    edge = st.builds(
        DependencyRecord,
        st.sampled_from(ids),
        st.integers(1, 6),
        st.sampled_from(ids),
        st.integers(1, 6),
    )
    return ScdGraph(calls, tuple(draw(st.lists(edge, max_size=30))))


@given(graphs())
def test_round_trip(g):
    assert parse_trace(serialize_trace(g)) == g


@given(graphs())
def test_edge_endpoints_resolve(g):
    ids = {c.id for c in g.calls}
    assert all(e.src_id in ids and e.dst_id in ids for e in parse_trace(serialize_trace(g)).edges)
