"""Shared builders for hand-made schema graphs."""

from __future__ import annotations

import pytest
from hypothesis import settings

from locrad.graph import AttributeNode, EdgeKind, FeatureRecord, SchemaEdge, SchemaGraph, TableNode

settings.register_profile("locrad", deadline=None, max_examples=50)
settings.load_profile("locrad")


def rec(name, data_type="Int", distinct=10, rows=100, nulls=0.0, length=0.0):
    return FeatureRecord(name, data_type, distinct, rows, nulls, length)


def build_graph(tables, fks=(), candidates=(), records=None, roles=None):
    """``tables`` maps table name -> list of column names.

    ``fks`` and ``candidates`` are ``(src_id, dst_id)`` attribute pairs;
    ``records`` optionally maps attribute id -> FeatureRecord.
    """
    records = records or {}
    roles = roles or {}
    tnodes, attrs, edges = [], [], []
    for t, cols in tables.items():
        tnodes.append(TableNode(t, roles.get(t, "table")))
        for c in cols:
            aid = f"{t}.{c}"
            attrs.append(AttributeNode(aid, t, records.get(aid, rec(c))))
            edges.append(SchemaEdge(aid, t, EdgeKind.MEMBERSHIP))
    edges += [SchemaEdge(s, d, EdgeKind.FOREIGN_KEY) for s, d in fks]
    edges += [SchemaEdge(s, d, EdgeKind.CANDIDATE) for s, d in candidates]
    return SchemaGraph(tuple(tnodes), tuple(attrs), tuple(edges))


@pytest.fixture
def chain_graph():
    """Tables A-B-C-D joined by FKs A.b_id -> B.id -> ... (a directed chain)."""
    return build_graph(
        {"A": ["id", "b_id"], "B": ["id", "c_id"], "C": ["id", "d_id"], "D": ["id"]},
        fks=[("A.b_id", "B.id"), ("B.c_id", "C.id"), ("C.d_id", "D.id")],
        candidates=[("A.b_id", "B.id"), ("B.c_id", "C.id"), ("C.d_id", "D.id"), ("A.id", "D.id")],
    )


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
