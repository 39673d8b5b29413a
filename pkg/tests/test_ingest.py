import json

import pytest
from hypothesis import given, strategies as st

from locrad.exceptions import FormatError, LinkError, ParseError
from locrad.graph import DataType, EdgeKind, SchemaGraph, validate
from locrad.ingest import (
    apply_stats, emit_dataset, emit_json, load_dataset, load_json, load_stats, map_sql_type, parse_ddl,
)
from locrad.synthgen import GeneratorParams, generate_schema, inject_radius_cue

TWO_TABLES = "CREATE TABLE t (id INT); CREATE TABLE u (t_id INT, FOREIGN KEY (t_id) REFERENCES t(id));"


def test_empty_ddl_is_empty_graph():
    assert parse_ddl("") == SchemaGraph()


def test_two_table_example():
    g = parse_ddl(TWO_TABLES)
    assert [t.name for t in g.tables] == ["t", "u"]
    assert [a.id for a in g.attributes] == ["t.id", "u.t_id"]
    assert len(g.edges_of_kind(EdgeKind.MEMBERSHIP)) == 2
    assert [(e.src, e.dst) for e in g.fk_edges] == [("u.t_id", "t.id")]
    assert validate(g) == []
    # statistics absent from DDL default to zero
    assert g.feature_map["t.id"].distinct_count == 0


def test_unclosed_table_reports_position():
    with pytest.raises(ParseError) as err:
        parse_ddl("CREATE TABLE t (id INT")
    assert (err.value.line, err.value.col) == (1, 23)
    assert "')'" in str(err.value)


def test_dangling_fk_is_link_error():
    with pytest.raises(LinkError):
        parse_ddl("CREATE TABLE u (t_id INT, FOREIGN KEY (t_id) REFERENCES t(id));")


def test_richer_grammar():
    ddl = """
    -- comment line
    create table if not exists Customer (
        id BIGINT PRIMARY KEY AUTO_INCREMENT,
        name VARCHAR(64) NOT NULL,
        joined DATE DEFAULT NULL,
        score DECIMAL(5, 2),
        UNIQUE (name)
    );
    CREATE TABLE Orders (
        id INT NOT NULL,
        customer_id BIGINT,
        flag BOOLEAN,
        PRIMARY KEY (id),
        CONSTRAINT fk_c FOREIGN KEY (customer_id) REFERENCES Customer(id)
    );
    """
    g = parse_ddl(ddl)
    types = {a.id: a.features.data_type for a in g.attributes}
    assert types["Customer.name"] is DataType.TEXT
    assert types["Customer.joined"] is DataType.DATE
    assert types["Customer.score"] is DataType.FLOAT
    assert types["Orders.flag"] is DataType.BOOL
    assert [(e.src, e.dst) for e in g.fk_edges] == [("Orders.customer_id", "Customer.id")]


def test_unknown_type_maps_to_text(caplog):
    assert map_sql_type("GEOMETRY") is DataType.TEXT
    assert "GEOMETRY" in caplog.text


def test_duplicate_table_is_parse_error():
    with pytest.raises(ParseError):
        parse_ddl("CREATE TABLE t (a INT); CREATE TABLE t (b INT);")


def test_emit_empty_graph():
    assert emit_json(SchemaGraph()) == '{"tables":[],"attributes":[],"edges":[]}'


def test_round_trip_two_tables():
    g = parse_ddl(TWO_TABLES)
    assert load_json(emit_json(g)) == g


def test_unknown_edge_kind_is_format_error():
    doc = json.loads(emit_json(parse_ddl(TWO_TABLES)))
    doc["edges"][0]["kind"] = "weird"
    with pytest.raises(FormatError) as err:
        load_json(json.dumps(doc))
    assert err.value.pointer == "/edges/0/kind"


def test_stats_sidecar():
    stats = load_stats('{"t.id": {"distinct_count": 5, "row_count": 5}, "nope.x": {}}')
    g = parse_ddl(TWO_TABLES, stats)
    assert g.feature_map["t.id"].distinct_count == 5
    with pytest.raises(FormatError):
        apply_stats(g, {"t.id": {"row_count": "many"}})


@given(seed=st.integers(0, 10_000))
def test_emit_load_emit_is_stable(seed):
    g = generate_schema(GeneratorParams(n_tables=10, attrs_per_table=(1, 3), seed=seed))
    text = emit_json(g)
    assert emit_json(load_json(text)) == text
    assert load_json(text) == g


def test_dataset_round_trip():
    g = generate_schema(GeneratorParams(n_tables=20, attrs_per_table=(2, 3), seed=3))
    ds = inject_radius_cue(g, 1, 0.3, seed=3)
    back = load_dataset(emit_dataset(ds))
    assert back.samples == ds.samples
    assert back.graph == ds.graph
    assert back.nominal_radius == 1
    assert emit_dataset(back) == emit_dataset(ds)


@given(st.binary(max_size=200))
def test_parser_never_panics_on_bytes(data):
    try:
        parse_ddl(data)
    except (ParseError, LinkError):
        pass


@given(st.text(alphabet="CREATETABLE ()(,;-INTFORIGNKYv'\n", max_size=120))
def test_parser_never_panics_on_keyword_soup(text):
    try:
        parse_ddl(text)
    except (ParseError, LinkError):
        pass
