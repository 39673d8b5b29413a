"""Schema ingestion: a small SQL DDL subset and a JSON interchange format.

DDL grammar (keywords case-insensitive)::

    script    := (statement ';')* statement?
    statement := CREATE TABLE name '(' item (',' item)* ')'
    item      := column | FOREIGN KEY '(' col ')' REFERENCES name '(' col ')'
               | [CONSTRAINT name] (PRIMARY KEY | UNIQUE) '(' col (',' col)* ')'
    column    := name type ['(' int [',' int] ')'] constraint*

Column constraints (NOT NULL, PRIMARY KEY, UNIQUE, DEFAULT <literal>) are
accepted and ignored. ``--`` starts a line comment.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field

from .dataset import Sample, TaskDataset, TaskKind
from .exceptions import FormatError, LinkError, ParseError
from .graph import (
    ALL_KINDS,
    TABLE,
    AttributeNode,
    DataType,
    EdgeKind,
    FeatureRecord,
    SchemaEdge,
    SchemaGraph,
    TableNode,
    attribute_id,
)

log = logging.getLogger(__name__)

SQL_TYPES = {
    "INT": DataType.INT,
    "INTEGER": DataType.INT,
    "BIGINT": DataType.INT,
    "SMALLINT": DataType.INT,
    "TINYINT": DataType.INT,
    "MEDIUMINT": DataType.INT,
    "SERIAL": DataType.INT,
    "FLOAT": DataType.FLOAT,
    "REAL": DataType.FLOAT,
    "DOUBLE": DataType.FLOAT,
    "DECIMAL": DataType.FLOAT,
    "NUMERIC": DataType.FLOAT,
    "TEXT": DataType.TEXT,
    "VARCHAR": DataType.TEXT,
    "CHAR": DataType.TEXT,
    "NVARCHAR": DataType.TEXT,
    "STRING": DataType.TEXT,
    "DATE": DataType.DATE,
    "DATETIME": DataType.DATE,
    "TIMESTAMP": DataType.DATE,
    "TIME": DataType.DATE,
    "BOOL": DataType.BOOL,
    "BOOLEAN": DataType.BOOL,
    "BIT": DataType.BOOL,
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<punct>[(),;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


@dataclass
class ColumnDef:
    name: str
    sql_type: str


@dataclass
class ForeignKeyClause:
    column: str
    ref_table: str
    ref_column: str
    line: int = 0
    col: int = 0


@dataclass
class CreateTableStatement:
    name: str
    columns: list[ColumnDef] = field(default_factory=list)
    foreign_keys: list[ForeignKeyClause] = field(default_factory=list)
    line: int = 0
    col: int = 0


@dataclass
class DdlDocument:
    statements: list[CreateTableStatement] = field(default_factory=list)


def tokenize_ddl(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(line, pos - line_start + 1, "a token", text[pos])
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def _fail(self, expected):
        tok = self.cur
        raise ParseError(tok.line, tok.col, expected, tok.text or "end of input")

    def keyword(self, word) -> bool:
        tok = self.cur
        return tok.kind == "ident" and tok.text.upper() == word

    def expect_keyword(self, word):
        if not self.keyword(word):
            self._fail(word)
        self.i += 1

    def punct(self, ch) -> bool:
        return self.cur.kind == "punct" and self.cur.text == ch

    def expect_punct(self, ch):
        if not self.punct(ch):
            self._fail(f"'{ch}'")
        self.i += 1

    def ident(self, what="identifier") -> Token:
        if self.cur.kind != "ident":
            self._fail(what)
        tok = self.cur
        self.i += 1
        return tok

    def number(self):
        if self.cur.kind != "number":
            self._fail("number")
        self.i += 1

    def document(self) -> DdlDocument:
        doc = DdlDocument()
        while self.cur.kind != "eof":
            if self.punct(";"):
                self.i += 1
                continue
            doc.statements.append(self.create_table())
            if self.cur.kind != "eof":
                self.expect_punct(";")
        return doc

    def create_table(self) -> CreateTableStatement:
        start = self.cur
        self.expect_keyword("CREATE")
        self.expect_keyword("TABLE")
        if self.keyword("IF"):
            self.i += 1
            self.expect_keyword("NOT")
            self.expect_keyword("EXISTS")
        name = self.ident("table name")
        stmt = CreateTableStatement(name.text, line=start.line, col=start.col)
        self.expect_punct("(")
        self.item(stmt)
        while self.punct(","):
            self.i += 1
            self.item(stmt)
        self.expect_punct(")")
        return stmt

    def _column_list(self) -> list[str]:
        self.expect_punct("(")
        cols = [self.ident("column name").text]
        while self.punct(","):
            self.i += 1
            cols.append(self.ident("column name").text)
        self.expect_punct(")")
        return cols

    def item(self, stmt):
        if self.keyword("CONSTRAINT"):
            self.i += 1
            self.ident("constraint name")
            if not (self.keyword("FOREIGN") or self.keyword("PRIMARY") or self.keyword("UNIQUE")):
                self._fail("FOREIGN, PRIMARY or UNIQUE")
        if self.keyword("FOREIGN"):
            tok = self.cur
            self.i += 1
            self.expect_keyword("KEY")
            self.expect_punct("(")
            col = self.ident("column name").text
            self.expect_punct(")")
            self.expect_keyword("REFERENCES")
            ref = self.ident("table name").text
            self.expect_punct("(")
            ref_col = self.ident("column name").text
            self.expect_punct(")")
            stmt.foreign_keys.append(ForeignKeyClause(col, ref, ref_col, tok.line, tok.col))
            return
        if self.keyword("PRIMARY") and self.toks[self.i + 1].text.upper() == "KEY" and self.toks[self.i + 2].text == "(":
            self.i += 2
            self._column_list()
            return
        if self.keyword("UNIQUE") and self.toks[self.i + 1].text == "(":
            self.i += 1
            self._column_list()
            return
        name = self.ident("column name")
        sql_type = self.ident("column type")
        if self.punct("("):
            self.i += 1
            self.number()
            if self.punct(","):
                self.i += 1
                self.number()
            self.expect_punct(")")
        self.constraints()
        stmt.columns.append(ColumnDef(name.text, sql_type.text.upper()))

    def constraints(self):
        while True:
            if self.keyword("NOT"):
                self.i += 1
                self.expect_keyword("NULL")
            elif self.keyword("NULL") or self.keyword("UNIQUE") or self.keyword("AUTO_INCREMENT"):
                self.i += 1
            elif self.keyword("PRIMARY"):
                self.i += 1
                self.expect_keyword("KEY")
            elif self.keyword("DEFAULT"):
                self.i += 1
                if self.cur.kind in ("number", "string", "ident"):
                    self.i += 1
                else:
                    self._fail("default value")
            else:
                return


def parse_ddl_document(text: str | bytes) -> DdlDocument:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(1, exc.start + 1, "UTF-8 text") from None
    return _Parser(tokenize_ddl(text)).document()


def map_sql_type(sql_type: str) -> DataType:
    dt = SQL_TYPES.get(sql_type.upper())
    if dt is None:
        log.warning("unknown SQL type %s mapped to Text", sql_type)
        return DataType.TEXT
    return dt


def parse_ddl(text: str | bytes, stats: dict | None = None) -> SchemaGraph:
    """Parse DDL into a SchemaGraph; ``stats`` is an optional sidecar mapping."""
    doc = parse_ddl_document(text)
    tables, attrs, edges = [], [], []
    columns: dict[str, set[str]] = {}
    for st in doc.statements:
        if st.name in columns:
            raise ParseError(st.line, st.col, f"a table name other than {st.name!r} (already declared)")
        columns[st.name] = set()
        tables.append(TableNode(st.name))
        for c in st.columns:
            if c.name in columns[st.name]:
                raise ParseError(st.line, st.col, f"unique column names in {st.name}")
            columns[st.name].add(c.name)
            aid = attribute_id(st.name, c.name)
            attrs.append(AttributeNode(aid, st.name, FeatureRecord(c.name, map_sql_type(c.sql_type))))
            edges.append(SchemaEdge(aid, st.name, EdgeKind.MEMBERSHIP))
    for st in doc.statements:
        for fk in st.foreign_keys:
            if fk.column not in columns[st.name]:
                raise LinkError(f"line {fk.line}: {st.name}.{fk.column} is not a declared column")
            if fk.ref_table not in columns:
                raise LinkError(f"line {fk.line}: table {fk.ref_table!r} is not declared")
            if fk.ref_column not in columns[fk.ref_table]:
                raise LinkError(f"line {fk.line}: {fk.ref_table}.{fk.ref_column} is not a declared column")
            edges.append(
                SchemaEdge(attribute_id(st.name, fk.column), attribute_id(fk.ref_table, fk.ref_column), EdgeKind.FOREIGN_KEY)
            )
    graph = SchemaGraph(tables=tuple(tables), attributes=tuple(attrs), edges=tuple(edges))
    if stats:
        graph = apply_stats(graph, stats)
    return graph


# ---------------------------------------------------------------------------
# sidecar statistics

_STAT_FIELDS = ("distinct_count", "row_count", "null_fraction", "mean_length")


def apply_stats(graph: SchemaGraph, stats: dict) -> SchemaGraph:
    """Merge ``{"table.attr": {distinct_count, ...}}`` into the feature records."""
    if not isinstance(stats, dict):
        raise FormatError("", "stats sidecar must be an object")
    updates = {}
    fmap = graph.feature_map
    for key, entry in stats.items():
        ptr = "/" + _escape(key)
        if key not in fmap:
            log.warning("stats for unknown attribute %s ignored", key)
            continue
        if not isinstance(entry, dict):
            raise FormatError(ptr, "expected an object")
        values = {}
        for f in _STAT_FIELDS:
            if f in entry:
                values[f] = _number(entry[f], f"{ptr}/{f}", integer=f in ("distinct_count", "row_count"))
        rec = fmap[key]
        updates[key] = FeatureRecord(
            rec.name,
            rec.data_type,
            values.get("distinct_count", rec.distinct_count),
            values.get("row_count", rec.row_count),
            values.get("null_fraction", rec.null_fraction),
            values.get("mean_length", rec.mean_length),
        )
    return graph.with_features(updates)


def load_stats(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("", f"invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise FormatError("", "stats sidecar must be an object")
    return data


# ---------------------------------------------------------------------------
# JSON interchange


def _escape(token: str) -> str:
    return str(token).replace("~", "~0").replace("/", "~1")


def _number(value, ptr, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise FormatError(ptr, "expected a number")
    if not math.isfinite(value):
        raise FormatError(ptr, "expected a finite number")
    if integer:
        if value != int(value) or value < 0:
            raise FormatError(ptr, "expected a nonnegative integer")
        return int(value)
    return float(value)


def _string(obj, key, ptr):
    if key not in obj:
        raise FormatError(f"{ptr}/{key}", "missing required field")
    val = obj[key]
    if not isinstance(val, str):
        raise FormatError(f"{ptr}/{key}", "expected a string")
    return val


def _list(obj, key, ptr="", required=True):
    if key not in obj:
        if required:
            raise FormatError(f"{ptr}/{key}", "missing required field")
        return []
    val = obj[key]
    if not isinstance(val, list):
        raise FormatError(f"{ptr}/{key}", "expected an array")
    return val


def graph_from_obj(data) -> SchemaGraph:
    if not isinstance(data, dict):
        raise FormatError("", "top level must be an object")
    tables = []
    for i, t in enumerate(_list(data, "tables")):
        ptr = f"/tables/{i}"
        if not isinstance(t, dict):
            raise FormatError(ptr, "expected an object")
        role = t.get("role", TABLE)
        if not isinstance(role, str):
            raise FormatError(f"{ptr}/role", "expected a string")
        tables.append(TableNode(_string(t, "name", ptr), role))
    attrs = []
    for i, a in enumerate(_list(data, "attributes")):
        ptr = f"/attributes/{i}"
        if not isinstance(a, dict):
            raise FormatError(ptr, "expected an object")
        dt = _string(a, "data_type", ptr)
        try:
            dtype = DataType(dt)
        except ValueError:
            raise FormatError(f"{ptr}/data_type", f"unknown data type {dt!r}") from None
        rec = FeatureRecord(
            name=_string(a, "name", ptr),
            data_type=dtype,
            distinct_count=_number(a.get("distinct_count", 0), f"{ptr}/distinct_count", integer=True),
            row_count=_number(a.get("row_count", 0), f"{ptr}/row_count", integer=True),
            null_fraction=_number(a.get("null_fraction", 0.0), f"{ptr}/null_fraction"),
            mean_length=_number(a.get("mean_length", 0.0), f"{ptr}/mean_length"),
        )
        attrs.append(AttributeNode(_string(a, "id", ptr), _string(a, "table", ptr), rec))
    edges = []
    for i, e in enumerate(_list(data, "edges")):
        ptr = f"/edges/{i}"
        if not isinstance(e, dict):
            raise FormatError(ptr, "expected an object")
        kind = _string(e, "kind", ptr)
        try:
            kind = EdgeKind(kind)
        except ValueError:
            raise FormatError(f"{ptr}/kind", f"unknown edge kind {kind!r}") from None
        label = e.get("label")
        if label is not None:
            label = _number(label, f"{ptr}/label")
        edges.append(SchemaEdge(_string(e, "src", ptr), _string(e, "dst", ptr), kind, label))
    return SchemaGraph(tables=tuple(tables), attributes=tuple(attrs), edges=tuple(edges))


def _num_out(x):
    return int(x) if float(x).is_integer() and abs(x) < 2**53 else float(x)


def graph_to_obj(graph: SchemaGraph) -> dict:
    tables = []
    for t in graph.tables:
        entry = {"name": t.name}
        if t.role != TABLE:
            entry["role"] = t.role
        tables.append(entry)
    attrs = [
        {
            "id": a.id,
            "table": a.table,
            "name": a.features.name,
            "data_type": a.features.data_type.value,
            "distinct_count": a.features.distinct_count,
            "row_count": a.features.row_count,
            "null_fraction": float(a.features.null_fraction),
            "mean_length": float(a.features.mean_length),
        }
        for a in graph.attributes
    ]
    edges = []
    for e in graph.edges:
        entry = {"src": e.src, "dst": e.dst, "kind": e.kind.value}
        if e.label is not None:
            entry["label"] = _num_out(e.label)
        edges.append(entry)
    return {"tables": tables, "attributes": attrs, "edges": edges}


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def load_json(text: str | bytes) -> SchemaGraph:
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError("", f"invalid JSON: {exc}") from None
    return graph_from_obj(data)


def emit_json(graph: SchemaGraph) -> str:
    """Canonical compact JSON: fixed key order, nodes and edges sorted by id."""
    return _dump(graph_to_obj(graph))


# datasets: the graph document plus "task" and "samples"


def emit_dataset(ds: TaskDataset) -> str:
    obj = graph_to_obj(ds.graph)
    obj["task"] = {
        "name": ds.name,
        "kind": ds.kind.value,
        "nominal_radius": ds.nominal_radius,
        "message_kinds": sorted(k.value for k in ds.message_kinds),
    }
    samples = []
    for i, s in enumerate(ds.samples):
        entry = {"src": s.src, "dst": s.dst, "label": _num_out(s.label)}
        if ds.split is not None:
            entry["split"] = ds.split[i]
        samples.append(entry)
    obj["samples"] = samples
    return _dump(obj)


def load_dataset(text: str | bytes) -> TaskDataset:
    """Load a dataset document; a bare graph yields one sample per labeled candidate edge."""
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError("", f"invalid JSON: {exc}") from None
    graph = graph_from_obj(data)
    task = data.get("task", {})
    if not isinstance(task, dict):
        raise FormatError("/task", "expected an object")
    try:
        kind = TaskKind(task.get("kind", TaskKind.CLASSIFICATION.value))
    except ValueError:
        raise FormatError("/task/kind", "unknown task kind") from None
    kinds = task.get("message_kinds", sorted(k.value for k in ALL_KINDS))
    try:
        kinds = frozenset(EdgeKind(k) for k in kinds)
    except (ValueError, TypeError):
        raise FormatError("/task/message_kinds", "unknown edge kind") from None
    if "samples" in data:
        samples, split = [], []
        for i, s in enumerate(_list(data, "samples")):
            ptr = f"/samples/{i}"
            if not isinstance(s, dict):
                raise FormatError(ptr, "expected an object")
            samples.append(Sample(_string(s, "src", ptr), _string(s, "dst", ptr), _number(s.get("label"), f"{ptr}/label")))
            if "split" in s:
                split.append(_string(s, "split", ptr))
        split = tuple(split) if split and len(split) == len(samples) else None
    else:
        samples = [Sample(e.src, e.dst, float(e.label)) for e in graph.candidate_edges if e.label is not None]
        split = None
    return TaskDataset(
        graph=graph,
        samples=tuple(samples),
        kind=kind,
        nominal_radius=int(task.get("nominal_radius", 0)),
        split=split,
        message_kinds=kinds,
        name=str(task.get("name", "")),
    )
