"""Synthetic relational schema with PK-FK references and query sampling.

A generated schema plays the role of DBMS metadata: table row counts, one
primary key per table, and a connected graph of PK-FK references. Queries
are connected subgraphs of the alias-k reference graph (k alias nodes per
table), with a per-alias filter selectivity.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_ROW_RANGE = (100, 1_000_000)
DEFAULT_SELECTIVITY_RANGE = (0.05, 1.0)


def _table_names(n: int) -> list[str]:
    """Spreadsheet-style names: A..Z, AA, AB, ... (letters only)."""
    names = []
    for i in range(n):
        name = ""
        j = i
        while True:
            name = chr(ord("A") + j % 26) + name
            j = j // 26 - 1
            if j < 0:
                break
        names.append(name)
    return names


@dataclass(frozen=True)
class TableStat:
    name: str
    row_count: int
    pk_column: str


@dataclass(frozen=True)
class FkEdge:
    """from_table.fk_column references to_table's primary key."""

    from_table: str
    fk_column: str
    to_table: str


@dataclass(frozen=True, order=True)
class Alias:
    """One occurrence of a table in a query: table name + alias index in 1..k."""

    table: str
    index: int

    @property
    def name(self) -> str:
        return f"{self.table}{self.index}"

    @staticmethod
    def parse(name: str) -> "Alias":
        i = 0
        while i < len(name) and name[i].isalpha():
            i += 1
        if i == 0 or i == len(name):
            raise ValueError(f"malformed alias name: {name!r}")
        return Alias(name[:i], int(name[i:]))


@dataclass(frozen=True)
class Schema:
    tables: tuple[TableStat, ...]
    fk_edges: tuple[FkEdge, ...]
    alias_k: int
    seed: int

    def __post_init__(self):
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate table names")
        known = set(names)
        for t in self.tables:
            if t.row_count < 1:
                raise ValueError(f"table {t.name} has row_count < 1")
        for e in self.fk_edges:
            if e.from_table == e.to_table:
                raise ValueError(f"self-referencing fk edge on {e.from_table}")
            if e.from_table not in known or e.to_table not in known:
                raise ValueError(f"fk edge references unknown table: {e}")
        if self.alias_k < 1:
            raise ValueError("alias_k must be >= 1")
        if len(self.tables) > 1 and not self._is_connected():
            raise ValueError("reference graph is not connected")

    def _is_connected(self) -> bool:
        adj: dict[str, set[str]] = {t.name: set() for t in self.tables}
        for e in self.fk_edges:
            adj[e.from_table].add(e.to_table)
            adj[e.to_table].add(e.from_table)
        start = self.tables[0].name
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.tables)

    def table(self, name: str) -> TableStat:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def row_count(self, table: str) -> int:
        return self.table(table).row_count

    def content_hash(self) -> str:
        return hashlib.sha256(format_schema(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class AliasEdge:
    """Join edge between two alias nodes; fk_alias is the referencing side."""

    fk_alias: Alias
    pk_alias: Alias
    fk_edge_id: int


class AliasGraph:
    """The alias-k reference graph: k nodes per table, one edge per FK pair.

    Edge ids index into .edges and are stable for a given schema, which lets
    queries reference edges compactly.
    """

    def __init__(self, schema: Schema):
        self.schema = schema
        k = schema.alias_k
        self.nodes: tuple[Alias, ...] = tuple(
            Alias(t.name, i)
            for t in sorted(schema.tables, key=lambda t: t.name)
            for i in range(1, k + 1)
        )
        edges = []
        for eid, fk in enumerate(schema.fk_edges):
            for i in range(1, k + 1):
                for j in range(1, k + 1):
                    edges.append(AliasEdge(Alias(fk.from_table, i), Alias(fk.to_table, j), eid))
        self.edges: tuple[AliasEdge, ...] = tuple(edges)
        self._adj: dict[Alias, list[tuple[Alias, int]]] = {a: [] for a in self.nodes}
        for idx, e in enumerate(self.edges):
            self._adj[e.fk_alias].append((e.pk_alias, idx))
            self._adj[e.pk_alias].append((e.fk_alias, idx))

    def neighbors(self, alias: Alias) -> list[tuple[Alias, int]]:
        return self._adj[alias]

    def edges_within(self, aliases: Iterable[Alias]) -> list[int]:
        chosen = set(aliases)
        return [
            i
            for i, e in enumerate(self.edges)
            if e.fk_alias in chosen and e.pk_alias in chosen
        ]


@dataclass(frozen=True)
class Query:
    """A connected set of aliases with all induced join edges and filters.

    join_edges holds resolved copies of alias-graph edges (plus the edge id)
    so a query file round-trips without rebuilding the graph.
    """

    aliases: tuple[Alias, ...]
    join_edges: tuple[tuple[Alias, Alias, int], ...]  # (fk_alias, pk_alias, edge_id)
    selectivities: tuple[tuple[Alias, float], ...]

    def __post_init__(self):
        if not self.aliases:
            raise ValueError("query has no aliases")
        if tuple(sorted(self.aliases)) != self.aliases:
            raise ValueError("aliases must be sorted")
        alias_set = set(self.aliases)
        for fk, pk, _ in self.join_edges:
            if fk not in alias_set or pk not in alias_set:
                raise ValueError("join edge references alias outside the query")
        if set(a for a, _ in self.selectivities) != alias_set:
            raise ValueError("selectivity map must cover exactly the query aliases")
        for _, s in self.selectivities:
            if not (0.0 < s <= 1.0):
                raise ValueError(f"selectivity out of (0,1]: {s}")
        if len(self.aliases) > 1 and not self.is_connected():
            raise ValueError("query subgraph is not connected")

    def is_connected(self) -> bool:
        adj: dict[Alias, set[Alias]] = {a: set() for a in self.aliases}
        for fk, pk, _ in self.join_edges:
            adj[fk].add(pk)
            adj[pk].add(fk)
        seen = {self.aliases[0]}
        stack = [self.aliases[0]]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.aliases)

    def selectivity(self, alias: Alias) -> float:
        for a, s in self.selectivities:
            if a == alias:
                return s
        raise KeyError(alias)

    @property
    def query_id(self) -> str:
        return hashlib.sha256(format_query(self).encode()).hexdigest()[:12]


def generate_schema(
    n_tables: int,
    fk_density: float,
    alias_k: int,
    seed: int,
    row_range: tuple[int, int] = DEFAULT_ROW_RANGE,
) -> Schema:
    """Generate a connected schema, deterministic for a fixed seed.

    Connectivity is guaranteed with a random spanning tree; remaining table
    pairs get an FK edge with a probability tuned so the expected edge count
    is about fk_density * n*(n-1)/2. Row counts are log-uniform over
    row_range. FK direction points from the larger table to the smaller
    (fact -> dimension), breaking ties by name.
    """
    if n_tables < 2:
        raise ValueError("n_tables must be >= 2")
    if alias_k < 1:
        raise ValueError("alias_k must be >= 1")
    if not (0.0 < fk_density <= 1.0):
        raise ValueError("fk_density must be in (0, 1]")
    rng = random.Random(seed)
    names = _table_names(n_tables)
    lo, hi = math.log(row_range[0]), math.log(row_range[1])
    tables = tuple(
        TableStat(name, max(1, round(math.exp(rng.uniform(lo, hi)))), "id")
        for name in names
    )
    rows = {t.name: t.row_count for t in tables}

    # Random spanning tree: attach each table to a random earlier one.
    order = names[:]
    rng.shuffle(order)
    pairs = set()
    for i in range(1, n_tables):
        pairs.add(frozenset((order[i], order[rng.randrange(i)])))
    n_candidates = n_tables * (n_tables - 1) // 2
    want = fk_density * n_candidates
    extra = n_candidates - (n_tables - 1)
    p_extra = max(0.0, (want - (n_tables - 1)) / extra) if extra > 0 else 0.0
    for i in range(n_tables):
        for j in range(i + 1, n_tables):
            pair = frozenset((names[i], names[j]))
            if pair not in pairs and rng.random() < p_extra:
                pairs.add(pair)

    edges = []
    for pair in sorted(pairs, key=lambda p: tuple(sorted(p))):
        a, b = sorted(pair)
        if (rows[a], a) >= (rows[b], b):
            src, dst = a, b
        else:
            src, dst = b, a
        edges.append(FkEdge(src, f"{dst.lower()}_id", dst))
    return Schema(tables=tables, fk_edges=tuple(edges), alias_k=alias_k, seed=seed)


def sample_query(
    schema: Schema,
    n_aliases: int,
    seed: int,
    selectivity_range: tuple[float, float] = DEFAULT_SELECTIVITY_RANGE,
    graph: AliasGraph | None = None,
) -> Query:
    """Sample a connected query by random-walk growth from a uniform start node.

    All alias-graph edges between the chosen aliases are included as join
    edges. Raises ValueError when no connected subgraph of the requested
    size exists.
    """
    if n_aliases < 1:
        raise ValueError("n_aliases must be >= 1")
    graph = graph or AliasGraph(schema)
    if n_aliases > len(graph.nodes):
        raise ValueError(
            f"requested {n_aliases} aliases but the alias graph has {len(graph.nodes)} nodes"
        )
    rng = random.Random(seed)
    start = rng.choice(graph.nodes)
    chosen = {start}
    while len(chosen) < n_aliases:
        frontier = sorted(
            {nbr for a in chosen for nbr, _ in graph.neighbors(a)} - chosen
        )
        if not frontier:
            raise ValueError("no connected subgraph of the requested size exists")
        chosen.add(rng.choice(frontier))
    aliases = tuple(sorted(chosen))
    edge_ids = graph.edges_within(aliases)
    join_edges = tuple(
        (graph.edges[i].fk_alias, graph.edges[i].pk_alias, i) for i in edge_ids
    )
    sels = tuple((a, rng.uniform(*selectivity_range)) for a in aliases)
    return Query(aliases=aliases, join_edges=join_edges, selectivities=sels)


# ---------------------------------------------------------------------------
# Text persistence (human-readable, byte-stable for a fixed seed)
# ---------------------------------------------------------------------------


def format_schema(schema: Schema) -> str:
    lines = ["# planforge schema v1"]
    lines.append(f"seed {schema.seed}")
    lines.append(f"alias_k {schema.alias_k}")
    for t in schema.tables:
        lines.append(f"table {t.name} rows {t.row_count} pk {t.pk_column}")
    for e in schema.fk_edges:
        lines.append(f"fk {e.from_table} {e.fk_column} -> {e.to_table}")
    return "\n".join(lines) + "\n"


def parse_schema(text: str) -> Schema:
    seed = 0
    alias_k = 1
    tables: list[TableStat] = []
    edges: list[FkEdge] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "seed":
            seed = int(parts[1])
        elif parts[0] == "alias_k":
            alias_k = int(parts[1])
        elif parts[0] == "table":
            tables.append(TableStat(parts[1], int(parts[3]), parts[5]))
        elif parts[0] == "fk":
            edges.append(FkEdge(parts[1], parts[2], parts[4]))
        else:
            raise ValueError(f"unrecognized schema line: {line!r}")
    return Schema(tuple(tables), tuple(edges), alias_k, seed)


def save_schema(schema: Schema, path: str | Path) -> None:
    Path(path).write_text(format_schema(schema))


def load_schema(path: str | Path) -> Schema:
    return parse_schema(Path(path).read_text())


def format_query(query: Query) -> str:
    lines = ["# planforge query v1"]
    for a, s in query.selectivities:
        lines.append(f"alias {a.name} selectivity {s!r}")
    for fk, pk, eid in query.join_edges:
        lines.append(f"join {fk.name} -> {pk.name} edge {eid}")
    return "\n".join(lines) + "\n"


def parse_query(text: str) -> Query:
    sels: list[tuple[Alias, float]] = []
    joins: list[tuple[Alias, Alias, int]] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "alias":
            sels.append((Alias.parse(parts[1]), float(parts[3])))
        elif parts[0] == "join":
            joins.append((Alias.parse(parts[1]), Alias.parse(parts[3]), int(parts[5])))
        else:
            raise ValueError(f"unrecognized query line: {line!r}")
    aliases = tuple(sorted(a for a, _ in sels))
    return Query(aliases=aliases, join_edges=tuple(joins), selectivities=tuple(sels))


def save_query(query: Query, path: str | Path, schema_hash: str = "") -> None:
    text = format_query(query)
    if schema_hash:
        text = f"# schema_hash {schema_hash}\n" + text
    Path(path).write_text(text)


def load_query(path: str | Path) -> Query:
    return parse_query(Path(path).read_text())
