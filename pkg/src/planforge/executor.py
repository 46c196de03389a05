"""Deterministic execution simulator: the black-box latency objective.

Cardinalities follow uniformity + referential integrity: the joint size of
an alias set is the product of filtered base sizes times one 1/|PK table|
factor per join edge internal to the set. Sets joined without an edge
multiply freely (cross-join semantics). Operator costs are simple
per-tuple formulas over these cardinalities; latency is cost scaled to
seconds, optionally with seeded lognormal noise. Executions are stateless
(read-snapshot semantics) and censoring charges exactly the timeout.
"""

from __future__ import annotations

import enum
import hashlib
import math
import random
from dataclasses import dataclass
from typing import Callable, Optional

from .plans import JoinOp, JoinTree, Leaf, plan_text, validate_plan
from .schema import Alias, Query, Schema


class AccessMode(enum.Enum):
    """How a nested-loop join reads its inner side, per outer tuple."""

    INDEX_LOOKUP = "index-lookup"
    FULL_INNER_SCAN = "full-inner-scan"
    MATERIALIZED_INNER = "materialized-inner"


ALL_ACCESS_MODES = frozenset(AccessMode)


@dataclass(frozen=True)
class CostModelConfig:
    hash_build: float = 3.0
    hash_probe: float = 1.0
    merge_sort: float = 0.35
    merge_scan: float = 1.0
    nestloop_inner: float = 0.4  # per outer tuple, per inner tuple
    nestloop_mat_setup: float = 2.0  # one-time materialization, per inner tuple
    nestloop_mat_inner: float = 0.04  # per outer tuple, per materialized inner tuple
    index_lookup: float = 6.0  # per outer tuple, per log2(inner base rows)
    output_row: float = 0.2
    time_scale: float = 1e-6  # seconds per cost unit
    noise_sigma: float = 0.0

    def __post_init__(self):
        for name in (
            "hash_build",
            "hash_probe",
            "merge_sort",
            "merge_scan",
            "nestloop_inner",
            "nestloop_mat_setup",
            "nestloop_mat_inner",
            "index_lookup",
            "output_row",
            "time_scale",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"cost constant {name} must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass(frozen=True)
class ExecutionResult:
    """One executed plan: completed latency or censored at the threshold."""

    latency_s: Optional[float]
    censored: bool
    threshold_s: float
    plan: JoinTree

    def __post_init__(self):
        if self.censored and self.latency_s is not None:
            raise ValueError("censored result must not carry a latency")
        if not self.censored and (
            self.latency_s is None or self.latency_s > self.threshold_s
        ):
            raise ValueError("completed result must have latency <= threshold")

    @property
    def charge_s(self) -> float:
        """Budget charge: the timeout if censored, else the latency."""
        return self.threshold_s if self.censored else self.latency_s  # type: ignore[return-value]

    @property
    def observed_s(self) -> float:
        """Recorded value: latency if completed, threshold if censored."""
        return self.threshold_s if self.censored else self.latency_s  # type: ignore[return-value]


SelectivityFn = Callable[[Alias], float]
EdgeSelectivityFn = Callable[[int], float]


def true_cardinality(
    schema: Schema, query: Query, aliases: frozenset[Alias] | set[Alias]
) -> float:
    """Joint output rows for an alias subset under true statistics."""
    return _cardinality(
        schema,
        query,
        frozenset(aliases),
        query.selectivity,
        lambda eid: 1.0 / schema.row_count(_pk_table(query, eid)),
    )


def _pk_table(query: Query, edge_id: int) -> str:
    for _, pk, eid in query.join_edges:
        if eid == edge_id:
            return pk.table
    raise KeyError(edge_id)


def _cardinality(
    schema: Schema,
    query: Query,
    aliases: frozenset[Alias],
    alias_sel: SelectivityFn,
    edge_sel: EdgeSelectivityFn,
) -> float:
    if not aliases <= set(query.aliases):
        raise ValueError("alias set is not a subset of the query")
    card = 1.0
    for a in aliases:
        card *= schema.row_count(a.table) * alias_sel(a)
    for fk, pk, eid in query.join_edges:
        if fk in aliases and pk in aliases:
            card *= edge_sel(eid)
    return card


def _log2p1(x: float) -> float:
    return math.log2(1.0 + x)


def _inner_access_cost(
    per_outer_index: float | None,
    inner_card: float,
    outer_card: float,
    config: CostModelConfig,
    allowed_modes: frozenset[AccessMode],
) -> float:
    """Cheapest allowed way to feed the nested-loop inner side.

    Returns the total nested-loop scan cost (excluding output rows), or +inf
    when no allowed mode is feasible. Index lookups are only feasible when
    the inner is a base table whose primary key is joined to the outer side.
    """
    best = math.inf
    if AccessMode.INDEX_LOOKUP in allowed_modes and per_outer_index is not None:
        best = min(best, outer_card * per_outer_index)
    if AccessMode.FULL_INNER_SCAN in allowed_modes:
        best = min(best, outer_card * config.nestloop_inner * inner_card)
    if AccessMode.MATERIALIZED_INNER in allowed_modes:
        best = min(
            best,
            config.nestloop_mat_setup * inner_card
            + outer_card * config.nestloop_mat_inner * inner_card,
        )
    return best


def join_node_cost(
    op: JoinOp,
    left_card: float,
    right_card: float,
    out_card: float,
    config: CostModelConfig,
    index_per_outer: float | None = None,
    allowed_modes: frozenset[AccessMode] = ALL_ACCESS_MODES,
) -> float:
    """Cost of a single join node given operand/output cardinalities.

    index_per_outer is the per-outer-tuple index probe cost when the right
    side is an indexable base table, else None. Shared by the simulator and
    the classical optimizer so both price plans identically.
    """
    out = config.output_row * out_card
    if op is JoinOp.HASH:
        return config.hash_build * left_card + config.hash_probe * right_card + out
    if op is JoinOp.MERGE:
        sort = config.merge_sort * (
            left_card * _log2p1(left_card) + right_card * _log2p1(right_card)
        )
        return sort + config.merge_scan * (left_card + right_card) + out
    scan = _inner_access_cost(index_per_outer, right_card, left_card, config, allowed_modes)
    return scan + out


def index_probe_cost(
    schema: Schema,
    query: Query,
    left_aliases: frozenset[Alias],
    right: JoinTree,
    config: CostModelConfig,
) -> float | None:
    """Per-outer-tuple index probe cost, or None when no index applies.

    Applies only when the inner is a single base table that is the PK side
    of some join edge to the outer alias set.
    """
    if not isinstance(right, Leaf):
        return None
    for fk, pk, _ in query.join_edges:
        if pk == right.alias and fk in left_aliases:
            return config.index_lookup * math.log2(1.0 + schema.row_count(pk.table))
    return None


def plan_cost(
    schema: Schema,
    query: Query,
    plan: JoinTree,
    config: CostModelConfig,
    allowed_modes: frozenset[AccessMode] = ALL_ACCESS_MODES,
    alias_sel: SelectivityFn | None = None,
    edge_sel: EdgeSelectivityFn | None = None,
) -> float:
    """Total cost of a plan: sum of join node costs over all internal nodes.

    With the default (true) statistics this is the simulator's ground-truth
    cost; the classical optimizer passes estimated statistics and
    hint-restricted access modes through the same formulas.
    """
    validate_plan(query, plan)
    alias_sel = alias_sel or query.selectivity
    edge_sel = edge_sel or (lambda eid: 1.0 / schema.row_count(_pk_table(query, eid)))
    card_cache: dict[frozenset[Alias], float] = {}

    def card(aliases: frozenset[Alias]) -> float:
        if aliases not in card_cache:
            card_cache[aliases] = _cardinality(schema, query, aliases, alias_sel, edge_sel)
        return card_cache[aliases]

    def walk(node: JoinTree) -> tuple[frozenset[Alias], float]:
        if isinstance(node, Leaf):
            return frozenset((node.alias,)), 0.0
        ls, lcost = walk(node.left)
        rs, rcost = walk(node.right)
        out = ls | rs
        probe = index_probe_cost(schema, query, ls, node.right, config)
        cost = join_node_cost(
            node.op, card(ls), card(rs), card(out), config, probe, allowed_modes
        )
        return out, lcost + rcost + cost

    _, total = walk(plan)
    return total


def true_latency_s(
    schema: Schema, query: Query, plan: JoinTree, config: CostModelConfig
) -> float:
    """Noise-free latency in seconds."""
    return plan_cost(schema, query, plan, config) * config.time_scale


def execute(
    schema: Schema,
    query: Query,
    plan: JoinTree,
    timeout_s: float,
    config: CostModelConfig,
    seed: int = 0,
) -> ExecutionResult:
    """Run a plan with a timeout; censored runs consume exactly timeout_s.

    With noise_sigma > 0 the latency gets a lognormal factor that is a
    deterministic function of (plan, seed), so repeated executions of the
    same plan under the same seed agree.
    """
    if timeout_s <= 0:
        raise ValueError("timeout_s must be > 0")
    latency = true_latency_s(schema, query, plan, config)
    if config.noise_sigma > 0:
        digest = hashlib.sha256(f"{seed}:{plan_text(plan)}".encode()).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        latency *= math.exp(rng.gauss(0.0, config.noise_sigma))
    if latency > timeout_s:
        return ExecutionResult(None, True, timeout_s, plan)
    return ExecutionResult(latency, False, timeout_s, plan)
