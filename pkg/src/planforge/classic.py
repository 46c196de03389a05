"""Classical cost-based optimizer over (possibly distorted) estimates.

Plays the role of the production DBMS optimizer: a dynamic program over
connected alias subsets that minimizes estimated cost under the same cost
formulas the simulator uses, but with multiplicatively distorted
selectivity estimates. Hint sets constrain the allowed join operators and
inner access modes, giving the 49 initialization plans. A brute-force
enumerator over true latency serves as the ground-truth oracle.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from itertools import combinations

from .executor import (
    ALL_ACCESS_MODES,
    AccessMode,
    CostModelConfig,
    join_node_cost,
    true_latency_s,
)
from .plans import (
    JOIN_OPS,
    Join,
    JoinOp,
    JoinTree,
    Leaf,
    enumerate_all_plans,
    plan_text,
)
from .schema import Alias, Query, Schema

DP_CAP = 10


@dataclass(frozen=True)
class EstimatedStats:
    """Selectivity estimates: truth times a seeded multiplicative error.

    error_spread s >= 1 controls the distortion: each estimate is the true
    value times e^u with u uniform in [-ln s, ln s], so s = 1 reproduces the
    truth exactly and larger s widens the misestimation range.
    """

    alias_sel: tuple[tuple[Alias, float], ...]
    edge_sel: tuple[tuple[int, float], ...]
    error_spread: float

    def alias_selectivity(self, alias: Alias) -> float:
        for a, v in self.alias_sel:
            if a == alias:
                return v
        raise KeyError(alias)

    def edge_selectivity(self, edge_id: int) -> float:
        for e, v in self.edge_sel:
            if e == edge_id:
                return v
        raise KeyError(edge_id)

    @staticmethod
    def truthful(schema: Schema, query: Query) -> "EstimatedStats":
        return EstimatedStats.distorted(schema, query, error_spread=1.0, seed=0)

    @staticmethod
    def distorted(
        schema: Schema, query: Query, error_spread: float, seed: int
    ) -> "EstimatedStats":
        if error_spread < 1.0:
            raise ValueError("error_spread must be >= 1")
        digest = hashlib.sha256(
            f"{seed}:{schema.content_hash()}:{query.query_id}".encode()
        ).digest()
        rng = random.Random(int.from_bytes(digest[:8], "big"))
        span = math.log(error_spread)

        def err() -> float:
            return math.exp(rng.uniform(-span, span)) if span > 0 else 1.0

        alias_sel = tuple(
            (a, min(1.0, query.selectivity(a) * err())) for a in query.aliases
        )
        edge_sel = tuple(
            (eid, min(1.0, err() / schema.row_count(pk.table)))
            for _, pk, eid in query.join_edges
        )
        return EstimatedStats(alias_sel, edge_sel, error_spread)


@dataclass(frozen=True)
class HintSet:
    """Constraint handed to the optimizer: allowed operators and access modes."""

    join_ops: frozenset[JoinOp]
    access_modes: frozenset[AccessMode]

    def __post_init__(self):
        if not self.join_ops or not self.access_modes:
            raise ValueError("hint set must allow at least one operator and one mode")

    @property
    def label(self) -> str:
        ops = "+".join(op.letter for op in JOIN_OPS if op in self.join_ops)
        modes = "+".join(
            m.value for m in AccessMode if m in self.access_modes
        )
        return f"ops={ops}|modes={modes}"


def all_hint_sets() -> list[HintSet]:
    """All 49 combinations: 7 operator subsets x 7 access-mode subsets.

    Ordered deterministically with the unconstrained set first.
    """
    op_subsets = []
    for r in range(3, 0, -1):
        for combo in combinations(JOIN_OPS, r):
            op_subsets.append(frozenset(combo))
    mode_subsets = []
    modes = tuple(AccessMode)
    for r in range(3, 0, -1):
        for combo in combinations(modes, r):
            mode_subsets.append(frozenset(combo))
    return [HintSet(ops, ms) for ops in op_subsets for ms in mode_subsets]


FULL_HINTS = HintSet(frozenset(JOIN_OPS), ALL_ACCESS_MODES)


def optimize_hinted(
    schema: Schema,
    query: Query,
    stats: EstimatedStats,
    hints: HintSet,
    config: CostModelConfig,
    cap: int = DP_CAP,
) -> JoinTree:
    """Dynamic program over connected subsets under hint constraints.

    Considers bushy shapes, excludes cross joins, and breaks cost ties by
    plan text. If the constraints admit no plan at all (index-only access
    with no indexable order), the access modes are relaxed by re-allowing
    full inner scans; the operator constraint is never relaxed.
    """
    n = len(query.aliases)
    if n > cap:
        raise ValueError(f"optimizer refused: {n} aliases exceeds cap {cap}")
    aliases = list(query.aliases)
    index = {a: i for i, a in enumerate(aliases)}

    adj = [0] * n
    pk_sources = [0] * n  # per alias as PK side: bitmask of FK-side aliases
    for fk, pk, _ in query.join_edges:
        fi, pi = index[fk], index[pk]
        adj[fi] |= 1 << pi
        adj[pi] |= 1 << fi
        pk_sources[pi] |= 1 << fi

    edge_by_id = {eid: (fk, pk) for fk, pk, eid in query.join_edges}

    card_cache: dict[int, float] = {}

    def card(mask: int) -> float:
        if mask not in card_cache:
            c = 1.0
            for i in range(n):
                if mask >> i & 1:
                    a = aliases[i]
                    c *= schema.row_count(a.table) * stats.alias_selectivity(a)
            for eid, (fk, pk) in edge_by_id.items():
                if mask >> index[fk] & 1 and mask >> index[pk] & 1:
                    c *= stats.edge_selectivity(eid)
            card_cache[mask] = c
        return card_cache[mask]

    def solve(modes: frozenset[AccessMode]) -> JoinTree | None:
        best: dict[int, tuple[float, str, JoinTree]] = {}
        for i in range(n):
            best[1 << i] = (0.0, aliases[i].name, Leaf(aliases[i]))
        for mask in sorted(range(1, 1 << n), key=lambda m: (m.bit_count(), m)):
            if mask.bit_count() < 2:
                continue
            entry = None
            sub = (mask - 1) & mask
            while sub:
                rest = mask ^ sub
                lhs = best.get(sub)
                rhs = best.get(rest)
                if lhs and rhs and any(
                    adj[i] & rest for i in range(n) if sub >> i & 1
                ):
                    probe = None
                    if rest.bit_count() == 1:
                        j = rest.bit_length() - 1
                        if pk_sources[j] & sub:
                            probe = config.index_lookup * math.log2(
                                1.0 + schema.row_count(aliases[j].table)
                            )
                    for op in JOIN_OPS:
                        if op not in hints.join_ops:
                            continue
                        cost = (
                            lhs[0]
                            + rhs[0]
                            + join_node_cost(
                                op, card(sub), card(rest), card(mask), config, probe, modes
                            )
                        )
                        if not math.isfinite(cost):
                            continue
                        text = f"({lhs[1]} {op.value} {rhs[1]})"
                        cand = (cost, text, Join(lhs[2], rhs[2], op))
                        if entry is None or cand[:2] < entry[:2]:
                            entry = cand
                sub = (sub - 1) & mask
            if entry is not None:
                best[mask] = entry
        full = best.get((1 << n) - 1)
        return full[2] if full else None

    plan = solve(hints.access_modes)
    if plan is None:
        plan = solve(hints.access_modes | {AccessMode.FULL_INNER_SCAN})
    if plan is None:
        raise RuntimeError("optimizer found no plan even after relaxing access modes")
    return plan


def optimize_default(
    schema: Schema,
    query: Query,
    stats: EstimatedStats,
    config: CostModelConfig,
    cap: int = DP_CAP,
) -> JoinTree:
    """The unconstrained optimizer: all operators and access modes allowed."""
    return optimize_hinted(schema, query, stats, FULL_HINTS, config, cap=cap)


def hinted_plans(
    schema: Schema,
    query: Query,
    stats: EstimatedStats,
    config: CostModelConfig,
    cap: int = DP_CAP,
) -> list[tuple[HintSet, JoinTree]]:
    """One optimized plan per hint set, in all_hint_sets() order."""
    return [
        (h, optimize_hinted(schema, query, stats, h, config, cap=cap))
        for h in all_hint_sets()
    ]


def brute_force_optimum(
    schema: Schema,
    query: Query,
    config: CostModelConfig,
    cap: int = 6,
    cross_joins: bool = True,
) -> tuple[JoinTree, float]:
    """Exhaustive ground truth: argmin of true latency over all plans.

    Ties break by plan text. Set cross_joins=False to restrict the search
    to cross-join-free plans (the space the DP explores).
    """
    from .plans import contains_cross_join

    best: tuple[float, str, JoinTree] | None = None
    for plan in enumerate_all_plans(query, cap=cap):
        if not cross_joins and contains_cross_join(query, plan):
            continue
        latency = true_latency_s(schema, query, plan, config)
        cand = (latency, plan_text(plan), plan)
        if best is None or cand[:2] < best[:2]:
            best = cand
    assert best is not None
    return best[2], best[0]
