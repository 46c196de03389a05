"""Join trees: the discrete object being optimized.

A plan is an ordered binary tree whose leaves are the query's aliases and
whose internal nodes carry a physical join operator. Left/right order is
semantic (build/probe, outer/inner), so (A join B) and (B join A) are
distinct plans.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass
from typing import Iterator, Union

from .schema import Alias, Query

ENUMERATION_CAP = 6


class JoinOp(enum.Enum):
    HASH = "hash"
    MERGE = "merge"
    NESTLOOP = "nestloop"

    @property
    def letter(self) -> str:
        return {"hash": "H", "merge": "M", "nestloop": "N"}[self.value]


JOIN_OPS = (JoinOp.HASH, JoinOp.MERGE, JoinOp.NESTLOOP)


@dataclass(frozen=True)
class Leaf:
    alias: Alias


@dataclass(frozen=True)
class Join:
    left: "JoinTree"
    right: "JoinTree"
    op: JoinOp


JoinTree = Union[Leaf, Join]


def leaves(plan: JoinTree) -> tuple[Alias, ...]:
    """Aliases in left-to-right leaf order."""
    if isinstance(plan, Leaf):
        return (plan.alias,)
    return leaves(plan.left) + leaves(plan.right)


def alias_set(plan: JoinTree) -> frozenset[Alias]:
    return frozenset(leaves(plan))


def n_joins(plan: JoinTree) -> int:
    if isinstance(plan, Leaf):
        return 0
    return 1 + n_joins(plan.left) + n_joins(plan.right)


def validate_plan(query: Query, plan: JoinTree) -> None:
    """Each query alias must appear exactly once as a leaf."""
    got = leaves(plan)
    if len(got) != len(set(got)):
        raise ValueError("plan repeats an alias")
    if set(got) != set(query.aliases):
        raise ValueError("plan alias set does not match the query")


def plan_text(plan: JoinTree) -> str:
    """Parenthesized text form, e.g. ``(A1 hash (B1 merge C1))``."""
    if isinstance(plan, Leaf):
        return plan.alias.name
    return f"({plan_text(plan.left)} {plan.op.value} {plan_text(plan.right)})"


def parse_plan_text(text: str) -> JoinTree:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> JoinTree:
        nonlocal pos
        if tokens[pos] == "(":
            pos += 1
            left = parse()
            op = JoinOp(tokens[pos])
            pos += 1
            right = parse()
            if tokens[pos] != ")":
                raise ValueError(f"expected ')' in plan text: {text!r}")
            pos += 1
            return Join(left, right, op)
        tok = tokens[pos]
        pos += 1
        return Leaf(Alias.parse(tok))

    plan = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in plan text: {text!r}")
    return plan


def enumerate_all_plans(query: Query, cap: int = ENUMERATION_CAP) -> Iterator[JoinTree]:
    """Yield every ordered binary join tree with every operator assignment.

    The count for n aliases is C_{n-1} * n! * 3^(n-1). Queries above the cap
    are refused: the space grows super-factorially.
    """
    n = len(query.aliases)
    if n > cap:
        raise ValueError(f"enumeration refused: {n} aliases exceeds cap {cap}")
    aliases = list(query.aliases)

    def gen(mask: int) -> Iterator[JoinTree]:
        bits = [i for i in range(n) if mask >> i & 1]
        if len(bits) == 1:
            yield Leaf(aliases[bits[0]])
            return
        # Proper nonempty submasks of mask, in increasing order; (sub, rest)
        # pairs cover both operand orders.
        sub = (mask - 1) & mask
        while sub:
            rest = mask ^ sub
            for left in gen(sub):
                for right in gen(rest):
                    for op in JOIN_OPS:
                        yield Join(left, right, op)
            sub = (sub - 1) & mask
        return

    yield from gen((1 << n) - 1)


def count_all_plans(n_aliases: int) -> int:
    """Closed form C_{n-1} * n! * 3^(n-1) for cross-checking enumeration."""
    n = n_aliases
    if n == 0:
        return 0
    catalan = math.comb(2 * (n - 1), n - 1) // n
    return catalan * math.factorial(n) * 3 ** (n - 1)


def contains_cross_join(query: Query, plan: JoinTree) -> bool:
    """True iff some node joins two alias sets with no join edge between them."""
    edges = {(fk, pk) for fk, pk, _ in query.join_edges}

    def connected(a: frozenset[Alias], b: frozenset[Alias]) -> bool:
        return any((x, y) in edges or (y, x) in edges for x in a for y in b)

    def walk(node: JoinTree) -> tuple[frozenset[Alias], bool]:
        if isinstance(node, Leaf):
            return frozenset((node.alias,)), False
        ls, lcross = walk(node.left)
        rs, rcross = walk(node.right)
        cross = lcross or rcross or not connected(ls, rs)
        return ls | rs, cross

    _, cross = walk(plan)
    return cross


def random_plan(query: Query, seed: int) -> JoinTree:
    """Random cross-join-free plan via spanning-tree construction.

    Join edges are visited in random order; each edge connecting two distinct
    components becomes a join of those components with a uniformly random
    operator and uniformly random operand order.
    """
    rng = random.Random(seed)
    units: dict[Alias, JoinTree] = {a: Leaf(a) for a in query.aliases}
    root: dict[Alias, Alias] = {a: a for a in query.aliases}

    def find(a: Alias) -> Alias:
        while root[a] != a:
            root[a] = root[root[a]]
            a = root[a]
        return a

    edges = list(query.join_edges)
    rng.shuffle(edges)
    for fk, pk, _ in edges:
        ra, rb = find(fk), find(pk)
        if ra == rb:
            continue
        left, right = (ra, rb) if rng.random() < 0.5 else (rb, ra)
        op = rng.choice(JOIN_OPS)
        joined = Join(units[left], units[right], op)
        root[rb] = ra
        units[ra] = joined
    return units[find(query.aliases[0])]
