"""Plan string language: tokenize join trees and repair-decode any sequence.

Each join is a 3-symbol group (left, right, operator); a full plan is the
post-order concatenation of its joins, padded to a fixed length. A subtree
is referenced by an alias symbol of one of its leaves; the canonical
encoder always picks the smallest symbol id in the subtree, but the decoder
accepts any member symbol, so the language is complete and total without
being injective.

Decoding repairs invalid symbols deterministically: at every position the
decoder builds the sorted list of currently valid symbols and, when the
token is not in it, substitutes ``valid[token_id % len(valid)]``. A pad
symbol terminates the stream; any joins still missing are completed by
repeatedly hash-joining the two lowest-id units. Decoding is therefore a
total function from arbitrary token sequences to valid plans.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .plans import JOIN_OPS, Join, JoinOp, JoinTree, Leaf, alias_set, validate_plan
from .schema import Alias, Query, Schema

DEFAULT_MAX_QUERY_ALIASES = 6


@dataclass(frozen=True)
class SymbolVocab:
    """Dense symbol ids: alias symbols (by table, then alias index), H, M, N, pad."""

    alias_symbols: tuple[str, ...]

    @staticmethod
    def from_schema(schema: Schema) -> "SymbolVocab":
        names = tuple(
            Alias(t.name, i).name
            for t in sorted(schema.tables, key=lambda t: t.name)
            for i in range(1, schema.alias_k + 1)
        )
        return SymbolVocab(alias_symbols=names)

    @property
    def symbols(self) -> tuple[str, ...]:
        return self.alias_symbols + ("H", "M", "N", "<pad>")

    @property
    def size(self) -> int:
        return len(self.alias_symbols) + 4

    @property
    def op_base(self) -> int:
        return len(self.alias_symbols)

    @property
    def pad_id(self) -> int:
        return self.size - 1

    def alias_id(self, alias: Alias) -> int:
        try:
            return self.alias_symbols.index(alias.name)
        except ValueError:
            raise KeyError(f"alias {alias.name} not in vocabulary") from None

    def op_id(self, op: JoinOp) -> int:
        return self.op_base + JOIN_OPS.index(op)

    def op_from_id(self, token: int) -> JoinOp:
        return JOIN_OPS[token - self.op_base]

    def is_op(self, token: int) -> bool:
        return self.op_base <= token < self.op_base + 3

    def name_of(self, token: int) -> str:
        return self.symbols[token]


@dataclass
class _Unit:
    """An available operand during decoding: a leaf or an already-formed subtree."""

    rep: int  # smallest alias symbol id among the unit's leaves
    tree: JoinTree


class DecoderState:
    """Tracks available units and the in-progress 3-token group."""

    def __init__(self, codec: "Codec", query: Query):
        self.codec = codec
        self.units: list[_Unit] = sorted(
            (_Unit(codec.vocab.alias_id(a), Leaf(a)) for a in query.aliases),
            key=lambda u: u.rep,
        )
        self.pending_left: _Unit | None = None

    def valid_symbols(self, position_kind: str) -> list[int]:
        """Sorted symbol ids that are valid at the next position of the group."""
        if position_kind == "op":
            return [self.codec.vocab.op_base + i for i in range(3)]
        reps = [u.rep for u in self.units]
        if position_kind == "right":
            if self.pending_left is None:
                raise ValueError("right position before a left operand was chosen")
            reps = [r for r in reps if r != self.pending_left.rep]
        elif position_kind != "left":
            raise ValueError(f"unknown position kind: {position_kind!r}")
        return reps

    def _unit_by_rep(self, rep: int) -> _Unit:
        for u in self.units:
            if u.rep == rep:
                return u
        raise KeyError(rep)

    def resolve(self, token: int, position_kind: str) -> int:
        """Return the valid symbol for a token, repairing by index if needed."""
        valid = self.valid_symbols(position_kind)
        if token in valid:
            return token
        # Alias symbols name the unit that contains them; only the unit's
        # representative appears in the valid list.
        if position_kind in ("left", "right") and 0 <= token < self.codec.vocab.op_base:
            alias_name = self.codec.vocab.symbols[token]
            for u in self.units:
                if any(a.name == alias_name for a in alias_set(u.tree)):
                    if u.rep in valid:
                        return u.rep
                    break
        return valid[token % len(valid)]

    def choose_left(self, token: int) -> None:
        self.pending_left = self._unit_by_rep(self.resolve(token, "left"))

    def apply_join(self, right_token: int, op_token: int) -> None:
        assert self.pending_left is not None
        right = self._unit_by_rep(self.resolve(right_token, "right"))
        op = self.codec.vocab.op_from_id(self.resolve(op_token, "op"))
        self._join(self.pending_left, right, op)
        self.pending_left = None

    def complete(self) -> None:
        """Join the two lowest-id units with hash until one unit remains."""
        self.pending_left = None
        while len(self.units) > 1:
            self._join(self.units[0], self.units[1], JoinOp.HASH)

    def _join(self, left: _Unit, right: _Unit, op: JoinOp) -> None:
        self.units.remove(left)
        self.units.remove(right)
        merged = _Unit(min(left.rep, right.rep), Join(left.tree, right.tree, op))
        self.units.append(merged)
        self.units.sort(key=lambda u: u.rep)

    @property
    def done(self) -> bool:
        return len(self.units) == 1

    @property
    def tree(self) -> JoinTree:
        assert self.done
        return self.units[0].tree


class Codec:
    """Fixed-length token codec for one schema's vocabulary.

    Sequences are always 3*(max_query_aliases-1) tokens, pad-filled.
    """

    def __init__(self, schema: Schema, max_query_aliases: int = DEFAULT_MAX_QUERY_ALIASES):
        if max_query_aliases < 2:
            raise ValueError("max_query_aliases must be >= 2")
        self.schema = schema
        self.vocab = SymbolVocab.from_schema(schema)
        self.max_query_aliases = max_query_aliases
        self.seq_len = 3 * (max_query_aliases - 1)

    def encode(self, query: Query, plan: JoinTree) -> tuple[int, ...]:
        """Canonical token sequence: post-order joins, smallest-id references."""
        validate_plan(query, plan)
        if len(query.aliases) > self.max_query_aliases:
            raise ValueError(
                f"query has {len(query.aliases)} aliases; codec max is {self.max_query_aliases}"
            )
        out: list[int] = []

        def rep(node: JoinTree) -> int:
            return min(self.vocab.alias_id(a) for a in alias_set(node))

        def emit(node: JoinTree) -> None:
            if isinstance(node, Leaf):
                return
            emit(node.left)
            emit(node.right)
            out.extend((rep(node.left), rep(node.right), self.vocab.op_id(node.op)))

        emit(plan)
        out.extend([self.vocab.pad_id] * (self.seq_len - len(out)))
        return tuple(out)

    def decode(self, query: Query, tokens: Sequence[int]) -> JoinTree:
        """Total decode: any token sequence yields a valid plan for the query."""
        state = DecoderState(self, query)
        # A pad terminates the stream; later tokens are ignored. Other
        # tokens pass through unchanged so the index-mod repair sees the
        # raw integer value.
        stream: list[int] = []
        for t in tokens:
            if t == self.vocab.pad_id:
                break
            stream.append(int(t))
        pos = 0
        while not state.done and pos + 3 <= len(stream):
            state.choose_left(stream[pos])
            state.apply_join(stream[pos + 1], stream[pos + 2])
            pos += 3
        if not state.done:
            state.complete()
        return state.tree

    def tokens_to_text(self, tokens: Sequence[int]) -> str:
        return " ".join(self.vocab.name_of(t) for t in tokens)

    def text_to_tokens(self, text: str) -> tuple[int, ...]:
        index = {s: i for i, s in enumerate(self.vocab.symbols)}
        return tuple(index[w] for w in text.split())
