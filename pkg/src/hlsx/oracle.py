"""Brute-force RTL simulation used as ground truth for extraction.

Modules are simulated two-valued, one clock edge at a time, from an
all-zero reset state with every input valuation applied at every edge.
A state tuple lists the inputs sampled at the edge followed by the
registers right after it, in the same signal order as the module's legal
HLS table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .frontend import Expr, Lit, Sig, literal_value, parse_expression
from .hls_extractor import compute_initial_values
from .rtl_ir import LegalHlsTable, StatementTables
from .value_domain import RefineOp

DEFAULT_MAX_BITS = 24
DEFAULT_MAX_CYCLES = 1 << 24


class StateSpaceTooLarge(Exception):
    pass


@dataclass(frozen=True)
class Reachable:
    """A set of concrete state tuples over named signals."""

    signals: tuple[str, ...]
    states: frozenset[tuple[int, ...]]

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(sorted(self.states))

    def __contains__(self, state) -> bool:
        return tuple(state) in self.states

    def as_dicts(self) -> list[dict[str, int]]:
        return [dict(zip(self.signals, s)) for s in self]


@dataclass
class ReachabilityReport:
    signals: tuple[str, ...]
    reachable: int
    covered: int
    uncovered: list[tuple[int, ...]] = field(default_factory=list)
    looseness: Optional[int] = None

    @property
    def sound(self) -> bool:
        return not self.uncovered

    def to_json(self) -> dict:
        return {
            "signals": list(self.signals),
            "reachable": self.reachable,
            "covered": self.covered,
            "uncovered": [dict(zip(self.signals, s)) for s in self.uncovered],
            "looseness": self.looseness,
        }


def eval_concrete(e: Expr, values: Mapping[str, int]) -> int:
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Sig):
        return values[e.name.lower()]
    left, right = eval_concrete(e.left, values), eval_concrete(e.right, values)
    if e.op == "+":
        return left + right
    if e.op == "*":
        return left * right
    return left % right


class _Machine:
    def __init__(self, tables: StatementTables):
        lv0 = compute_initial_values(tables.signal, tables.entity)
        self.signals = lv0.names
        self.inputs = [n for n, c in zip(lv0.names, lv0.classes) if c == "I"]
        self.regs = [n for n, c in zip(lv0.names, lv0.classes) if c != "I"]
        self.top = {n.lower(): iv.max for n, iv in zip(lv0.names, lv0.intervals)}
        self.bits = sum(iv.max.bit_length() for iv in lv0.intervals)

        conds = {c.id_cond: c for c in tables.condition}
        self.predicate = {}
        for c in tables.condition:
            if c.sync or c.id_op is None:
                self.predicate[c.id_cond] = None
            else:
                op = RefineOp(c.operator, literal_value(tables.op(c.id_op).operation))
                self.predicate[c.id_cond] = (c.signal.lower(), op)
        # earlier arms of the same if/case take priority
        self.earlier: dict[int, list[int]] = {c: [] for c in conds}
        for rows, key in ((tables.if_, "id_if"), (tables.case, "id_case")):
            groups: dict[int, list[int]] = {}
            for r in rows:
                groups.setdefault(getattr(r, key), []).append(r.id_cond)
            for members in groups.values():
                for i, cid in enumerate(members):
                    self.earlier[cid] = members[:i]
        self.assigns = [
            (a.signal.lower(), parse_expression(tables.op(a.id_op).operation), tables.cond_path(a.id_cond[-1]) if a.id_cond else ())
            for a in sorted(tables.signal_assignment, key=lambda r: r.id_op)
        ]

    def _test(self, cid: int, values) -> bool:
        p = self.predicate[cid]
        return p is None or p[1].holds(values[p[0]])

    def _holds(self, cid: int, values) -> bool:
        return self._test(cid, values) and not any(self._test(e, values) for e in self.earlier[cid])

    def step(self, regs: tuple[int, ...], inputs: tuple[int, ...]) -> tuple[int, ...]:
        values = {n.lower(): v for n, v in zip(self.inputs, inputs)}
        values.update((n.lower(), v) for n, v in zip(self.regs, regs))
        new = dict(zip((n.lower() for n in self.regs), regs))
        for target, expr, path in self.assigns:
            if all(self._holds(c, values) for c in path):
                if target in new:
                    new[target] = min(max(eval_concrete(expr, values), 0), self.top[target])
        return tuple(new[n.lower()] for n in self.regs)

    def tuple_of(self, inputs, regs) -> tuple[int, ...]:
        by_name = dict(zip(self.inputs, inputs))
        by_name.update(zip(self.regs, regs))
        return tuple(by_name[n] for n in self.signals)


def simulate_exhaustive(
    tables: StatementTables, max_cycles: int = DEFAULT_MAX_CYCLES, max_bits: int = DEFAULT_MAX_BITS
) -> Reachable:
    """Every post-edge state tuple reachable within ``max_cycles`` edges."""
    m = _Machine(tables)
    if m.bits > max_bits:
        raise StateSpaceTooLarge(f"{tables.module}: {m.bits} state and input bits exceed the {max_bits}-bit guard")
    ranges = [range(m.top[n.lower()] + 1) for n in m.inputs]
    valuations = list(itertools.product(*ranges))
    start = tuple(0 for _ in m.regs)
    if max_cycles <= 0:
        return Reachable(m.signals, frozenset([m.tuple_of(tuple(0 for _ in m.inputs), start)]))
    seen = {start}
    frontier = [start]
    out: set[tuple[int, ...]] = set()
    for _ in range(max_cycles):
        nxt = []
        for regs in frontier:
            for inp in valuations:
                new = m.step(regs, inp)
                out.add(m.tuple_of(inp, new))
                if new not in seen:
                    seen.add(new)
                    nxt.append(new)
        if not nxt:
            break
        frontier = nxt
    return Reachable(m.signals, frozenset(out))


def _row_states(intervals) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(iv.min, iv.max + 1, iv.stride) for iv in intervals))


def check_containment(
    reachable: Reachable, legal: LegalHlsTable, looseness_limit: int = 1 << 22
) -> ReachabilityReport:
    """Test every reachable tuple against the legal rows.

    ``looseness`` counts tuples some row admits but the simulation never
    reached; it is left ``None`` when the rows span more than
    ``looseness_limit`` tuples.
    """
    order = [reachable.signals.index(s) for s in legal.signals] if reachable.signals != legal.signals else None
    if order is not None and len(order) != len(reachable.signals):
        raise ValueError("signal sets differ")
    states = [tuple(s[i] for i in order) for s in reachable] if order else list(reachable)
    uncovered = [s for s in states if not legal.covers(s)]
    size = 0
    for r in legal.rows:
        n = 1
        for iv in r.intervals:
            n *= len(iv)
        size += n
    looseness = None
    if size <= looseness_limit:
        admitted = set()
        for r in legal.rows:
            admitted.update(_row_states(r.intervals))
        looseness = len(admitted - set(states))
    return ReachabilityReport(legal.signals, len(states), len(states) - len(uncovered), uncovered, looseness)


def join_reachable(parts: Sequence[Reachable], equal: Sequence[tuple[str, str]]) -> Reachable:
    """Product of per-instance tuple sets keeping tuples that agree on bound wires.

    ``parts`` carry already-qualified signal names; each ``equal`` pair
    names two signals (in any of the parts) that carry the same wire.
    """
    signals: tuple[str, ...] = ()
    acc: list[tuple[int, ...]] = [()]
    for part in parts:
        new_signals = signals + part.signals
        pos = {s: i for i, s in enumerate(new_signals)}
        checks = [
            (pos[a], pos[b])
            for a, b in equal
            if a in pos and b in pos and (a in part.signals or b in part.signals)
        ]
        acc = [t + u for t in acc for u in part.states if all((t + u)[i] == (t + u)[j] for i, j in checks)]
        signals = new_signals
    return Reachable(signals, frozenset(acc))


def simulate_design(
    design: Mapping[str, StatementTables], flat, max_cycles: int = DEFAULT_MAX_CYCLES, max_bits: int = DEFAULT_MAX_BITS
) -> Reachable:
    """Join of every leaf instance's reachable tuples over the flat model's wires.

    Each leaf is simulated on its own with free inputs; timing between
    instances is not modeled.
    """
    from .composer import bindings_from_flat, qualified

    design = {k.lower(): v for k, v in design.items()}
    cache: dict[str, Reachable] = {}
    parts = []
    for r in flat.leaves:
        key = r.module.lower()
        if key not in cache:
            cache[key] = simulate_exhaustive(design[key], max_cycles, max_bits)
        own = cache[key]
        parts.append(Reachable(tuple(qualified(r.inst, s) for s in own.signals), own.states))
    return join_reachable(parts, [b.columns for b in bindings_from_flat(flat)])
