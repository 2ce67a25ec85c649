"""Legal high-level state extraction for a single module.

The pipeline is:

1. :func:`compute_initial_values` - the type-derived range of every state
   signal (LV0), tagged input / internal / output.
2. :func:`identify_hls` - one HLS per distinct set of active conditions
   met at a branch or an assignment, with the operation table back-filled.
3. :func:`evaluate_constraints` - each condition refines its signal,
   cascading through enclosing conditions on the same signal.
4. :func:`evaluate_assignments` - each right-hand side evaluated once over
   the refined domains of its HLS.
5. :func:`build_legal_hls` - one row per HLS that assigns something.

:func:`compute` runs all five.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .frontend import Expr, Lit, Sig, literal_value, parse_expression
from .rtl_ir import (
    ConditionRow,
    EntityRow,
    HlsRecord,
    LegalHlsTable,
    LegalRow,
    OPERATOR_SYMBOLS,
    SignalRow,
    StatementTables,
)
from .value_domain import (
    RefineOp,
    StrideInterval,
    add,
    add_const,
    clamp,
    mod_const,
    mul_const,
    refine,
)

CLASS_ORDER = ("I", "IS", "O")


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class InitialValues:
    """Declared range and I/IS/O class of every state signal, in table order."""

    names: tuple[str, ...]
    intervals: tuple[StrideInterval, ...]
    classes: tuple[str, ...]

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def canon(self, name: str) -> Optional[str]:
        low = name.lower()
        for n in self.names:
            if n.lower() == low:
                return n
        return None

    def interval(self, name: str) -> StrideInterval:
        return self.intervals[self.names.index(self.canon(name) or name)]

    def cls(self, name: str) -> str:
        return self.classes[self.names.index(self.canon(name) or name)]

    def as_dict(self) -> dict[str, StrideInterval]:
        return dict(zip(self.names, self.intervals))


@dataclass(frozen=True)
class ConstraintRow:
    id_op: int
    id_hlstate: frozenset[int]
    signal: str
    interval: StrideInterval
    cls: str
    kind: str = "Cond"


@dataclass(frozen=True)
class AssignmentRow:
    id_op: int
    id_hlstate: int
    signal: str
    interval: StrideInterval
    cls: str
    kind: str = "SA"


@dataclass
class ComputeResult:
    initial: InitialValues
    hls: list[HlsRecord]
    tables: StatementTables
    constraints: list[ConstraintRow]
    assignments: list[AssignmentRow]
    legal: LegalHlsTable
    diagnostics: list[str] = field(default_factory=list)


def compute_initial_values(signals: tuple[SignalRow, ...], entity: tuple[EntityRow, ...]) -> InitialValues:
    direction = {r.port_name.lower(): r.direction for r in entity}
    by_class: dict[str, list] = {c: [] for c in CLASS_ORDER}
    for s in signals:
        try:
            width = s.width
        except ValueError as exc:
            raise ExtractionError(f"signal {s.signal}: {exc}") from None
        d = direction.get(s.signal.lower())
        cls = "I" if d == "In" else "O" if d == "Out" else "IS"
        by_class[cls].append((s.signal, StrideInterval.of_width(width)))
    names, intervals, classes = [], [], []
    for cls in CLASS_ORDER:
        for name, iv in by_class[cls]:
            names.append(name)
            intervals.append(iv)
            classes.append(cls)
    return InitialValues(tuple(names), tuple(intervals), tuple(classes))


def _refine_op(tables: StatementTables, c: ConditionRow) -> Optional[RefineOp]:
    if c.sync or c.id_op is None:
        return None
    return RefineOp(c.operator, literal_value(tables.op(c.id_op).operation))


def identify_hls(tables: StatementTables) -> tuple[list[HlsRecord], StatementTables]:
    """HLS records in first-encounter order plus tables with ``id_hlstate`` filled."""
    sync = tables.sync_cond
    base = frozenset([sync]) if sync is not None else frozenset()
    cond_of_op = {c.id_op: c for c in tables.condition if c.id_op is not None}
    assign_of_op = {a.id_op: a for a in tables.signal_assignment}

    records: list[HlsRecord] = []
    index: dict[frozenset, int] = {}

    def record(active: frozenset) -> int:
        if active not in index:
            index[active] = len(records) + 1
            records.append(HlsRecord(index[active], active))
        return index[active]

    # every branch opens an HLS; the clock edge on its own does not
    assign_hls: dict[int, int] = {}
    for op in sorted(tables.operation, key=lambda o: o.id_op):
        if op.cond_sa == "Cond":
            c = cond_of_op[op.id_op]
            if c.sync:
                continue
            record(frozenset(tables.cond_path(c.id_cond)))
        else:
            a = assign_of_op[op.id_op]
            assign_hls[op.id_op] = record(base | frozenset(a.id_cond))

    by_cond = {c.id_cond: c for c in tables.condition}
    paths = {c.id_cond: tables.cond_path(c.id_cond) for c in tables.condition}
    mapping: dict[int, frozenset[int]] = {}
    for op in tables.operation:
        if op.cond_sa == "Sa":
            mapping[op.id_op] = frozenset([assign_hls[op.id_op]])
            continue
        c = cond_of_op[op.id_op]
        ids = set()
        for h in records:
            if c.id_cond not in h.constraints:
                continue
            # a deeper test of the same signal takes over in that HLS
            shadowed = any(
                d != c.id_cond
                and c.id_cond in paths[d]
                and by_cond[d].signal is not None
                and by_cond[d].signal.lower() == (c.signal or "").lower()
                for d in h.constraints
            )
            if not shadowed:
                ids.add(h.id_hlstate)
        mapping[op.id_op] = frozenset(ids)
    return records, tables.with_hlstates(mapping)


def _cascade(tables: StatementTables, path, signal: str, start: StrideInterval) -> Optional[StrideInterval]:
    iv: Optional[StrideInterval] = start
    for cid in path:
        c = tables.cond(cid)
        op = _refine_op(tables, c)
        if op is None or c.signal.lower() != signal.lower():
            continue
        iv = refine(iv, op)
        if iv is None:
            return None
    return iv


def evaluate_constraints(
    hls: list[HlsRecord], tables: StatementTables, lv0: InitialValues
) -> tuple[list[ConstraintRow], list[str]]:
    """Constraint rows for every non-clock condition, and dead-branch diagnostics."""
    # HLS membership is read from the annotated operation table
    rows, diags = [], []
    for c in tables.condition:
        op = _refine_op(tables, c)
        if op is None:
            continue
        name = lv0.canon(c.signal)
        if name is None:
            raise ExtractionError(f"condition {c.id_cond} tests undeclared signal {c.signal}")
        iv = _cascade(tables, tables.cond_path(c.id_cond), name, lv0.interval(name))
        text = f"{c.signal} {OPERATOR_SYMBOLS[op.kind]} {op.bound}"
        if iv is None:
            diags.append(f"{tables.module}: dead branch: condition {c.id_cond} ({text}) is unsatisfiable")
            continue
        rows.append(ConstraintRow(c.id_op, tables.op(c.id_op).id_hlstate, name, iv, lv0.cls(name)))
    return rows, diags


def dead_hls(hls: list[HlsRecord], tables: StatementTables, lv0: InitialValues) -> set[int]:
    dead = set()
    for h in hls:
        path = sorted(h.constraints)
        for name in lv0:
            if _cascade(tables, path, name, lv0.interval(name)) is None:
                dead.add(h.id_hlstate)
                break
    return dead


def refined_domains(h: HlsRecord, constraints: list[ConstraintRow], lv0: InitialValues) -> dict[str, StrideInterval]:
    env = lv0.as_dict()
    for row in constraints:
        if h.id_hlstate in row.id_hlstate:
            env[row.signal] = row.interval
    return env


def eval_abstract(e: Expr, env: dict[str, StrideInterval], lv0: InitialValues) -> StrideInterval:
    if isinstance(e, Lit):
        return StrideInterval.point(e.value)
    if isinstance(e, Sig):
        name = lv0.canon(e.name)
        if name is None:
            raise ExtractionError(f"right-hand side references undeclared signal {e.name}")
        return env[name]
    left = eval_abstract(e.left, env, lv0)
    right = eval_abstract(e.right, env, lv0)
    if e.op == "+":
        if right.is_point:
            return add_const(left, right.min)
        if left.is_point:
            return add_const(right, left.min)
        return add(left, right)
    if e.op == "*":
        if right.is_point:
            return mul_const(left, right.min)
        if left.is_point:
            return mul_const(right, left.min)
        raise ExtractionError("product of two signals unsupported")
    if not right.is_point or right.min < 1:
        raise ExtractionError("mod needs a positive constant modulus")
    return mod_const(left, right.min)


def evaluate_assignments(
    hls: list[HlsRecord],
    tables: StatementTables,
    constraints: list[ConstraintRow],
    lv0: InitialValues,
    skip: frozenset[int] = frozenset(),
) -> list[AssignmentRow]:
    """One row per assignment, evaluated once over its HLS's refined domains.

    Within one HLS a signal read after an earlier assignment to it sees
    the assigned interval.
    """
    envs = {h.id_hlstate: refined_domains(h, constraints, lv0) for h in hls}
    rows = []
    for a in sorted(tables.signal_assignment, key=lambda r: r.id_op):
        op = tables.op(a.id_op)
        (h,) = op.id_hlstate
        if h in skip:
            continue
        target = lv0.canon(a.signal)
        if target is None:
            raise ExtractionError(f"assignment {a.id_sa} to undeclared signal {a.signal}")
        env = envs[h]
        iv = clamp(eval_abstract(parse_expression(op.operation), env, lv0), lv0.interval(target))
        env[target] = iv
        rows.append(AssignmentRow(a.id_op, h, target, iv, lv0.cls(target)))
    return rows


def build_legal_hls(
    hls: list[HlsRecord],
    constraints: list[ConstraintRow],
    assignments: list[AssignmentRow],
    lv0: InitialValues,
    module: str = "",
) -> LegalHlsTable:
    rows: list[LegalRow] = []
    seen: set[tuple] = set()
    for h in hls:
        mine = [a for a in assignments if a.id_hlstate == h.id_hlstate]
        if not mine:
            continue
        env = refined_domains(h, constraints, lv0)
        for a in mine:
            env[a.signal] = a.interval  # last assignment wins
        values = tuple(env[n] for n in lv0.names)
        if values in seen:
            continue
        seen.add(values)
        rows.append(LegalRow(len(rows) + 1, values, (h.id_hlstate,)))
    return LegalHlsTable(module, lv0.names, lv0.classes, tuple(rows))


def compute(tables: StatementTables) -> ComputeResult:
    """Run the whole extraction for one module."""
    lv0 = compute_initial_values(tables.signal, tables.entity)
    hls, annotated = identify_hls(tables)
    constraints, diags = evaluate_constraints(hls, annotated, lv0)
    dead = frozenset(dead_hls(hls, annotated, lv0))
    assignments = evaluate_assignments(hls, annotated, constraints, lv0, skip=dead)
    legal = build_legal_hls(hls, constraints, assignments, lv0, tables.module)
    if not legal.rows:
        diags.append(f"{tables.module}: no reachable signal assignments; legal HLS table is empty")
    return ComputeResult(lv0, hls, annotated, constraints, assignments, legal, diags)
