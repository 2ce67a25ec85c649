"""Relational statement tables for one VHDL module.

Nine tables describe a parsed module: entity ports, component
declarations, signal types, instance port maps, signal assignments, case
arms, if branches, conditions and the operations attached to both
conditions and assignments. The parser fills them, everything downstream
only reads them.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

from .value_domain import StrideInterval

DIRECTIONS = ("In", "Out")

OPERATOR_SYMBOLS = {"eq": "=", "neq": "/=", "lt": "<", "le": "<=", "gt": ">", "ge": "≥"}

_VECTOR_RE = re.compile(r"std_logic_vector\s*\(\s*(\d+)\s+downto\s+(\d+)\s*\)", re.I)


@dataclass(frozen=True)
class EntityRow:
    entity_name: str
    id_port: int
    port_name: str
    direction: str
    signal: Optional[str] = None


@dataclass(frozen=True)
class ComponentRow:
    component_name: str
    id_port: int
    direction: str
    port_name: str = ""


@dataclass(frozen=True)
class SignalRow:
    signal: str
    signal_type: str

    @property
    def width(self) -> int:
        if self.signal_type.lower() == "std_logic":
            return 1
        m = _VECTOR_RE.fullmatch(self.signal_type.strip())
        if not m:
            raise ValueError(f"unsupported type {self.signal_type!r}")
        hi, lo = int(m.group(1)), int(m.group(2))
        return hi - lo + 1


@dataclass(frozen=True)
class InstanceRow:
    id_instance: int
    component_name: str
    id_port: int
    connected_to: str


@dataclass(frozen=True)
class AssignRow:
    id_sa: int
    signal: str
    id_cond: tuple[int, ...]
    id_op: int
    expression: str


@dataclass(frozen=True)
class CaseRow:
    id_case: int
    id_cond: int
    condition: str


@dataclass(frozen=True)
class IfRow:
    id_if: int
    id_cond: int
    condition: str


@dataclass(frozen=True)
class ConditionRow:
    """One branch condition.

    ``parent`` is the enclosing condition (``None`` at the process root);
    ``sync`` marks the clock-edge test. ``others`` arms and synthesized
    ``else`` branches without a single-comparison complement carry no
    operation, signal or operator.
    """

    id_cond: int
    id_op: Optional[int]
    signal: Optional[str]
    operator: Optional[str]
    parent: Optional[int] = None
    sync: bool = False


@dataclass(frozen=True)
class OperationRow:
    id_op: int
    cond_sa: str
    operation: str
    operand: str
    id_hlstate: frozenset[int] = frozenset()


@dataclass(frozen=True)
class HlsRecord:
    id_hlstate: int
    constraints: frozenset[int]


_TABLES = {
    "entity": EntityRow,
    "component": ComponentRow,
    "signal": SignalRow,
    "instance": InstanceRow,
    "signal_assignment": AssignRow,
    "case": CaseRow,
    "if": IfRow,
    "condition": ConditionRow,
    "operation": OperationRow,
}

# attribute name -> JSON column where they differ
_RENAMES = {"entity_name": "entity", "signal_type": "type"}


@dataclass(frozen=True)
class StatementTables:
    module: str
    entity: tuple[EntityRow, ...] = ()
    component: tuple[ComponentRow, ...] = ()
    signal: tuple[SignalRow, ...] = ()
    instance: tuple[InstanceRow, ...] = ()
    signal_assignment: tuple[AssignRow, ...] = ()
    case: tuple[CaseRow, ...] = ()
    if_: tuple[IfRow, ...] = field(default=())
    condition: tuple[ConditionRow, ...] = ()
    operation: tuple[OperationRow, ...] = ()
    clock: Optional[str] = None

    def table(self, name: str) -> tuple:
        return getattr(self, "if_" if name == "if" else name)

    def ports(self, direction: Optional[str] = None) -> list[EntityRow]:
        return [r for r in self.entity if direction is None or r.direction == direction]

    def op(self, id_op: int) -> OperationRow:
        for row in self.operation:
            if row.id_op == id_op:
                return row
        raise KeyError(id_op)

    def cond(self, id_cond: int) -> ConditionRow:
        for row in self.condition:
            if row.id_cond == id_cond:
                return row
        raise KeyError(id_cond)

    def cond_path(self, id_cond: int) -> tuple[int, ...]:
        """Condition ids from the process root down to ``id_cond``."""
        by_id = {c.id_cond: c for c in self.condition}
        path = []
        cur: Optional[int] = id_cond
        while cur is not None:
            path.append(cur)
            cur = by_id[cur].parent
        return tuple(reversed(path))

    @property
    def sync_cond(self) -> Optional[int]:
        for c in self.condition:
            if c.sync:
                return c.id_cond
        return None

    def with_hlstates(self, mapping: dict[int, frozenset[int]]) -> StatementTables:
        ops = tuple(replace(o, id_hlstate=frozenset(mapping.get(o.id_op, ()))) for o in self.operation)
        return replace(self, operation=ops)

    def to_json(self) -> dict:
        doc: dict = {"module": self.module, "clock": self.clock}
        for name in _TABLES:
            doc[name] = [_row_to_json(r) for r in self.table(name)]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> StatementTables:
        kwargs = {}
        for name, row_cls in _TABLES.items():
            rows = tuple(_row_from_json(row_cls, r) for r in doc.get(name, ()))
            kwargs["if_" if name == "if" else name] = rows
        return cls(module=doc["module"], clock=doc.get("clock"), **kwargs)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)

    @classmethod
    def loads(cls, text: str) -> StatementTables:
        return cls.from_json(json.loads(text))


def _row_to_json(row) -> dict:
    out = {}
    for f in fields(row):
        v = getattr(row, f.name)
        if isinstance(v, frozenset):
            v = sorted(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[_RENAMES.get(f.name, f.name)] = v
    return out


def _row_from_json(row_cls, d: dict):
    kwargs = {}
    for f in fields(row_cls):
        key = _RENAMES.get(f.name, f.name)
        if key not in d:
            continue
        v = d[key]
        if f.name == "id_hlstate":
            v = frozenset(v)
        elif f.name == "id_cond" and isinstance(v, list):
            v = tuple(v)
        kwargs[f.name] = v
    return row_cls(**kwargs)


def _dupes(keys):
    """Yield (key, [row indexes]) for every repeated key."""
    seen: dict = {}
    for i, k in enumerate(keys, 1):
        seen.setdefault(k, []).append(i)
    for k, idx in seen.items():
        if len(idx) > 1:
            yield k, idx


def validate(tables: StatementTables, annotated: bool = False) -> list[str]:
    """Check referential integrity; returns one message per violation.

    With ``annotated`` the operation table must also carry HLS ids.
    """
    diags: list[str] = []

    for (ent, pid), idx in _dupes((r.entity_name, r.id_port) for r in tables.entity):
        diags.append(f"entity {ent}: duplicate id_port {pid} (rows {', '.join(map(str, idx))})")
    for i, r in enumerate(tables.entity, 1):
        if r.direction not in DIRECTIONS:
            diags.append(f"entity row {i}: bad direction {r.direction!r}")

    for (comp, pid), idx in _dupes((r.component_name, r.id_port) for r in tables.component):
        diags.append(f"component {comp}: duplicate id_port {pid} (rows {', '.join(map(str, idx))})")

    for name, idx in _dupes(r.signal.lower() for r in tables.signal):
        diags.append(f"signal {name}: declared more than once (rows {', '.join(map(str, idx))})")
    for r in tables.signal:
        try:
            if r.width < 1:
                diags.append(f"signal {r.signal}: width < 1")
        except ValueError as exc:
            diags.append(f"signal {r.signal}: {exc}")

    comp_ports = {(r.component_name.lower(), r.id_port) for r in tables.component}
    comp_names = {c for c, _ in comp_ports}
    for (inst, pid), idx in _dupes((r.id_instance, r.id_port) for r in tables.instance):
        diags.append(f"instance {inst}: duplicate id_port {pid} (rows {', '.join(map(str, idx))})")
    for r in tables.instance:
        if r.component_name.lower() not in comp_names:
            diags.append(f"instance {r.id_instance}: unknown component {r.component_name}")
        elif (r.component_name.lower(), r.id_port) not in comp_ports:
            diags.append(f"instance {r.id_instance}: component {r.component_name} has no port {r.id_port}")

    ops = {}
    for o in tables.operation:
        if o.id_op in ops:
            diags.append(f"operation {o.id_op}: duplicate id_op")
        ops[o.id_op] = o
        if o.cond_sa not in ("Cond", "Sa"):
            diags.append(f"operation {o.id_op}: bad cond_sa {o.cond_sa!r}")
        if annotated and not o.id_hlstate:
            diags.append(f"operation {o.id_op}: no id_hlstate")

    conds = {}
    for c in tables.condition:
        if c.id_cond in conds:
            diags.append(f"condition {c.id_cond}: duplicate id_cond")
        conds[c.id_cond] = c
    for c in tables.condition:
        if c.id_op is not None:
            o = ops.get(c.id_op)
            if o is None:
                diags.append(f"condition {c.id_cond}: unknown operation {c.id_op}")
            elif o.cond_sa != "Cond":
                diags.append(f"condition {c.id_cond}: operation {c.id_op} is not a condition")
            if c.signal is None or c.operator is None:
                diags.append(f"condition {c.id_cond}: operation without signal/operator")
        elif c.signal is not None or c.operator is not None:
            diags.append(f"condition {c.id_cond}: null operation with signal/operator")
        if c.operator is not None and c.operator not in OPERATOR_SYMBOLS:
            diags.append(f"condition {c.id_cond}: unknown operator {c.operator!r}")
        if c.parent is not None and c.parent not in conds:
            diags.append(f"condition {c.id_cond}: unknown parent {c.parent}")

    for r in tables.signal_assignment:
        o = ops.get(r.id_op)
        if o is None:
            diags.append(f"assign {r.id_sa}: unknown operation {r.id_op}")
        elif o.cond_sa != "Sa":
            diags.append(f"assign {r.id_sa}: operation {r.id_op} is not an assignment")
        for cid in r.id_cond:
            if cid not in conds:
                diags.append(f"assign {r.id_sa}: unknown condition {cid}")

    for table, key in (("case", "id_case"), ("if", "id_if")):
        for r in tables.table(table):
            if r.id_cond not in conds:
                diags.append(f"{table} {getattr(r, key)}: unknown condition {r.id_cond}")
    others = Counter(r.id_case for r in tables.case if r.condition.strip().lower() == "others")
    for cid, n in others.items():
        if n > 1:
            diags.append(f"case {cid}: {n} others arms")

    return diags


@dataclass(frozen=True)
class LegalRow:
    """One legal high-level state: an interval per state signal.

    ``source`` names where the row came from: the HLS id it was built
    from inside a module, or one HLS id per instance after composition.
    """

    id_hlstate: int
    intervals: tuple[StrideInterval, ...]
    source: tuple[int, ...] = ()


@dataclass(frozen=True)
class LegalHlsTable:
    module: str
    signals: tuple[str, ...]
    classes: tuple[str, ...]
    rows: tuple[LegalRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def index(self, signal: str) -> int:
        low = signal.lower()
        for i, s in enumerate(self.signals):
            if s.lower() == low:
                return i
        raise KeyError(signal)

    def column(self, signal: str) -> list[StrideInterval]:
        i = self.index(signal)
        return [r.intervals[i] for r in self.rows]

    def row_dict(self, row: LegalRow) -> dict[str, StrideInterval]:
        return dict(zip(self.signals, row.intervals))

    def covers(self, state: Sequence[int]) -> bool:
        return any(all(v in iv for v, iv in zip(state, r.intervals)) for r in self.rows)

    def to_json(self) -> dict:
        return {
            "module": self.module,
            "signals": [{"signal": s, "class": c} for s, c in zip(self.signals, self.classes)],
            "rows": [
                {
                    "id_hlstate": r.id_hlstate,
                    "source": list(r.source),
                    "values": {s: iv.to_json() for s, iv in zip(self.signals, r.intervals)},
                }
                for r in self.rows
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> LegalHlsTable:
        signals = tuple(s["signal"] for s in doc["signals"])
        rows = tuple(
            LegalRow(
                r["id_hlstate"],
                tuple(StrideInterval.from_json(r["values"][s]) for s in signals),
                tuple(r.get("source", ())),
            )
            for r in doc["rows"]
        )
        return cls(doc["module"], signals, tuple(s["class"] for s in doc["signals"]), rows)
