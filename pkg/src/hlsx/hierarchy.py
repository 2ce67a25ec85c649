"""Connectivity analysis and flattening of an instance hierarchy.

Ports are named positionally per direction: ``In2`` is the second input
port of an instance's module and ``Out1`` its first output, so ``Out1(4)``
reads "output 1 of instance 4".  Instances are numbered breadth first from
the top entity, which keeps the numbering of the source tables for
designs where each component is instantiated once.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence, Union

from .rtl_ir import StatementTables


class HierarchyError(Exception):
    pass


@dataclass(frozen=True)
class TopRef:
    """A port of the top entity."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class InRef:
    k: int
    inst: int

    def __str__(self) -> str:
        return f"In{self.k}({self.inst})"


@dataclass(frozen=True)
class OutRef:
    k: int
    inst: int

    def __str__(self) -> str:
        return f"Out{self.k}({self.inst})"


Ref = Union[TopRef, InRef, OutRef]


def ref_to_json(ref: Ref) -> dict:
    if isinstance(ref, TopRef):
        return {"top": ref.name}
    kind = "in" if isinstance(ref, InRef) else "out"
    return {kind: ref.k, "inst": ref.inst}


def ref_from_json(d: Mapping) -> Ref:
    if "top" in d:
        return TopRef(d["top"])
    if "in" in d:
        return InRef(d["in"], d["inst"])
    return OutRef(d["out"], d["inst"])


@dataclass(frozen=True)
class ConnectivityRow:
    inst: int
    module: str
    level: int
    parent: Optional[int] = None
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    in_dependencies: tuple[tuple[str, Ref], ...] = ()
    out_dependencies: tuple[tuple[str, Ref], ...] = ()
    leaf: bool = True

    @property
    def ins(self) -> dict[str, Ref]:
        return dict(self.in_dependencies)

    @property
    def outs(self) -> dict[str, Ref]:
        return dict(self.out_dependencies)

    def port_name(self, positional: str) -> str:
        """Declared port name behind ``In<k>`` / ``Out<k>``."""
        if positional.startswith("In"):
            return self.inputs[int(positional[2:]) - 1]
        return self.outputs[int(positional[3:]) - 1]

    def render(self) -> tuple[str, str]:
        ins = " ".join(f"{p}= {r}" for p, r in self.in_dependencies)
        outs = " ".join(f"{p}= {r}" for p, r in self.out_dependencies)
        return ins, outs

    def to_json(self) -> dict:
        return {
            "inst": self.inst,
            "module": self.module,
            "level": self.level,
            "parent": self.parent,
            "leaf": self.leaf,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "in_dependencies": {p: ref_to_json(r) for p, r in self.in_dependencies},
            "out_dependencies": {p: ref_to_json(r) for p, r in self.out_dependencies},
        }

    @classmethod
    def from_json(cls, d: Mapping) -> ConnectivityRow:
        return cls(
            d["inst"],
            d["module"],
            d["level"],
            d.get("parent"),
            tuple(d.get("inputs", ())),
            tuple(d.get("outputs", ())),
            tuple((p, ref_from_json(r)) for p, r in d.get("in_dependencies", {}).items()),
            tuple((p, ref_from_json(r)) for p, r in d.get("out_dependencies", {}).items()),
            d.get("leaf", True),
        )


@dataclass(frozen=True)
class FlatModel:
    rows: tuple[ConnectivityRow, ...]
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def row(self, inst: int) -> ConnectivityRow:
        for r in self.rows:
            if r.inst == inst:
                return r
        raise KeyError(inst)

    @property
    def leaves(self) -> list[ConnectivityRow]:
        return [r for r in self.rows if r.leaf]

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows]}


def _ports(tables: StatementTables, direction: str) -> tuple[str, ...]:
    return tuple(r.port_name for r in sorted(tables.entity, key=lambda r: r.id_port) if r.direction == direction)


def _positional(names: Sequence[str], name: str, prefix: str) -> Optional[str]:
    low = name.lower()
    for i, n in enumerate(names, 1):
        if n.lower() == low:
            return f"{prefix}{i}"
    return None


def build_connectivity(
    design: Mapping[str, StatementTables], top: str, diagnostics: Optional[list[str]] = None
) -> list[ConnectivityRow]:
    """One row per instance under ``top`` with parent-relative dependencies.

    Unresolvable inputs are left out of the row and reported through
    ``diagnostics`` when a list is supplied.
    """
    diags = diagnostics if diagnostics is not None else []
    design = {k.lower(): v for k, v in design.items()}
    if top.lower() not in design:
        raise HierarchyError(f"unknown top entity {top}")

    rows: list[ConnectivityRow] = []
    # (module, parent global id, level)
    queue = deque([(top.lower(), None, 0)])
    next_id = 1
    while queue:
        module, parent, level = queue.popleft()
        tables = design[module]
        p_inputs, p_outputs = _ports(tables, "In"), _ports(tables, "Out")
        local: dict[int, list] = {}
        for r in tables.instance:
            local.setdefault(r.id_instance, []).append(r)
        ids = {}
        for lid in local:
            ids[lid] = next_id
            next_id += 1

        drivers: dict[str, OutRef] = {}
        children = {}
        for lid, conns in local.items():
            comp = conns[0].component_name.lower()
            if comp not in design:
                raise HierarchyError(f"unresolved component {conns[0].component_name}")
            ct = design[comp]
            c_in, c_out = _ports(ct, "In"), _ports(ct, "Out")
            by_port = {r.id_port: r.port_name for r in ct.entity}
            children[lid] = (ct, c_in, c_out, by_port)
            for c in conns:
                k = _positional(c_out, by_port.get(c.id_port, ""), "")
                if k is not None:
                    drivers.setdefault(c.connected_to.lower(), OutRef(int(k), ids[lid]))

        def parent_port(sig: str, names, cls) -> Optional[Ref]:
            pos = _positional(names, sig, "")
            if pos is None:
                return None
            if parent is None:
                return TopRef(names[int(pos) - 1])
            return cls(int(pos), parent)

        for lid, conns in local.items():
            ct, c_in, c_out, by_port = children[lid]
            ins, outs = [], []
            for c in sorted(conns, key=lambda r: r.id_port):
                port = by_port.get(c.id_port, "")
                sig = c.connected_to
                k_in = _positional(c_in, port, "In")
                if k_in is not None:
                    ref = parent_port(sig, p_inputs, InRef) or drivers.get(sig.lower())
                    if ref is None:
                        diags.append(f"{tables.module}: instance {ids[lid]} ({ct.module}) port {port}: dangling signal {sig}")
                    else:
                        ins.append((k_in, ref))
                    continue
                k_out = _positional(c_out, port, "Out")
                if k_out is None:
                    continue
                ref = parent_port(sig, p_outputs, OutRef)
                if ref is None:
                    # a concurrent `port <= sig` in the parent
                    for e in sorted(tables.entity, key=lambda r: r.id_port):
                        if e.direction == "Out" and e.signal and e.signal.lower() == sig.lower():
                            ref = parent_port(e.port_name, p_outputs, OutRef)
                            break
                if ref is not None:
                    outs.append((k_out, ref))
            rows.append(
                ConnectivityRow(
                    ids[lid],
                    ct.module,
                    level + 1,
                    parent,
                    c_in,
                    c_out,
                    tuple(ins),
                    tuple(outs),
                    leaf=not ct.instance,
                )
            )
            queue.append((ct.module.lower(), ids[lid], level + 1))
    return rows


def _rewrite_once(rows: dict[int, ConnectivityRow], delegate, parent_out, order, rng) -> bool:
    changed = False
    rules = [_rule_in_in, _rule_out_delegate, _rule_promote]
    if rng is not None:
        rng.shuffle(rules)
    for inst in order:
        for rule in rules:
            new = rule(rows[inst], rows, delegate, parent_out)
            if new != rows[inst]:
                rows[inst] = new
                changed = True
    return changed


def _rule_in_in(row, rows, delegate, parent_out):
    # a child input tied to its parent's input takes the parent's source
    deps = []
    for p, ref in row.in_dependencies:
        if isinstance(ref, InRef) and ref.inst in rows:
            ref = rows[ref.inst].ins.get(f"In{ref.k}", ref)
        deps.append((p, ref))
    return replace(row, in_dependencies=tuple(deps))


def _rule_out_delegate(row, rows, delegate, parent_out):
    # an output of a structural instance is really the output of the child driving it
    deps = []
    for p, ref in row.in_dependencies:
        if isinstance(ref, OutRef) and (ref.k, ref.inst) in delegate:
            ref = delegate[(ref.k, ref.inst)]
        deps.append((p, ref))
    return replace(row, in_dependencies=tuple(deps))


def _rule_promote(row, rows, delegate, parent_out):
    # a child output tied to a parent output inherits the parent's destination
    deps = []
    for p, ref in row.out_dependencies:
        while isinstance(ref, OutRef):
            ref = parent_out.get((ref.k, ref.inst))
        if ref is not None:
            deps.append((p, ref))
    if not row.leaf:
        # delegated to the children
        deps = [(p, r) for p, r in deps if (int(p[3:]), row.inst) not in delegate]
    return replace(row, out_dependencies=tuple(deps))


def flatten(conn: Sequence[ConnectivityRow], seed: Optional[int] = None) -> FlatModel:
    """Rewrite dependencies until they reference only leaves and top ports.

    Rows are visited by increasing level; ``seed`` shuffles both row order
    and rule order, which must not change the result.
    """
    rows = {r.inst: r for r in conn}
    delegate: dict[tuple[int, int], OutRef] = {}
    parent_out: dict[tuple[int, int], Ref] = {}
    for r in conn:
        for p, ref in r.out_dependencies:
            if isinstance(ref, OutRef):
                delegate.setdefault((ref.k, ref.inst), OutRef(int(p[3:]), r.inst))
            parent_out[(int(p[3:]), r.inst)] = ref
    order = sorted(rows, key=lambda i: (rows[i].level, i))
    rng = random.Random(seed) if seed is not None else None
    if rng is not None:
        rng.shuffle(order)
    guard = max(1, len(rows) * max((len(r.inputs) + len(r.outputs) for r in conn), default=1)) + 1
    for _ in range(guard):
        if not _rewrite_once(rows, delegate, parent_out, order, rng):
            break
    else:
        raise HierarchyError("flatten did not reach a fixpoint")

    diags = []
    for r in rows.values():
        for p, ref in r.in_dependencies:
            if isinstance(ref, InRef) or (isinstance(ref, OutRef) and not rows.get(ref.inst, r).leaf):
                diags.append(f"instance {r.inst} {p}: {ref} has no leaf driver")
    return FlatModel(tuple(rows[i] for i in sorted(rows)), tuple(diags))
