"""Combination of per-instance legal HLS tables over a flat model.

Signal columns are qualified ``inst<k>.<signal>``.  Two HLS combine when
every wire joining them admits a common value; the wire's columns are
then narrowed to the exact intersection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .hierarchy import FlatModel, OutRef
from .rtl_ir import LegalHlsTable, LegalRow
from .value_domain import StrideInterval, hull, intersect


class CompositionError(Exception):
    pass


def qualified(inst: int, signal: str) -> str:
    return f"inst{inst}.{signal}"


@dataclass(frozen=True)
class PortBinding:
    """Output ``producer`` of one instance feeding input ``consumer`` of another."""

    producer: tuple[int, str]
    consumer: tuple[int, str]

    @property
    def columns(self) -> tuple[str, str]:
        return qualified(*self.producer), qualified(*self.consumer)


@dataclass(frozen=True)
class CombinedHls:
    id: int
    provenance: tuple[int, ...]
    signals: tuple[str, ...]
    intervals: tuple[StrideInterval, ...]

    def interval(self, signal: str) -> StrideInterval:
        return self.intervals[self.signals.index(signal)]

    def as_dict(self) -> dict[str, StrideInterval]:
        return dict(zip(self.signals, self.intervals))


def qualify(table: LegalHlsTable, inst: int) -> LegalHlsTable:
    """Prefix every column with ``inst<k>.``; row provenance becomes the row id."""
    rows = tuple(LegalRow(r.id_hlstate, r.intervals, (r.id_hlstate,)) for r in table.rows)
    return LegalHlsTable(table.module, tuple(qualified(inst, s) for s in table.signals), table.classes, rows)


def _column(signals: Sequence[str], name: str) -> Optional[int]:
    if name in signals:
        return signals.index(name)
    bare = name.split(".", 1)[1] if "." in name else name
    return signals.index(bare) if bare in signals else None


class _Wires:
    """Union-find over column positions of a combined row."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        self.parent[self.find(i)] = self.find(j)

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return [g for g in out.values() if len(g) > 1]


def combine_pair(qa: LegalHlsTable, qb: LegalHlsTable, bindings: Sequence[PortBinding]) -> list[CombinedHls]:
    """Every compatible (A, B) row pair, bound columns narrowed to their intersection.

    Bindings may point either way, so feedback loops narrow both sides.
    Bindings whose columns are not both present are ignored.
    """
    signals = list(qa.signals)
    src_b = []
    for s in qb.signals:
        if s in signals:
            src_b.append(signals.index(s))
        else:
            src_b.append(len(signals))
            signals.append(s)
    wires = _Wires(len(signals))
    linked = False
    for b in bindings:
        cols = [_column(signals, c) for c in b.columns]
        if None in cols or cols[0] == cols[1]:
            continue
        in_a = [c < len(qa.signals) for c in cols]
        in_b = [c in src_b for c in cols]
        if not ((in_a[0] and in_b[1]) or (in_b[0] and in_a[1])):
            continue
        wires.union(*cols)
        linked = True
    groups = wires.groups() if linked else []

    out: list[CombinedHls] = []
    for ra in qa.rows:
        for rb in qb.rows:
            vals: list[Optional[StrideInterval]] = list(ra.intervals) + [None] * (len(signals) - len(qa.signals))
            for pos, iv in zip(src_b, rb.intervals):
                vals[pos] = iv if vals[pos] is None else hull(vals[pos], iv)
            ok = True
            for g in groups:
                x: Optional[StrideInterval] = vals[g[0]]
                for i in g[1:]:
                    x = intersect(x, vals[i])
                    if x is None:
                        break
                if x is None:
                    ok = False
                    break
                for i in g:
                    vals[i] = x
            if ok:
                out.append(CombinedHls(len(out) + 1, tuple(ra.source) + tuple(rb.source), tuple(signals), tuple(vals)))
    return out


def bindings_from_flat(flat: FlatModel) -> list[PortBinding]:
    """Leaf-to-leaf wires of a flat model."""
    rows = {r.inst: r for r in flat.rows}
    out = []
    for r in flat.leaves:
        for p, ref in r.in_dependencies:
            if isinstance(ref, OutRef) and ref.inst in rows and rows[ref.inst].leaf:
                src = rows[ref.inst]
                out.append(PortBinding((src.inst, src.port_name(f"Out{ref.k}")), (r.inst, r.port_name(p))))
    return out


def _as_table(module: str, combined: list[CombinedHls], classes: tuple[str, ...]) -> LegalHlsTable:
    rows: list[LegalRow] = []
    seen = set()
    for c in combined:
        if c.intervals in seen:
            continue
        seen.add(c.intervals)
        rows.append(LegalRow(len(rows) + 1, c.intervals, c.provenance))
    signals = combined[0].signals if combined else ()
    return LegalHlsTable(module, signals, classes, tuple(rows))


def combine_design(
    flat: FlatModel,
    legal: Mapping[int, LegalHlsTable],
    module: str = "",
    order: Optional[Sequence[int]] = None,
) -> LegalHlsTable:
    """Left fold of :func:`combine_pair` over the leaf instances.

    ``order`` overrides the flat-model row order.  Row provenance lists the
    source HLS id of each instance in fold order.
    """
    insts = list(order) if order is not None else [r.inst for r in flat.leaves]
    missing = [i for i in insts if i not in legal]
    if missing:
        raise CompositionError(f"no legal table for instance {missing[0]}")
    bindings = bindings_from_flat(flat)
    tables = {i: qualify(legal[i], i) for i in insts}
    for b in bindings:
        for inst, sig in (b.producer, b.consumer):
            if inst in tables and qualified(inst, sig) not in tables[inst].signals and tables[inst].signals:
                raise CompositionError(f"binding references {sig}, absent from the legal table of instance {inst}")
    if not insts:
        return LegalHlsTable(module, (), (), ())
    acc = tables[insts[0]]
    classes = acc.classes
    for i in insts[1:]:
        nxt = tables[i]
        combined = combine_pair(acc, nxt, bindings)
        classes = classes + tuple(c for s, c in zip(nxt.signals, nxt.classes) if s not in acc.signals)
        signals = combined[0].signals if combined else acc.signals + tuple(s for s in nxt.signals if s not in acc.signals)
        acc = _as_table(module, combined, classes) if combined else LegalHlsTable(module, signals, classes, ())
    return LegalHlsTable(module, acc.signals, classes, tuple(LegalRow(k, r.intervals, r.source) for k, r in enumerate(acc.rows, 1)))
