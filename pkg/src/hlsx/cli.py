"""``hlsx`` command line: extract legal HLS tables and ATPG constraints.

Example::

    hlsx extract rtl/*.vhd --top m --emit-constraints --oracle-check

Artifacts go to ``--out DIR`` when given, otherwise to stdout.
Diagnostics go to stderr.  Exit status is 0 on success, 1 when only
diagnostics failed (validation, dangling signals, uncovered states) and 2
on parse errors or an unknown top entity.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Optional, Sequence

from . import __version__
from .composer import CompositionError, combine_design
from .frontend import FrontendError, SourceUnit, parse_design
from .hierarchy import FlatModel, HierarchyError, build_connectivity, flatten
from .hls_extractor import ComputeResult, ExtractionError, compute
from .oracle import (
    DEFAULT_MAX_BITS,
    ReachabilityReport,
    StateSpaceTooLarge,
    check_containment,
    simulate_design,
    simulate_exhaustive,
)
from .rtl_ir import OPERATOR_SYMBOLS, LegalHlsTable, StatementTables, validate

EXIT_OK, EXIT_DIAGNOSTICS, EXIT_PARSE = 0, 1, 2


@dataclass
class RunConfig:
    inputs: list[str]
    top: Optional[str] = None
    out: Optional[str] = None
    emit_tables: bool = False
    emit_hierarchy: bool = False
    emit_constraints: bool = False
    json: bool = False
    oracle: bool = False
    oracle_max_bits: int = DEFAULT_MAX_BITS
    allow_slash_comments: bool = False

    def __post_init__(self):
        if not (self.emit_tables or self.emit_hierarchy or self.emit_constraints or self.oracle):
            raise ValueError("nothing to do: give an --emit-* flag or --oracle-check")


@dataclass
class RunResult:
    status: int
    artifacts: dict[str, str] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    design_table: Optional[LegalHlsTable] = None
    report: Optional[ReachabilityReport] = None


# -- text rendering ---------------------------------------------------------


def _fmt_ids(ids) -> str:
    return ",".join(str(i) for i in sorted(ids))


def _grid(title: str, header: Sequence[str], rows: Sequence[Sequence]) -> list[str]:
    lines = [title, "\t".join(header)]
    lines += ["\t".join("n/a" if v is None else str(v) for v in r) for r in rows]
    return lines + [""]


def render_statement_tables(t: StatementTables) -> str:
    out: list[str] = []
    out += _grid(
        "entity",
        ["Entity", "Id_port", "Port_name", "Direction", "Signal"],
        [(r.entity_name, r.id_port, r.port_name, r.direction, r.signal) for r in t.entity],
    )
    out += _grid(
        "component",
        ["Component_name", "Id_port", "Direction", "Port_name"],
        [(r.component_name, r.id_port, r.direction, r.port_name) for r in t.component],
    )
    out += _grid("signal", ["Signal", "Type"], [(r.signal, r.signal_type) for r in t.signal])
    out += _grid(
        "instance",
        ["Id_instance", "Component_name", "Id_port", "Connected_to"],
        [(r.id_instance, r.component_name, r.id_port, r.connected_to) for r in t.instance],
    )
    out += _grid(
        "signal assignment",
        ["Id_sa", "Signal", "Id_cond", "Id_op", "Expression"],
        [(r.id_sa, r.signal, _fmt_ids(r.id_cond), r.id_op, r.expression) for r in t.signal_assignment],
    )
    out += _grid("case", ["Id_case", "Id_cond", "Condition"], [(r.id_case, r.id_cond, r.condition) for r in t.case])
    out += _grid("if", ["Id_if", "Id_cond", "Condition"], [(r.id_if, r.id_cond, r.condition) for r in t.if_])
    out += _grid(
        "condition",
        ["Id_cond", "Id_op", "Signal", "Operator"],
        [
            (r.id_cond, r.id_op, r.signal, OPERATOR_SYMBOLS[r.operator] if r.operator else "null")
            for r in t.condition
        ],
    )
    out += _grid(
        "operation",
        ["Id_op", "Cond_Sa", "Operation", "Operand", "Id_hlstate"],
        [(r.id_op, r.cond_sa, r.operation, r.operand, _fmt_ids(r.id_hlstate)) for r in t.operation],
    )
    return "\n".join(out)


def render_compute(res: ComputeResult) -> str:
    out: list[str] = []
    lv0 = res.initial
    out += _grid(
        "initial values",
        ["Signal", "Min", "Max"],
        [(n, iv.min, iv.max) for n, iv in zip(lv0.names, lv0.intervals)],
    )
    out += _grid("hls", ["Id_state", "Constraints"], [(h.id_hlstate, "{" + _fmt_ids(h.constraints) + "}") for h in res.hls])
    head = ["Id_op", "Id_hlstate", "Cond_SA", "Signal", "Min", "Max", "Stride", "Class"]
    out += _grid(
        "constraints",
        head,
        [(r.id_op, _fmt_ids(r.id_hlstate), r.kind, r.signal, r.interval.min, r.interval.max, r.interval.stride, r.cls) for r in res.constraints],
    )
    out += _grid(
        "assignments",
        head,
        [(r.id_op, r.id_hlstate, r.kind, r.signal, r.interval.min, r.interval.max, r.interval.stride, r.cls) for r in res.assignments],
    )
    out.append(render_legal(res.legal))
    return "\n".join(out)


def render_legal(table: LegalHlsTable) -> str:
    header = ["Id_hlstate"] + [f"{s} ({c})" for s, c in zip(table.signals, table.classes)]
    return "\n".join(_grid("legal hls", header, [(r.id_hlstate, *map(str, r.intervals)) for r in table.rows]))


def render_hierarchy(conn, flat: FlatModel) -> str:
    out = _grid(
        "connectivity",
        ["Inst", "Module", "Level", "In_dependencies", "Out_dependencies"],
        [(r.inst, r.module, r.level, *r.render()) for r in conn],
    )
    out += _grid("flat model", ["Inst", "In_dependencies", "Out_dependencies"], [(r.inst, *r.render()) for r in flat])
    return "\n".join(out)


def emit_constraints(table: LegalHlsTable, sink: IO[str]) -> int:
    """Write one ``state`` block per legal row; returns the UTF-8 byte count."""
    n = 0
    for r in table.rows:
        clauses = "; ".join(f"{s.lower()} in {iv}" for s, iv in zip(table.signals, r.intervals))
        line = f"state {r.id_hlstate} {{ {clauses} }}\n"
        sink.write(line)
        n += len(line.encode("utf-8"))
    return n


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


# -- pipeline ---------------------------------------------------------------


def _pick_top(design: dict[str, StatementTables]) -> str:
    used = {r.component_name.lower() for t in design.values() for r in t.instance}
    roots = [k for k in design if k not in used]
    if len(roots) != 1:
        raise HierarchyError("cannot infer the top entity; pass --top")
    return roots[0]


def run(config: RunConfig) -> RunResult:
    res = RunResult(EXIT_OK)
    try:
        units = [SourceUnit.from_path(p) for p in config.inputs]
        design = parse_design(units, allow_slash_comments=config.allow_slash_comments)
        top = (config.top or _pick_top(design)).lower()
        if top not in design:
            raise HierarchyError(f"unknown top entity {config.top}")
    except OSError as exc:
        res.errors.append(f"{exc.filename}: {exc.strerror}")
        res.status = EXIT_PARSE
        return res
    except (FrontendError, HierarchyError) as exc:
        res.errors.append(str(exc))
        res.status = EXIT_PARSE
        return res

    for t in design.values():
        res.errors += [f"{t.module}: {m}" for m in validate(t)]
    try:
        results = {k: compute(t) for k, t in design.items() if t.clock is not None}
    except ExtractionError as exc:
        res.errors.append(str(exc))
        res.status = EXIT_PARSE
        return res
    for r in results.values():
        res.warnings += r.diagnostics

    top_tables = design[top]
    structural = bool(top_tables.instance)
    conn, flat = [], None
    if structural:
        conn = build_connectivity(design, top, res.errors)
        flat = flatten(conn)
        res.errors += list(flat.diagnostics)
        stateful = [r for r in flat.leaves if r.module.lower() in results]
        for r in flat.leaves:
            if r.module.lower() not in results:
                res.warnings.append(f"instance {r.inst} ({r.module}) has no clocked process; left unconstrained")
        legal = {r.inst: results[r.module.lower()].legal for r in stateful}
        try:
            res.design_table = combine_design(flat, legal, top_tables.module, order=[r.inst for r in stateful])
        except CompositionError as exc:
            res.errors.append(str(exc))
    elif top in results:
        res.design_table = results[top].legal

    ext = "json" if config.json else "txt"
    if config.emit_tables:
        for k in sorted(design):
            t = design[k]
            if config.json:
                doc = {"tables": results[k].tables.to_json() if k in results else t.to_json()}
                if k in results:
                    doc["legal"] = results[k].legal.to_json()
                text = _dumps(doc)
            else:
                text = render_statement_tables(results[k].tables if k in results else t)
                if k in results:
                    text += "\n" + render_compute(results[k])
            res.artifacts[f"{t.module}.tables.{ext}"] = text
    if config.emit_hierarchy:
        if flat is None:
            flat = flatten(conn)
        if config.json:
            text = _dumps({"connectivity": [r.to_json() for r in conn], "flat": flat.to_json()["rows"]})
        else:
            text = render_hierarchy(conn, flat)
        res.artifacts[f"{top_tables.module}.hierarchy.{ext}"] = text
    if config.emit_constraints:
        table = res.design_table or LegalHlsTable(top_tables.module, (), ())
        if not table.rows:
            res.warnings.append(f"{top_tables.module}: no legal HLS; constraint file is empty")
        buf = io.StringIO()
        emit_constraints(table, buf)
        res.artifacts[f"{top_tables.module}.constraints.txt"] = buf.getvalue()
        if config.json:
            res.artifacts[f"{top_tables.module}.legal.json"] = _dumps(table.to_json())
    if config.oracle:
        try:
            if structural:
                reach = simulate_design(
                    {k: design[k] for k in results}, _restrict(flat, results), max_bits=config.oracle_max_bits
                )
            else:
                reach = simulate_exhaustive(top_tables, max_bits=config.oracle_max_bits)
            if res.design_table is not None:
                res.report = check_containment(reach, res.design_table)
                res.artifacts[f"{top_tables.module}.oracle.json"] = _dumps(res.report.to_json())
                if res.report.uncovered:
                    res.errors.append(f"{top_tables.module}: {len(res.report.uncovered)} reachable states not covered")
        except StateSpaceTooLarge as exc:
            res.errors.append(str(exc))

    if res.errors:
        res.status = EXIT_DIAGNOSTICS
    return res


def _restrict(flat: FlatModel, results) -> FlatModel:
    """Drop leaves without a clocked process from the flat model."""
    keep = tuple(r for r in flat.rows if not r.leaf or r.module.lower() in results)
    return FlatModel(keep, flat.diagnostics)


# -- entry point -------------------------------------------------------------


def _color(kind: str, text: str, stream) -> str:
    flag = os.environ.get("HLSX_COLOR", "").lower()
    if flag in ("1", "true", "yes", "always") or (flag == "auto" and stream.isatty()):
        code = "31" if kind == "error" else "33"
        return f"\x1b[{code}m{text}\x1b[0m"
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hlsx", description="Legal high-level state extraction from VHDL.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("extract", help="analyze VHDL files")
    ex.add_argument("inputs", nargs="+", metavar="FILE")
    ex.add_argument("--top", help="top entity (inferred when unambiguous)")
    ex.add_argument("--out", metavar="DIR", help="write artifacts here instead of stdout")
    ex.add_argument("--emit-tables", action="store_true", help="statement tables and per-module COMPUTE tables")
    ex.add_argument("--emit-hierarchy", action="store_true", help="connectivity rows and flat model")
    ex.add_argument("--emit-constraints", action="store_true", help="ATPG constraint blocks for the top entity")
    ex.add_argument("--json", action="store_true", help="JSON instead of text tables")
    ex.add_argument("--oracle-check", action="store_true", help="check the legal HLS against exhaustive simulation")
    ex.add_argument("--oracle-max-bits", type=int, default=DEFAULT_MAX_BITS, metavar="N")
    ex.add_argument("--allow-slash-comments", action="store_true", help="accept // comments")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        config = RunConfig(
            args.inputs,
            args.top,
            args.out,
            args.emit_tables,
            args.emit_hierarchy,
            args.emit_constraints,
            args.json,
            args.oracle_check,
            args.oracle_max_bits,
            args.allow_slash_comments,
        )
    except ValueError as exc:
        ap.error(str(exc))
    result = run(config)
    for w in result.warnings:
        print(_color("warning", f"warning: {w}", sys.stderr), file=sys.stderr)
    for e in result.errors:
        print(_color("error", f"error: {e}", sys.stderr), file=sys.stderr)
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in result.artifacts.items():
            (out / name).write_text(text, encoding="utf-8", newline="\n")
    else:
        for name, text in result.artifacts.items():
            sys.stdout.write(f"== {name}\n{text}")
            if not text.endswith("\n"):
                sys.stdout.write("\n")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
