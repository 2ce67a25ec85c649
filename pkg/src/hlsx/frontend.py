"""Parser for the supported VHDL subset.

Source text goes through the PEG in ``vhdl_subset.peg`` into a small
AST, which is then walked in source order to fill the statement tables.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence, Union

from parsimonious.exceptions import IncompleteParseError, ParseError
from parsimonious.grammar import Grammar
from parsimonious.nodes import NodeVisitor

from .rtl_ir import (
    AssignRow,
    CaseRow,
    ComponentRow,
    ConditionRow,
    EntityRow,
    IfRow,
    InstanceRow,
    OperationRow,
    SignalRow,
    StatementTables,
    validate,
)

SUFFIXES = (".vhd", ".vhdl")

_RELOPS = {"=": "eq", "/=": "neq", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}

# constructs outside the subset, checked before parsing for a clear message
_UNSUPPORTED = {
    "for": "for-loop",
    "while": "while-loop",
    "loop": "loop",
    "wait": "wait statement",
    "variable": "variable",
    "function": "function",
    "procedure": "procedure",
    "generic": "generic",
    "generate": "generate",
    "inout": "inout port",
    "buffer": "buffer port",
    "signed": "signed arithmetic",
    "after": "delayed assignment",
}
_UNSUPPORTED_RE = re.compile(r"\b(" + "|".join(_UNSUPPORTED) + r")\b", re.I)


class FrontendError(Exception):
    """Any failure to turn source text into tables."""

    def __init__(self, message: str, path: str = "<string>", line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.path = path
        self.line = line
        self.col = col

    def __str__(self) -> str:
        if self.line:
            return f"{self.path}:{self.line}:{self.col}: {self.message}"
        return f"{self.path}: {self.message}"


class VhdlSyntaxError(FrontendError):
    pass


class UnsupportedConstruct(FrontendError):
    pass


class DesignError(FrontendError):
    """Cross-unit problems: duplicate entities, unresolved components."""


@dataclass(frozen=True)
class SourceUnit:
    path: str
    text: str
    _lines: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"{self.path}: empty source")
        starts = [0] + [m.end() for m in re.finditer(r"\n", self.text)]
        object.__setattr__(self, "_lines", tuple(starts))

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> SourceUnit:
        p = Path(path)
        return cls(str(p), p.read_text(encoding="utf-8"))

    def line_col(self, pos: int) -> tuple[int, int]:
        i = bisect.bisect_right(self._lines, pos) - 1
        return i + 1, pos - self._lines[i] + 1


# -- expressions ---------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int
    text: str


@dataclass(frozen=True)
class Sig:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # "+", "*" or "mod"
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Sig, BinOp]


def literal_value(text: str) -> int:
    """Unsigned value of an integer, bit-string or std_logic literal."""
    t = text.strip()
    if t[0] in "\"'":
        return int(t[1:-1], 2)
    return int(t)


def expr_signals(e: Expr) -> list[str]:
    if isinstance(e, Sig):
        return [e.name]
    if isinstance(e, BinOp):
        return expr_signals(e.left) + expr_signals(e.right)
    return []


# -- AST -----------------------------------------------------------------

@dataclass
class Compare:
    signal: str
    kind: str
    bound: Lit
    text: str


@dataclass
class Sync:
    clock: str
    text: str


@dataclass
class Assign:
    target: str
    expr: Expr
    rhs_text: str
    text: str
    pos: int


@dataclass
class If:
    branches: list  # (Compare | Sync | None for else, [stmts], text)
    pos: int


@dataclass
class Case:
    selector: str
    arms: list  # (Lit | None for others, [stmts])
    pos: int


@dataclass
class Process:
    body: list
    pos: int


@dataclass
class Instance:
    label: str
    component: str
    assoc: list  # (formal | None, actual)
    pos: int


@dataclass
class ConcAssign:
    target: str
    expr: Expr
    pos: int


@dataclass
class EntityDecl:
    name: str
    ports: list  # (name, direction, type text)
    pos: int


@dataclass
class ArchBody:
    name: str
    entity: str
    signals: list  # (name, type text)
    components: list  # (name, ports)
    statements: list
    pos: int


def _squash(text: str) -> str:
    return " ".join(text.split())


class _Builder(NodeVisitor):
    unwrapped_exceptions = (FrontendError,)

    def generic_visit(self, node, children):
        return children or node

    # leaves
    def visit_ident(self, node, children):
        return node.children[1].text

    def visit_literal(self, node, children):
        text = node.text.strip()
        return Lit(literal_value(text), text)

    def visit_integer(self, node, children):
        return int(node.text.strip())

    def visit_ident_list(self, node, children):
        first, rest = children
        return [first] + [c[1] for c in rest] if isinstance(rest, list) else [first]

    def visit_direction(self, node, children):
        return "In" if node.text.strip().lower() == "in" else "Out"

    def visit_vector_type(self, node, children):
        return f"std_logic_vector({children[2]} downto {children[4]})"

    def visit_type_mark(self, node, children):
        c = children[0]
        return c if isinstance(c, str) else "std_logic"

    # declarations
    def visit_port_clause(self, node, children):
        _, _, first, rest, _, _ = children
        decls = [first] + ([c[1] for c in rest] if isinstance(rest, list) else [])
        ports = []
        for names, direction, type_text in decls:
            ports.extend((n, direction, type_text) for n in names)
        return ports

    def visit_port_decl(self, node, children):
        names, _, direction, type_text = children
        return names, direction, type_text

    def visit_entity_decl(self, node, children):
        name = children[1]
        ports = children[3][0] if isinstance(children[3], list) else []
        return EntityDecl(name, ports, node.start)

    def visit_signal_decl(self, node, children):
        return ("signal", [(n, children[3]) for n in children[1]])

    def visit_component_decl(self, node, children):
        ports = children[3][0] if isinstance(children[3], list) else []
        return ("component", (children[1], ports))

    def visit_block_decl(self, node, children):
        return children[0]

    def visit_architecture_body(self, node, children):
        name, entity = children[1], children[3]
        signals, components = [], []
        decls = children[5] if isinstance(children[5], list) else []
        for kind, payload in decls:
            if kind == "signal":
                signals.extend(payload)
            else:
                components.append(payload)
        stmts = children[7] if isinstance(children[7], list) else []
        return ArchBody(name, entity, signals, components, stmts, node.start)

    def visit_design_unit(self, node, children):
        return children[0]

    def visit_design_file(self, node, children):
        units = children[2]
        return units if isinstance(units, list) else []

    # concurrent statements
    def visit_concurrent_stmt(self, node, children):
        return children[0]

    def visit_process_stmt(self, node, children):
        body = children[5] if isinstance(children[5], list) else []
        return Process(body, node.start)

    def visit_named_association(self, node, children):
        return (children[0], children[2])

    def visit_association(self, node, children):
        c = children[0]
        return c if isinstance(c, tuple) else (None, c)

    def visit_instance_stmt(self, node, children):
        label, comp = children[0], children[3]
        first, rest = children[7], children[8]
        assoc = [first] + ([c[1] for c in rest] if isinstance(rest, list) else [])
        return Instance(label, comp, assoc, node.start)

    def visit_concurrent_assign(self, node, children):
        return ConcAssign(children[0], children[2], node.start)

    # sequential statements
    def visit_seq_stmt(self, node, children):
        return children[0]

    def visit_null_stmt(self, node, children):
        return None

    def visit_signal_assign(self, node, children):
        target, expr = children[0], children[2]
        rhs_node = node.children[2]
        return Assign(target, expr, _squash(rhs_node.text), _squash(node.text.rstrip().rstrip(";")), node.start)

    def _stmts(self, c):
        return [s for s in c if s is not None] if isinstance(c, list) else []

    def visit_elsif_part(self, node, children):
        return (children[1], self._stmts(children[3]), _squash(node.children[1].text))

    def visit_else_part(self, node, children):
        return (None, self._stmts(children[1]), "else")

    def visit_if_stmt(self, node, children):
        branches = [(children[1], self._stmts(children[3]), _squash(node.children[1].text))]
        if isinstance(children[4], list):
            branches.extend(children[4])
        if isinstance(children[5], list):
            branches.append(children[5][0])
        return If(branches, node.start)

    def visit_choice(self, node, children):
        c = children[0]
        return c if isinstance(c, Lit) else None

    def visit_case_arm(self, node, children):
        return (children[1], self._stmts(children[3]))

    def visit_case_stmt(self, node, children):
        return Case(children[1], children[3], node.start)

    # conditions
    def visit_condition(self, node, children):
        return children[0]

    def visit_paren_condition(self, node, children):
        return children[1]

    def visit_sync_condition(self, node, children):
        return children[0]

    def _sync(self, node, clk_a, clk_b, lit):
        if clk_a.lower() != clk_b.lower():
            raise UnsupportedConstruct(f"clock edge mixes {clk_a} and {clk_b}")
        if lit is not None and lit.value != 1:
            raise UnsupportedConstruct("falling-edge clock unsupported")
        return Sync(clk_a, _squash(node.text))

    def visit_event_first(self, node, children):
        return self._sync(node, children[0], children[3], children[5])

    def visit_level_first(self, node, children):
        return self._sync(node, children[0], children[4], children[2])

    def visit_rising_edge(self, node, children):
        return self._sync(node, children[2], children[2], None)

    def visit_relop(self, node, children):
        return _RELOPS[node.text.strip()]

    def visit_comparison(self, node, children):
        return Compare(children[0], children[1], children[2], _squash(node.text))

    # expressions
    def visit_factor(self, node, children):
        c = children[0]
        return Sig(c) if isinstance(c, str) else c

    def visit_paren_expr(self, node, children):
        return children[1]

    def visit_mul_op(self, node, children):
        return "*" if node.text.strip() == "*" else "mod"

    def visit_term(self, node, children):
        acc, rest = children
        for op, rhs in rest if isinstance(rest, list) else []:
            acc = BinOp(op, acc, rhs)
        return acc

    def visit_mul_factor(self, node, children):
        return (children[0], children[1])

    def visit_add_term(self, node, children):
        return ("+", children[1])

    def visit_expr(self, node, children):
        acc, rest = children
        for op, rhs in rest if isinstance(rest, list) else []:
            acc = BinOp(op, acc, rhs)
        return acc


@lru_cache(maxsize=1)
def grammar() -> Grammar:
    text = resources.files("hlsx").joinpath("vhdl_subset.peg").read_text(encoding="utf-8")
    return Grammar(text)


def grammar_text() -> str:
    return resources.files("hlsx").joinpath("vhdl_subset.peg").read_text(encoding="utf-8")


def parse_expression(text: str) -> Expr:
    """Parse a right-hand side such as ``c_s + 1`` or ``4 * x mod 10``."""
    return _Builder().visit(grammar()["expr"].parse(text.strip()))


def strip_comments(text: str, allow_slash_comments: bool = False) -> str:
    """Blank out comments, keeping every character offset intact."""
    pattern = r"(--|//)[^\n]*" if allow_slash_comments else r"--[^\n]*"
    return re.sub(pattern, lambda m: " " * len(m.group(0)), text)


def _ast(unit: SourceUnit, allow_slash_comments: bool) -> list:
    text = strip_comments(unit.text, allow_slash_comments)
    m = _UNSUPPORTED_RE.search(text)
    if m:
        line, col = unit.line_col(m.start())
        raise UnsupportedConstruct(f"{_UNSUPPORTED[m.group(1).lower()]} unsupported", unit.path, line, col)
    try:
        tree = grammar().parse(text)
    except IncompleteParseError as exc:
        line, col = unit.line_col(exc.pos)
        raise VhdlSyntaxError(f"syntax error near {_excerpt(text, exc.pos)!r}", unit.path, line, col) from None
    except ParseError as exc:
        line, col = unit.line_col(exc.pos)
        raise VhdlSyntaxError(f"syntax error near {_excerpt(text, exc.pos)!r}", unit.path, line, col) from None
    try:
        return _Builder().visit(tree)
    except FrontendError as exc:
        exc.path = unit.path
        raise


def _excerpt(text: str, pos: int) -> str:
    return text[pos:pos + 20].split("\n")[0]


class _TableWriter:
    """Walks one architecture in source order, numbering every row."""

    def __init__(self, unit: SourceUnit, entity: EntityDecl, arch: Optional[ArchBody], first_instance: int):
        self.unit = unit
        self.entity = entity
        self.arch = arch
        self.next_instance = first_instance
        self.names = {p[0].lower(): p[0] for p in entity.ports}
        if arch:
            self.names.update({s[0].lower(): s[0] for s in arch.signals})
        self.op_rows: list[OperationRow] = []
        self.cond_rows: list[ConditionRow] = []
        self.assign_rows: list[AssignRow] = []
        self.case_rows: list[CaseRow] = []
        self.if_rows: list[IfRow] = []
        self.n_if = 0
        self.n_case = 0
        self.clock: Optional[str] = None

    def error(self, cls, message: str, pos: int):
        line, col = self.unit.line_col(pos)
        return cls(message, self.unit.path, line, col)

    def canon(self, name: str) -> str:
        return self.names.get(name.lower(), name)

    def new_op(self, cond_sa: str, operation: str, operand: str) -> int:
        id_op = len(self.op_rows) + 1
        self.op_rows.append(OperationRow(id_op, cond_sa, operation, self.canon(operand)))
        return id_op

    def new_cond(self, cond, parent: Optional[int], sync: bool = False) -> int:
        id_cond = len(self.cond_rows) + 1
        if cond is None:
            self.cond_rows.append(ConditionRow(id_cond, None, None, None, parent))
            return id_cond
        if isinstance(cond, Sync):
            id_op = self.new_op("Cond", cond.text, cond.clock)
            row = ConditionRow(id_cond, id_op, self.canon(cond.clock), "eq", parent, sync=True)
        else:
            id_op = self.new_op("Cond", cond.bound.text, cond.signal)
            row = ConditionRow(id_cond, id_op, self.canon(cond.signal), cond.kind, parent)
        self.cond_rows.append(row)
        return id_cond

    def process(self, proc: Process):
        body = proc.body
        if (
            len(body) != 1
            or not isinstance(body[0], If)
            or not isinstance(body[0].branches[0][0], Sync)
            or len(body[0].branches) != 1
        ):
            raise self.error(UnsupportedConstruct, "process must be a single clock-edge if statement", proc.pos)
        sync, stmts, text = body[0].branches[0]
        self.clock = self.canon(sync.clock)
        self.n_if += 1
        id_cond = self.new_cond(sync, None, sync=True)
        self.if_rows.append(IfRow(self.n_if, id_cond, text))
        self.walk(stmts, (), id_cond)

    def walk(self, stmts: Sequence, path: tuple[int, ...], parent: Optional[int]):
        for s in stmts:
            if isinstance(s, Assign):
                id_op = self.new_op("Sa", s.rhs_text, s.target)
                id_sa = len(self.assign_rows) + 1
                self.assign_rows.append(AssignRow(id_sa, self.canon(s.target), path, id_op, s.text))
            elif isinstance(s, If):
                self.walk_if(s, path, parent)
            elif isinstance(s, Case):
                self.walk_case(s, path, parent)

    def walk_if(self, s: If, path, parent):
        self.n_if += 1
        id_if = self.n_if
        for i, (cond, stmts, text) in enumerate(s.branches):
            if isinstance(cond, Sync):
                raise self.error(UnsupportedConstruct, "nested clock edge unsupported", s.pos)
            if cond is None:
                cond, text = self.complement(s.branches[:i])
            id_cond = self.new_cond(cond, parent)
            self.if_rows.append(IfRow(id_if, id_cond, text))
            self.walk(stmts, path + (id_cond,), id_cond)

    @staticmethod
    def complement(previous):
        # only a lone comparison has a single-comparison complement
        if len(previous) == 1 and isinstance(previous[0][0], Compare):
            c = previous[0][0]
            neg = {"eq": "neq", "neq": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}[c.kind]
            text = f"{c.signal} {_VHDL_OPS[neg]} {c.bound.text}"
            return Compare(c.signal, neg, c.bound, text), text
        return None, "else"

    def walk_case(self, s: Case, path, parent):
        self.n_case += 1
        id_case = self.n_case
        others = [a for a in s.arms if a[0] is None]
        if len(others) > 1:
            raise self.error(VhdlSyntaxError, "more than one others arm", s.pos)
        for choice, stmts in s.arms:
            if choice is None:
                id_cond = self.new_cond(None, parent)
                text = "others"
            else:
                cond = Compare(s.selector, "eq", choice, f"{s.selector} = {choice.text}")
                id_cond = self.new_cond(cond, parent)
                text = cond.text
            self.case_rows.append(CaseRow(id_case, id_cond, text))
            self.walk(stmts, path + (id_cond,), id_cond)

    def build(self) -> StatementTables:
        ent = self.entity
        port_signal: dict[str, str] = {}
        components, instances, processes = [], [], []
        arch = self.arch
        comp_decls = {}
        if arch:
            for name, ports in arch.components:
                comp_decls[name.lower()] = (name, ports)
                for i, (pname, direction, _) in enumerate(ports, 1):
                    components.append(ComponentRow(name, i, direction, pname))
            for st in arch.statements:
                if isinstance(st, Process):
                    processes.append(st)
                elif isinstance(st, Instance):
                    instances.extend(self.instance(st, comp_decls))
                elif isinstance(st, ConcAssign):
                    target = st.target.lower()
                    if not isinstance(st.expr, Sig) or target not in {p[0].lower() for p in ent.ports if p[1] == "Out"}:
                        raise self.error(UnsupportedConstruct, "concurrent assignment other than output <= signal", st.pos)
                    port_signal[target] = self.canon(st.expr.name)
        if len(processes) > 1:
            raise self.error(UnsupportedConstruct, "multiple processes per architecture unsupported", processes[1].pos)
        if processes:
            self.process(processes[0])

        entity_rows = tuple(
            EntityRow(ent.name, i, name, direction, port_signal.get(name.lower()))
            for i, (name, direction, _) in enumerate(ent.ports, 1)
        )
        clock = self.clock.lower() if self.clock else None
        signal_rows = [SignalRow(n, t) for n, _, t in ent.ports if n.lower() != clock]
        if arch:
            signal_rows += [SignalRow(n, t) for n, t in arch.signals]
        return StatementTables(
            module=ent.name,
            entity=entity_rows,
            component=tuple(components),
            signal=tuple(signal_rows),
            instance=tuple(instances),
            signal_assignment=tuple(self.assign_rows),
            case=tuple(self.case_rows),
            if_=tuple(self.if_rows),
            condition=tuple(self.cond_rows),
            operation=tuple(self.op_rows),
            clock=self.clock,
        )

    def instance(self, st: Instance, comp_decls) -> list[InstanceRow]:
        decl = comp_decls.get(st.component.lower())
        if decl is None:
            raise self.error(DesignError, f"component {st.component} not declared", st.pos)
        comp_name, ports = decl
        index = {p[0].lower(): i for i, p in enumerate(ports, 1)}
        id_instance = self.next_instance
        self.next_instance += 1
        rows = {}
        for pos, (formal, actual) in enumerate(st.assoc, 1):
            if formal is None:
                pid = pos
            else:
                pid = index.get(formal.lower())
                if pid is None:
                    raise self.error(DesignError, f"component {comp_name} has no port {formal}", st.pos)
            if pid in rows or pid > len(ports):
                raise self.error(DesignError, f"bad association for port {pid} of {st.label}", st.pos)
            rows[pid] = InstanceRow(id_instance, comp_name, pid, self.canon(actual))
        return [rows[k] for k in sorted(rows)]


_VHDL_OPS = {"eq": "=", "neq": "/=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}


def parse_modules(
    unit: SourceUnit, first_instance: int = 1, allow_slash_comments: bool = False
) -> list[StatementTables]:
    """Tables for every entity in ``unit``, in source order."""
    units = _ast(unit, allow_slash_comments)
    entities: dict[str, EntityDecl] = {}
    archs: dict[str, ArchBody] = {}
    order = []
    for u in units:
        if isinstance(u, EntityDecl):
            key = u.name.lower()
            if key in entities:
                line, col = unit.line_col(u.pos)
                raise DesignError(f"duplicate entity {u.name}", unit.path, line, col)
            entities[key] = u
            order.append(key)
        else:
            key = u.entity.lower()
            if key not in entities:
                line, col = unit.line_col(u.pos)
                raise DesignError(f"architecture {u.name} of unknown entity {u.entity}", unit.path, line, col)
            if key in archs:
                line, col = unit.line_col(u.pos)
                raise UnsupportedConstruct("multiple architectures per entity", unit.path, line, col)
            archs[key] = u
    out = []
    next_instance = first_instance
    for key in order:
        writer = _TableWriter(unit, entities[key], archs.get(key), next_instance)
        tables = writer.build()
        next_instance = writer.next_instance
        problems = validate(tables)
        if problems:
            raise FrontendError("; ".join(problems), unit.path)
        out.append(tables)
    return out


def parse(unit: SourceUnit, allow_slash_comments: bool = False) -> StatementTables:
    """Tables for the single entity/architecture pair in ``unit``."""
    modules = parse_modules(unit, allow_slash_comments=allow_slash_comments)
    if len(modules) != 1:
        raise FrontendError(f"expected exactly one entity, found {len(modules)}", unit.path)
    return modules[0]


def parse_design(units: Sequence[SourceUnit], allow_slash_comments: bool = False) -> dict[str, StatementTables]:
    """Parse every unit; instance ids continue across units in the given order."""
    design: dict[str, StatementTables] = {}
    where: dict[str, str] = {}
    next_instance = 1
    for unit in units:
        for tables in parse_modules(unit, next_instance, allow_slash_comments):
            key = tables.module.lower()
            if key in design:
                raise DesignError(f"duplicate entity {tables.module} (also in {where[key]})", unit.path)
            design[key] = tables
            where[key] = unit.path
            if tables.instance:
                next_instance = max(r.id_instance for r in tables.instance) + 1
    for tables in design.values():
        for row in tables.instance:
            if row.component_name.lower() not in design:
                raise DesignError(f"unresolved component {row.component_name}", where[tables.module.lower()])
    return design
