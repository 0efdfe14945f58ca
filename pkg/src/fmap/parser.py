"""Parsing of per-agent domain/problem files and grounding into a task.

The language keeps the shape of a PDDL3.1 state-variable domain plus a
``:shared-data`` section in the problem file that lists which function
templates each peer agent may see.  Grounding instantiates every operator
over the typed objects, prunes statically unreachable actions, derives the
per-agent variable domains and the pairwise shared sets, and synthesizes the
fictitious initial and final actions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

from .model import (
    FICTITIOUS,
    FINAL_ACTION_ID,
    INITIAL_ACTION_ID,
    UNDEFINED,
    UNDEFINED_NAME,
    Action,
    AgentView,
    Assignment,
    Fluent,
    MapTask,
    SymbolTable,
    validate_task,
)


class MadlError(Exception):
    """Parse or grounding failure; carries file:line:col diagnostics."""

    def __init__(self, diagnostics: list[str] | str):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = diagnostics
        super().__init__("\n".join(diagnostics))


# --------------------------------------------------------------------------
# S-expression reading
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Node:
    """Either an atom (text set) or a list of child nodes."""

    atom: Token | None = None
    children: tuple["Node", ...] = ()
    line: int = 0
    col: int = 0

    def is_atom(self) -> bool:
        return self.atom is not None

    @property
    def text(self) -> str:
        if self.atom is None:
            raise MadlError(f"{self.line}:{self.col}: expected an atom")
        return self.atom.text

    def where(self, filename: str) -> str:
        return f"{filename}:{self.line}:{self.col}"


def tokenize(text: str, filename: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(Token(ch, line, col))
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < len(text) and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            tokens.append(Token(text[start:i], line, start_col))
    return tokens


def read_sexpr(text: str, filename: str) -> Node:
    tokens = tokenize(text, filename)
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise MadlError(f"{filename}:0:0: unexpected end of input (unbalanced parentheses)")
        tok = tokens[pos]
        pos += 1
        if tok.text == "(":
            children = []
            while True:
                if pos >= len(tokens):
                    raise MadlError(f"{filename}:{tok.line}:{tok.col}: unclosed parenthesis")
                if tokens[pos].text == ")":
                    pos += 1
                    return Node(children=tuple(children), line=tok.line, col=tok.col)
                children.append(parse())
        if tok.text == ")":
            raise MadlError(f"{filename}:{tok.line}:{tok.col}: unbalanced closing parenthesis")
        return Node(atom=tok, line=tok.line, col=tok.col)

    root = parse()
    if pos != len(tokens):
        extra = tokens[pos]
        raise MadlError(f"{filename}:{extra.line}:{extra.col}: trailing input after top form")
    return root


def parse_typed_list(nodes: Iterable[Node], filename: str,
                     default_type: str = "object") -> list[tuple[str, str]]:
    """Parse ``a b - t c - u`` style lists into (name, type) pairs."""
    pending: list[str] = []
    out: list[tuple[str, str]] = []
    nodes = list(nodes)
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if not node.is_atom():
            raise MadlError(f"{node.where(filename)}: expected a name in typed list")
        if node.text == "-":
            if i + 1 >= len(nodes) or not nodes[i + 1].is_atom():
                raise MadlError(f"{node.where(filename)}: dangling '-' in typed list")
            type_name = nodes[i + 1].text
            out.extend((name, type_name) for name in pending)
            pending = []
            i += 2
        else:
            pending.append(node.text)
            i += 1
    out.extend((name, default_type) for name in pending)
    return out


# --------------------------------------------------------------------------
# Domain / problem models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[tuple[str, str], ...]
    range_type: str


@dataclass(frozen=True)
class Literal:
    """A condition or effect literal over a function application."""

    function: str
    args: tuple[str, ...]
    value: str
    positive: bool    # for conditions: = vs not =
    assign: bool      # for effects: assign vs not =


@dataclass(frozen=True)
class LiftedOperator:
    name: str
    params: tuple[tuple[str, str], ...]
    preconditions: tuple[Literal, ...]
    effects: tuple[Literal, ...]


@dataclass
class DomainModel:
    name: str
    types: dict[str, str] = field(default_factory=dict)      # type -> parent
    constants: dict[str, str] = field(default_factory=dict)  # name -> type
    functions: dict[str, FunctionDef] = field(default_factory=dict)
    operators: dict[str, LiftedOperator] = field(default_factory=dict)

    def is_subtype(self, sub: str, sup: str) -> bool:
        while True:
            if sub == sup:
                return True
            parent = self.types.get(sub)
            if parent is None or parent == sub:
                return False
            sub = parent


@dataclass(frozen=True)
class SharedDataDecl:
    function: str
    param_types: tuple[str, ...]
    value_type: str
    receivers: tuple[str, ...]


@dataclass
class ProblemModel:
    name: str
    domain_name: str
    objects: dict[str, str] = field(default_factory=dict)
    init: list[tuple[str, tuple[str, ...], str]] = field(default_factory=list)
    goals: list[tuple[str, tuple[str, ...], str]] = field(default_factory=list)
    shared: list[SharedDataDecl] = field(default_factory=list)


@dataclass(frozen=True)
class AgentFilePair:
    agent: str
    domain_text: str
    problem_text: str
    domain_file: str = "<domain>"
    problem_file: str = "<problem>"


# --------------------------------------------------------------------------
# Domain parsing
# --------------------------------------------------------------------------

def parse_domain(text: str, filename: str = "<domain>") -> DomainModel:
    root = read_sexpr(text, filename)
    errors: list[str] = []
    if not root.children or root.children[0].text != "define":
        raise MadlError(f"{root.where(filename)}: expected (define (domain ...) ...)")
    head = root.children[1]
    if head.is_atom() or len(head.children) != 2 or head.children[0].text != "domain":
        raise MadlError(f"{head.where(filename)}: expected (domain <name>)")
    model = DomainModel(name=head.children[1].text)
    model.types["object"] = "object"

    sections = root.children[2:]
    for section in sections:
        if section.is_atom() or not section.children:
            errors.append(f"{section.where(filename)}: expected a (:section ...) form")
            continue
        tag = section.children[0].text
        if tag == ":types":
            for name, parent in parse_typed_list(section.children[1:], filename):
                model.types[name] = parent
                model.types.setdefault(parent, "object")
        elif tag == ":constants":
            for name, type_name in parse_typed_list(section.children[1:], filename):
                if type_name not in model.types:
                    errors.append(f"{section.where(filename)}: unknown type {type_name!r}")
                model.constants[name] = type_name
        elif tag == ":functions":
            _parse_functions(section, model, filename, errors)
        elif tag == ":action":
            _parse_action(section, model, filename, errors)
        else:
            errors.append(f"{section.where(filename)}: unknown section {tag!r}")
    if errors:
        raise MadlError(errors)
    return model


def _parse_functions(section: Node, model: DomainModel, filename: str,
                     errors: list[str]):
    # (:functions (f ?a - T ...) - R (g ...) - S ...)
    items = list(section.children[1:])
    i = 0
    while i < len(items):
        decl = items[i]
        if decl.is_atom():
            errors.append(f"{decl.where(filename)}: expected a function declaration")
            i += 1
            continue
        if i + 2 >= len(items) or items[i + 1].text != "-" or not items[i + 2].is_atom():
            errors.append(f"{decl.where(filename)}: function needs a '- <range-type>'")
            i += 1
            continue
        range_type = items[i + 2].text
        name = decl.children[0].text
        params = tuple(parse_typed_list(decl.children[1:], filename))
        for _, type_name in params:
            if type_name not in model.types:
                errors.append(f"{decl.where(filename)}: unknown type {type_name!r}")
        if range_type not in model.types:
            errors.append(f"{items[i + 2].where(filename)}: unknown type {range_type!r}")
        if name in model.functions:
            errors.append(f"{decl.where(filename)}: duplicate function {name!r}")
        model.functions[name] = FunctionDef(name, params, range_type)
        i += 3


def _parse_action(section: Node, model: DomainModel, filename: str,
                  errors: list[str]):
    children = list(section.children[1:])
    if not children or not children[0].is_atom():
        errors.append(f"{section.where(filename)}: action needs a name")
        return
    name = children[0].text
    if name in model.operators:
        errors.append(f"{section.where(filename)}: duplicate operator name {name!r}")
        return
    fields: dict[str, Node] = {}
    i = 1
    while i + 1 < len(children):
        key = children[i]
        if not key.is_atom() or not key.text.startswith(":"):
            errors.append(f"{key.where(filename)}: expected :parameters/:precondition/:effect")
            return
        fields[key.text] = children[i + 1]
        i += 2
    params_node = fields.get(":parameters")
    params = tuple(parse_typed_list(params_node.children, filename)) if params_node else ()
    for pname, type_name in params:
        if not pname.startswith("?"):
            errors.append(f"{section.where(filename)}: parameter {pname!r} must start with '?'")
        if type_name not in model.types:
            errors.append(f"{section.where(filename)}: undeclared type {type_name!r} "
                          f"in parameters of {name!r}")
    if len({p for p, _ in params}) != len(params):
        errors.append(f"{section.where(filename)}: duplicate parameter names in {name!r}")

    scope = dict(params)
    pre = _parse_condition_list(fields.get(":precondition"), model, scope,
                                filename, errors, effects=False)
    eff = _parse_condition_list(fields.get(":effect"), model, scope,
                                filename, errors, effects=True)
    model.operators[name] = LiftedOperator(name, params, tuple(pre), tuple(eff))


def _parse_condition_list(node: Node | None, model: DomainModel,
                          scope: dict[str, str], filename: str,
                          errors: list[str], effects: bool) -> list[Literal]:
    if node is None:
        return []
    items = node.children[1:] if (node.children and node.children[0].text == "and") \
        else [node]
    out = []
    for item in items:
        lit = _parse_literal(item, model, scope, filename, errors, effects)
        if lit is not None:
            out.append(lit)
    return out


def _parse_literal(node: Node, model: DomainModel, scope: dict[str, str],
                   filename: str, errors: list[str], effects: bool) -> Literal | None:
    if node.is_atom() or not node.children:
        errors.append(f"{node.where(filename)}: expected a literal")
        return None
    head = node.children[0].text
    positive = True
    assign = True
    body = node
    if head == "not":
        positive = False
        assign = False
        if len(node.children) != 2:
            errors.append(f"{node.where(filename)}: 'not' takes one literal")
            return None
        body = node.children[1]
        head = body.children[0].text if body.children else ""
    if effects and positive:
        if head != "assign":
            errors.append(f"{node.where(filename)}: positive effects use (assign (f ...) v)")
            return None
    elif head != "=":
        errors.append(f"{node.where(filename)}: expected (= (f ...) v)")
        return None
    if len(body.children) != 3:
        errors.append(f"{body.where(filename)}: literal needs a function term and a value")
        return None
    fn_node, value_node = body.children[1], body.children[2]
    if fn_node.is_atom() or not fn_node.children:
        errors.append(f"{fn_node.where(filename)}: expected a function application")
        return None
    fn_name = fn_node.children[0].text
    fn = model.functions.get(fn_name)
    if fn is None:
        errors.append(f"{fn_node.where(filename)}: unknown function {fn_name!r}")
        return None
    args = tuple(a.text for a in fn_node.children[1:])
    if len(args) != len(fn.params):
        errors.append(f"{fn_node.where(filename)}: arity mismatch for {fn_name!r} "
                      f"(wanted {len(fn.params)}, got {len(args)})")
        return None
    for arg, (_, wanted) in zip(args, fn.params):
        arg_type = scope.get(arg) or model.constants.get(arg)
        if arg_type is None:
            errors.append(f"{fn_node.where(filename)}: unknown term {arg!r}")
        elif not model.is_subtype(arg_type, wanted):
            errors.append(f"{fn_node.where(filename)}: term {arg!r} of type {arg_type!r} "
                          f"does not fit {wanted!r}")
    value = value_node.text
    value_type = scope.get(value) or model.constants.get(value)
    if value_type is not None and not model.is_subtype(value_type, fn.range_type):
        errors.append(f"{value_node.where(filename)}: value {value!r} outside the "
                      f"range {fn.range_type!r} of {fn_name!r}")
    return Literal(fn_name, args, value, positive, positive if effects else True)


# --------------------------------------------------------------------------
# Problem parsing
# --------------------------------------------------------------------------

def parse_problem(text: str, domain: DomainModel,
                  filename: str = "<problem>") -> ProblemModel:
    root = read_sexpr(text, filename)
    errors: list[str] = []
    if not root.children or root.children[0].text != "define":
        raise MadlError(f"{root.where(filename)}: expected (define (problem ...) ...)")
    head = root.children[1]
    if head.is_atom() or len(head.children) != 2 or head.children[0].text != "problem":
        raise MadlError(f"{head.where(filename)}: expected (problem <name>)")
    model = ProblemModel(name=head.children[1].text, domain_name="")

    for section in root.children[2:]:
        if section.is_atom() or not section.children:
            errors.append(f"{section.where(filename)}: expected a (:section ...) form")
            continue
        tag = section.children[0].text
        if tag == ":domain":
            model.domain_name = section.children[1].text
            if model.domain_name != domain.name:
                errors.append(f"{section.where(filename)}: problem targets domain "
                              f"{model.domain_name!r}, parsed {domain.name!r}")
        elif tag == ":objects":
            for name, type_name in parse_typed_list(section.children[1:], filename):
                if type_name not in domain.types:
                    errors.append(f"{section.where(filename)}: unknown type {type_name!r}")
                model.objects[name] = type_name
        elif tag == ":init":
            for item in section.children[1:]:
                entry = _parse_ground_literal(item, domain, model, filename, errors)
                if entry:
                    model.init.append(entry)
        elif tag == ":global-goal":
            items = section.children[1:]
            if len(items) == 1 and items[0].children and items[0].children[0].text == "and":
                items = items[0].children[1:]
            for item in items:
                entry = _parse_ground_literal(item, domain, model, filename, errors)
                if entry:
                    model.goals.append(entry)
        elif tag == ":shared-data":
            for item in section.children[1:]:
                decl = _parse_shared_entry(item, domain, filename, errors)
                if decl:
                    model.shared.append(decl)
        else:
            errors.append(f"{section.where(filename)}: unknown section {tag!r}")
    if errors:
        raise MadlError(errors)
    return model


def _parse_ground_literal(node: Node, domain: DomainModel, model: ProblemModel,
                          filename: str, errors: list[str]):
    if node.is_atom() or len(node.children) != 3 or node.children[0].text != "=":
        errors.append(f"{node.where(filename)}: expected (= (f o ...) v)")
        return None
    fn_node, value_node = node.children[1], node.children[2]
    if fn_node.is_atom():
        errors.append(f"{fn_node.where(filename)}: expected a function application")
        return None
    fn_name = fn_node.children[0].text
    fn = domain.functions.get(fn_name)
    if fn is None:
        errors.append(f"{fn_node.where(filename)}: unknown function {fn_name!r}")
        return None
    args = tuple(a.text for a in fn_node.children[1:])
    if len(args) != len(fn.params):
        errors.append(f"{fn_node.where(filename)}: arity mismatch for {fn_name!r}")
        return None
    known = lambda o: o in model.objects or o in domain.constants
    for obj in args + (value_node.text,):
        if not known(obj):
            errors.append(f"{node.where(filename)}: unknown object {obj!r}")
            return None
    def type_of(o):
        return model.objects.get(o) or domain.constants.get(o)
    for obj, (_, wanted) in zip(args, fn.params):
        if not domain.is_subtype(type_of(obj), wanted):
            errors.append(f"{node.where(filename)}: object {obj!r} does not fit {wanted!r}")
    if not domain.is_subtype(type_of(value_node.text), fn.range_type):
        errors.append(f"{value_node.where(filename)}: value {value_node.text!r} outside "
                      f"the range of {fn_name!r}")
    return fn_name, args, value_node.text


def _parse_shared_entry(node: Node, domain: DomainModel, filename: str,
                        errors: list[str]) -> SharedDataDecl | None:
    # ((f ?a - T) - R :agents a1 a2 ...)
    if node.is_atom() or len(node.children) < 4:
        errors.append(f"{node.where(filename)}: malformed :shared-data entry")
        return None
    template, dash, range_node = node.children[0], node.children[1], node.children[2]
    if template.is_atom() or dash.text != "-" or not range_node.is_atom():
        errors.append(f"{node.where(filename)}: shared entry needs ((f ...) - R :agents ...)")
        return None
    fn_name = template.children[0].text
    fn = domain.functions.get(fn_name)
    if fn is None:
        errors.append(f"{template.where(filename)}: unknown function {fn_name!r} in :shared-data")
        return None
    params = parse_typed_list(template.children[1:], filename)
    if len(params) != len(fn.params):
        errors.append(f"{template.where(filename)}: template arity mismatch for {fn_name!r}")
        return None
    for (_, type_name) in params:
        if type_name not in domain.types:
            errors.append(f"{template.where(filename)}: unknown type {type_name!r}")
    if range_node.text not in domain.types:
        errors.append(f"{range_node.where(filename)}: unknown type {range_node.text!r}")
    if node.children[3].text != ":agents":
        errors.append(f"{node.where(filename)}: shared entry missing :agents")
        return None
    receivers = tuple(n.text for n in node.children[4:])
    if not receivers:
        errors.append(f"{node.where(filename)}: shared entry lists no receiving agents")
        return None
    return SharedDataDecl(fn_name, tuple(t for _, t in params), range_node.text, receivers)


# --------------------------------------------------------------------------
# Pretty printing (round-trip support and generator output)
# --------------------------------------------------------------------------

def format_domain(model: DomainModel) -> str:
    lines = [f"(define (domain {model.name})"]
    declared = [t for t in model.types if t != "object"]
    if declared:
        parts = " ".join(f"{t} - {model.types[t]}" if model.types[t] != "object" else t
                         for t in sorted(declared))
        lines.append(f"  (:types {parts})")
    if model.constants:
        parts = " ".join(f"{c} - {t}" for c, t in sorted(model.constants.items()))
        lines.append(f"  (:constants {parts})")
    if model.functions:
        decls = []
        for fn in sorted(model.functions.values(), key=lambda f: f.name):
            params = "".join(f" {p} - {t}" for p, t in fn.params)
            decls.append(f"({fn.name}{params}) - {fn.range_type}")
        lines.append(f"  (:functions {' '.join(decls)})")
    for op in sorted(model.operators.values(), key=lambda o: o.name):
        params = " ".join(f"{p} - {t}" for p, t in op.params)
        lines.append(f"  (:action {op.name}")
        lines.append(f"    :parameters ({params})")
        lines.append(f"    :precondition (and {' '.join(_format_literal(l, False) for l in op.preconditions)})")
        lines.append(f"    :effect (and {' '.join(_format_literal(l, True) for l in op.effects)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def _format_literal(lit: Literal, effect: bool) -> str:
    app = f"({lit.function}{''.join(' ' + a for a in lit.args)})"
    if effect:
        if lit.assign:
            return f"(assign {app} {lit.value})"
        return f"(not (= {app} {lit.value}))"
    if lit.positive:
        return f"(= {app} {lit.value})"
    return f"(not (= {app} {lit.value}))"


def format_problem(model: ProblemModel) -> str:
    lines = [f"(define (problem {model.name})",
             f"  (:domain {model.domain_name})"]
    if model.objects:
        parts = " ".join(f"{o} - {t}" for o, t in sorted(model.objects.items()))
        lines.append(f"  (:objects {parts})")
    if model.init:
        parts = " ".join(f"(= ({f}{''.join(' ' + a for a in args)}) {v})"
                         for f, args, v in model.init)
        lines.append(f"  (:init {parts})")
    parts = " ".join(f"(= ({f}{''.join(' ' + a for a in args)}) {v})"
                     for f, args, v in model.goals)
    lines.append(f"  (:global-goal (and {parts}))")
    if model.shared:
        decls = []
        for decl in model.shared:
            params = "".join(f" ?x{i} - {t}" for i, t in enumerate(decl.param_types))
            decls.append(f"(({decl.function}{params}) - {decl.value_type} "
                         f":agents {' '.join(decl.receivers)})")
        lines.append(f"  (:shared-data {' '.join(decls)})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Grounding
# --------------------------------------------------------------------------

def _variable_name(function: str, args: tuple[str, ...]) -> str:
    return f"{function}({','.join(args)})" if args else function


@dataclass
class _AgentGround:
    """Intermediate grounding data of one agent."""

    agent: str
    domain: DomainModel
    problem: ProblemModel
    actions: list[tuple[str, tuple[Fluent, ...], tuple[Assignment, ...]]] = field(default_factory=list)
    init: list[Fluent] = field(default_factory=list)
    goals: list[Fluent] = field(default_factory=list)
    variables: set[int] = field(default_factory=set)
    domains: dict[int, set[int]] = field(default_factory=dict)


def ground_task(pairs: list[AgentFilePair], name: str = "task") -> MapTask:
    """Parse, instantiate, prune, and assemble the task and all agent views."""
    if not pairs:
        raise MadlError("no agent files given")
    if len({p.agent for p in pairs}) != len(pairs):
        raise MadlError("duplicate agent ids")

    var_names = SymbolTable()
    val_names = SymbolTable(reserved=[UNDEFINED_NAME])
    grounds: dict[str, _AgentGround] = {}
    errors: list[str] = []

    for pair in sorted(pairs, key=lambda p: p.agent):
        domain = parse_domain(pair.domain_text, pair.domain_file)
        problem = parse_problem(pair.problem_text, domain, pair.problem_file)
        ground = _AgentGround(pair.agent, domain, problem)
        grounds[pair.agent] = ground
        objects = dict(domain.constants)
        objects.update(problem.objects)

        def var_id(function, args):
            return var_names.intern(_variable_name(function, args))

        for function, args, value in problem.init:
            fluent = Fluent(var_id(function, args), val_names.intern(value), True)
            ground.init.append(fluent)
        for function, args, value in problem.goals:
            fluent = Fluent(var_id(function, args), val_names.intern(value), True)
            ground.goals.append(fluent)

        for op in sorted(domain.operators.values(), key=lambda o: o.name):
            for binding in _bindings(op, domain, objects):
                grounded = _instantiate(op, binding, var_id, val_names)
                if grounded is None:
                    continue
                name_str, pre, eff = grounded
                if _is_identity(pre, eff):
                    continue
                ground.actions.append((name_str, pre, eff))

    # Per-agent knowledge: variables and value domains from init, actions, goals.
    for ground in grounds.values():
        for fluent in ground.init + ground.goals:
            ground.variables.add(fluent.var)
            ground.domains.setdefault(fluent.var, set()).add(fluent.value)
        for _, pre, eff in ground.actions:
            for f in pre:
                ground.variables.add(f.var)
                ground.domains.setdefault(f.var, set()).add(f.value)
            for e in eff:
                ground.variables.add(e.var)
                ground.domains.setdefault(e.var, set()).add(e.value)

    shared_tables = _shared_tables(grounds, var_names, val_names)
    _prune_unreachable(grounds, shared_tables)

    # Global action table: fictitious first, then sorted by (name, owner).
    global_init: dict[int, Fluent] = {}
    for agent in sorted(grounds):
        for fluent in grounds[agent].init:
            seen = global_init.get(fluent.var)
            if seen is not None and seen.value != fluent.value:
                errors.append(f"contradictory initial states: variable "
                              f"{var_names.name(fluent.var)} is both "
                              f"{val_names.name(seen.value)} and {val_names.name(fluent.value)}")
            global_init[fluent.var] = fluent
    goals: list[Fluent] = []
    for agent in sorted(grounds):
        for fluent in grounds[agent].goals:
            if fluent not in goals:
                goals.append(fluent)
    goals.sort()
    for goal in goals:
        if not any(goal.var in g.variables and goal.value in g.domains.get(goal.var, ())
                   for g in grounds.values()):
            errors.append(f"goal on {var_names.name(goal.var)} is unknown to every agent")
    if errors:
        raise MadlError(errors)

    initial = tuple(sorted(global_init.values()))
    alpha_i = Action(INITIAL_ACTION_ID, "<init>",
                     (), tuple(Assignment(f.var, f.value, f.positive) for f in initial),
                     FICTITIOUS)
    alpha_f = Action(FINAL_ACTION_ID, "<goal>", tuple(goals), (), FICTITIOUS)

    named = []
    for agent in sorted(grounds):
        for name_str, pre, eff in grounds[agent].actions:
            named.append((name_str, agent, pre, eff))
    named.sort(key=lambda item: (item[0], item[1]))
    actions = [alpha_i, alpha_f]
    for index, (name_str, agent, pre, eff) in enumerate(named, start=2):
        actions.append(Action(index, name_str, pre, eff, agent))

    global_domains = {}
    for ground in grounds.values():
        for var, values in ground.domains.items():
            global_domains.setdefault(var, set()).update(values)

    views = {}
    for agent in sorted(grounds):
        ground = grounds[agent]
        agent_actions = tuple(a for a in actions if a.owner == agent)
        shared = {other: dict(shared_tables.get((agent, other), {}))
                  for other in sorted(grounds) if other != agent}
        views[agent] = AgentView(
            agent=agent,
            variables=frozenset(ground.variables),
            domains={v: frozenset(vals) for v, vals in ground.domains.items()},
            actions=agent_actions,
            initial=tuple(sorted(ground.init)),
            goals=tuple(goals),
            shared={o: {v: frozenset(vals) for v, vals in table.items()}
                    for o, table in shared.items()})

    task = MapTask(
        name=name,
        agents=tuple(sorted(grounds)),
        variable_names=var_names,
        value_names=val_names,
        domains={v: frozenset(vals) for v, vals in global_domains.items()},
        initial=initial,
        goals=tuple(goals),
        actions=tuple(actions),
        views=views)
    return task


def _bindings(op: LiftedOperator, domain: DomainModel,
              objects: dict[str, str]) -> Iterable[dict[str, str]]:
    pools = []
    for pname, ptype in op.params:
        pool = sorted(o for o, t in objects.items() if domain.is_subtype(t, ptype))
        pools.append(pool)
    for combo in itertools.product(*pools):
        yield dict(zip((p for p, _ in op.params), combo))


def _instantiate(op: LiftedOperator, binding: dict[str, str], var_id, val_names):
    def term(t: str) -> str:
        return binding.get(t, t)

    name_str = " ".join([op.name] + [binding[p] for p, _ in op.params])
    pre = []
    for lit in op.preconditions:
        fluent = Fluent(var_id(lit.function, tuple(term(a) for a in lit.args)),
                        val_names.intern(term(lit.value)), lit.positive)
        if fluent not in pre:
            pre.append(fluent)
    eff = []
    assigned: dict[int, int] = {}
    for lit in op.effects:
        var = var_id(lit.function, tuple(term(a) for a in lit.args))
        value = val_names.intern(term(lit.value))
        if lit.assign:
            if assigned.get(var, value) != value:
                return None    # same grounding assigns two values: impossible action
            assigned[var] = value
            entry = Assignment(var, value, True)
        else:
            entry = Assignment(var, value, False)
        if entry not in eff:
            eff.append(entry)
    return name_str, tuple(pre), tuple(eff)


def _is_identity(pre: tuple[Fluent, ...], eff: tuple[Assignment, ...]) -> bool:
    """Actions whose every effect restates one of their own preconditions."""
    if not eff:
        return True
    pre_set = {(f.var, f.value) for f in pre if f.positive}
    return all(e.assign and (e.var, e.value) in pre_set for e in eff)


def _shared_tables(grounds: dict[str, _AgentGround], var_names: SymbolTable,
                   val_names: SymbolTable) -> dict[tuple[str, str], dict[int, frozenset[int]]]:
    """Pairwise shared variable/value sets from the :shared-data declarations.

    A variable is shared between i and j when either side declares a covering
    template for the other; shared values are the intersection of both
    agents' known values, filtered by the declared value type.
    """
    tables: dict[tuple[str, str], dict[int, frozenset[int]]] = {}

    def covered(decl: SharedDataDecl, ground: _AgentGround, var: int) -> bool:
        name = var_names.name(var)
        function = name.split("(")[0]
        if function != decl.function:
            return False
        args = name[len(function) + 1:-1].split(",") if "(" in name else []
        objects = dict(ground.domain.constants)
        objects.update(ground.problem.objects)
        if len(args) != len(decl.param_types):
            return False
        return all(ground.domain.is_subtype(objects.get(a, "object"), t)
                   for a, t in zip(args, decl.param_types))

    def value_filter(decl: SharedDataDecl, ground: _AgentGround, value: int) -> bool:
        name = val_names.name(value)
        objects = dict(ground.domain.constants)
        objects.update(ground.problem.objects)
        vtype = objects.get(name)
        return vtype is not None and ground.domain.is_subtype(vtype, decl.value_type)

    agents = sorted(grounds)
    for i in agents:
        for j in agents:
            if i == j:
                continue
            table: dict[int, frozenset[int]] = {}
            for var in grounds[i].variables & grounds[j].variables:
                decls = [(grounds[i], d) for d in grounds[i].problem.shared
                         if j in d.receivers and covered(d, grounds[i], var)]
                decls += [(grounds[j], d) for d in grounds[j].problem.shared
                          if i in d.receivers and covered(d, grounds[j], var)]
                if not decls:
                    continue
                common = grounds[i].domains.get(var, set()) & grounds[j].domains.get(var, set())
                values = {v for v in common
                          if any(value_filter(d, g, v) for g, d in decls)}
                table[var] = frozenset(values)
            tables[(i, j)] = table
    return tables


def _prune_unreachable(grounds: dict[str, _AgentGround],
                       shared_tables: dict[tuple[str, str], dict[int, frozenset[int]]]):
    """Drop actions whose positive preconditions can never be produced.

    Least fixpoint over all agents jointly: reachable values start from the
    initial states; an action fires once all its positive preconditions are
    reachable in its owner's frame, extending its owner's reachable values
    and, within the shared sets, its peers'.  Negative preconditions are
    treated as free.  Mutually supporting cycles with no base case die.
    """
    reach: dict[str, dict[int, set[int]]] = {agent: {} for agent in grounds}
    for agent, ground in grounds.items():
        for fluent in ground.init:
            if fluent.positive:
                reach[agent].setdefault(fluent.var, set()).add(fluent.value)

    fired: dict[str, list[bool]] = {a: [False] * len(g.actions)
                                    for a, g in grounds.items()}
    changed = True
    while changed:
        changed = False
        for agent, ground in grounds.items():
            mine = reach[agent]
            for ix, (name, pre, eff) in enumerate(ground.actions):
                if fired[agent][ix]:
                    continue
                if any(f.positive and f.value not in mine.get(f.var, ())
                       for f in pre):
                    continue
                fired[agent][ix] = True
                changed = True
                for e in eff:
                    if not e.assign:
                        continue
                    mine.setdefault(e.var, set()).add(e.value)
                    for other in grounds:
                        if other == agent:
                            continue
                        table = shared_tables.get((other, agent), {})
                        if e.value in table.get(e.var, frozenset()):
                            reach[other].setdefault(e.var, set()).add(e.value)

    for agent, ground in grounds.items():
        ground.actions = [a for ix, a in enumerate(ground.actions) if fired[agent][ix]]
