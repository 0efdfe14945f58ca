"""Task model: state variables, fluents, actions, states, and agent views.

States map each variable either to a committed value, to a set of excluded
values, or to nothing (unknown).  A committed value implies the exclusion of
every other value in the variable's universe, so contradictory states cannot
be represented at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

# Reserved value id for the undefined value.  It exists for every variable
# and is distinct from every declared value.
UNDEFINED = 0
UNDEFINED_NAME = "⊥"

# Owner tag of the fictitious initial/final actions; never a real agent id.
FICTITIOUS = "<fictitious>"

INITIAL_ACTION_ID = 0
FINAL_ACTION_ID = 1


class ModelError(Exception):
    """Raised on malformed model data (a grounding bug, not a planning failure)."""


class SymbolTable:
    """Bijective interning of display names to dense integer ids."""

    def __init__(self, reserved: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in reserved:
            self.intern(name)

    def intern(self, name: str) -> int:
        ix = self._index.get(name)
        if ix is None:
            ix = len(self._names)
            self._names.append(name)
            self._index[name] = ix
        return ix

    def name(self, ix: int) -> str:
        try:
            return self._names[ix]
        except IndexError:
            raise ModelError(f"unknown symbol index {ix}") from None

    def lookup(self, name: str) -> int | None:
        return self._index.get(name)

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._index


@dataclass(frozen=True, order=True)
class Fluent:
    """An assertion that a variable takes (positive) or avoids (negative) a value."""

    var: int
    value: int
    positive: bool = True

    def negate(self) -> "Fluent":
        return Fluent(self.var, self.value, not self.positive)

    def render(self, task: "MapTask") -> str:
        sign = "" if self.positive else "¬"
        return f"<{task.variable_name(self.var)},{sign}{task.value_name(self.value)}>"


@dataclass(frozen=True, order=True)
class Assignment:
    """An effect literal: assign commits (v = d), negate records (v != d)."""

    var: int
    value: int
    assign: bool = True

    def contradicts(self, other: "Assignment") -> bool:
        """True when the two effects cannot hold of one state simultaneously."""
        if self.var != other.var:
            return False
        if self.assign and other.assign:
            return self.value != other.value
        if self.assign != other.assign:
            return self.value == other.value
        return False


@dataclass(frozen=True)
class Action:
    """A grounded action: preconditions, effects, and the owning agent."""

    index: int
    name: str
    pre: tuple[Fluent, ...]
    eff: tuple[Assignment, ...]
    owner: str

    def __post_init__(self):
        assigned = [e.var for e in self.eff if e.assign]
        if len(assigned) != len(set(assigned)):
            raise ModelError(f"action {self.name!r} assigns a variable twice")

    def is_fictitious(self) -> bool:
        return self.owner == FICTITIOUS

    def assigned_value(self, var: int) -> int | None:
        for e in self.eff:
            if e.assign and e.var == var:
                return e.value
        return None

    def __repr__(self):
        return f"Action({self.index}, {self.name!r}, owner={self.owner!r})"


class State:
    """Immutable per-variable record of committed values and exclusions.

    ``domains`` is the variable universe the state lives in (an agent view's
    domains or the global ones), including neither more nor less than the
    values exclusions expand over.  The undefined value is always part of
    every variable's universe.
    """

    __slots__ = ("domains", "_committed", "_excluded")

    def __init__(self, domains: Mapping[int, frozenset[int]],
                 committed: Mapping[int, int] | None = None,
                 excluded: Mapping[int, frozenset[int]] | None = None):
        self.domains = domains
        self._committed = dict(committed or {})
        self._excluded = dict(excluded or {})
        for var, value in self._committed.items():
            if var in self._excluded:
                raise ModelError(f"variable {var} both committed and tracked excluded")
            self._check(var, value)

    def _check(self, var: int, value: int):
        if var not in self.domains:
            raise ModelError(f"variable {var} outside the state universe")
        if value != UNDEFINED and value not in self.domains[var]:
            raise ModelError(f"value {value} outside the domain of variable {var}")

    def universe(self, var: int) -> frozenset[int]:
        return self.domains[var] | {UNDEFINED}

    def committed(self, var: int) -> int | None:
        return self._committed.get(var)

    def excluded(self, var: int) -> frozenset[int]:
        value = self._committed.get(var)
        if value is not None:
            return frozenset(self.universe(var) - {value})
        return self._excluded.get(var, frozenset())

    def is_unknown(self, var: int) -> bool:
        return var not in self._committed and var not in self._excluded

    def entails(self, fluent: Fluent) -> bool:
        if fluent.positive:
            return self._committed.get(fluent.var) == fluent.value
        return fluent.value in self.excluded(fluent.var)

    def variables(self) -> frozenset[int]:
        return frozenset(self._committed) | frozenset(self._excluded)

    def apply(self, effects: Iterable[Assignment]) -> "State":
        """Apply effects, negations first, and return the successor state."""
        committed = dict(self._committed)
        excluded = {v: set(s) for v, s in self._excluded.items()}

        def demote(var: int):
            # Committed value becomes an explicit exclusion record of all others.
            value = committed.pop(var)
            excluded[var] = set(self.universe(var)) - {value}

        ordered = sorted(effects, key=lambda e: (e.assign, e.var, e.value))
        for eff in ordered:
            self._check(eff.var, eff.value)
            if eff.assign:
                committed[eff.var] = eff.value
                excluded.pop(eff.var, None)
            else:
                if committed.get(eff.var) == eff.value:
                    demote(eff.var)
                    excluded[eff.var].add(eff.value)
                elif eff.var not in committed:
                    excluded.setdefault(eff.var, set()).add(eff.value)
                # Committed to a different value: the exclusion is already implied.
        return State(self.domains, committed,
                     {v: frozenset(s) for v, s in excluded.items()})

    def fluents(self) -> frozenset[Fluent]:
        """Full fluent-set rendering (positive plus all negative fluents)."""
        out = set()
        for var, value in self._committed.items():
            out.add(Fluent(var, value, True))
            for other in self.universe(var) - {value}:
                out.add(Fluent(var, other, False))
        for var, values in self._excluded.items():
            for value in values:
                out.add(Fluent(var, value, False))
        return frozenset(out)

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return (self._committed == other._committed
                and {v: s for v, s in self._excluded.items() if s}
                == {v: s for v, s in other._excluded.items() if s})

    def __repr__(self):
        parts = [f"{v}={d}" for v, d in sorted(self._committed.items())]
        parts += [f"{v}!={sorted(s)}" for v, s in sorted(self._excluded.items()) if s]
        return f"State({', '.join(parts)})"


def apply_effects(state: State, action: Action) -> State:
    """Execute an action's effects on a state (value semantics)."""
    return state.apply(action.eff)


@dataclass(frozen=True)
class AgentView:
    """An agent's restricted window on the task.

    ``shared`` maps each other agent id to the variable/value sets public to
    the pair; a variable absent from the inner mapping is private w.r.t. that
    agent.  Shared sets are symmetric between the two agents by construction.
    """

    agent: str
    variables: frozenset[int]
    domains: Mapping[int, frozenset[int]]
    actions: tuple[Action, ...]
    initial: tuple[Fluent, ...]
    goals: tuple[Fluent, ...]
    shared: Mapping[str, Mapping[int, frozenset[int]]]

    def shared_variables(self, other: str) -> frozenset[int]:
        if other == self.agent:
            return self.variables
        table = self.shared.get(other)
        if table is None:
            raise ModelError(f"agent {self.agent!r} has no sharing entry for {other!r}")
        return frozenset(table)

    def initial_state(self) -> State:
        state = State(self.domains)
        return state.apply(Assignment(f.var, f.value, f.positive) for f in self.initial)


def shared_domain(view: AgentView, other: str, var: int) -> frozenset[int]:
    """Values of ``var`` public to ``view.agent`` and ``other`` (D_v^ij)."""
    if var not in view.variables:
        raise ModelError(f"variable {var} unknown to agent {view.agent!r}")
    if other == view.agent:
        return view.domains[var]
    table = view.shared.get(other)
    if table is None:
        raise ModelError(f"unknown agent id {other!r}")
    return table.get(var, frozenset())


@dataclass(frozen=True)
class MapTask:
    """The global task tuple plus the per-agent views derived from it."""

    name: str
    agents: tuple[str, ...]
    variable_names: SymbolTable
    value_names: SymbolTable
    domains: Mapping[int, frozenset[int]]
    initial: tuple[Fluent, ...]
    goals: tuple[Fluent, ...]
    actions: tuple[Action, ...]
    views: Mapping[str, AgentView]

    @property
    def initial_action(self) -> Action:
        return self.actions[INITIAL_ACTION_ID]

    @property
    def final_action(self) -> Action:
        return self.actions[FINAL_ACTION_ID]

    def variable_name(self, var: int) -> str:
        return self.variable_names.name(var)

    def value_name(self, value: int) -> str:
        return self.value_names.name(value)

    def action_by_index(self, index: int) -> Action:
        action = self.actions[index]
        if action.index != index:
            raise ModelError(f"action table out of order at {index}")
        return action

    def initial_state(self) -> State:
        state = State(self.domains)
        return state.apply(Assignment(f.var, f.value, f.positive) for f in self.initial)


def mutually_consistent(a: Action, b: Action, view_a: AgentView, view_b: AgentView) -> bool:
    """Whether two non-sequential actions of two agents can coexist.

    Returns False exactly when one of the three pairwise clash conditions
    holds over the agents' shared variables and values: an effect against a
    precondition, two effects, or two preconditions.
    """
    return not (_effect_pre_clash(a, b, view_a, view_b)
                or _effect_pre_clash(b, a, view_b, view_a)
                or _effect_eff_clash(a, b, view_a, view_b)
                or _effect_eff_clash(b, a, view_b, view_a)
                or _pre_pre_clash(a, b, view_a, view_b)
                or _pre_pre_clash(b, a, view_b, view_a))


def _pair_sets(view_i: AgentView, view_j: AgentView, var: int) -> tuple[frozenset[int], frozenset[int]]:
    shared = view_i.shared.get(view_j.agent, {}).get(var, frozenset())
    return shared, view_j.domains.get(var, frozenset())


def _effect_pre_clash(a, b, view_a, view_b) -> bool:
    for eff in a.eff:
        if not eff.assign:
            continue
        shared, d_j = _pair_sets(view_a, view_b, eff.var)
        if eff.value not in shared:
            continue
        for pre in b.pre:
            if pre.var != eff.var:
                continue
            if pre.positive and pre.value in d_j and pre.value != eff.value:
                return True
            if not pre.positive and pre.value == eff.value:
                return True
    return False


def _effect_eff_clash(a, b, view_a, view_b) -> bool:
    for eff in a.eff:
        if not eff.assign:
            continue
        shared, d_j = _pair_sets(view_a, view_b, eff.var)
        if eff.value not in shared:
            continue
        for other in b.eff:
            if other.var != eff.var:
                continue
            if other.assign and other.value in d_j and other.value != eff.value:
                return True
            if not other.assign and other.value == eff.value:
                return True
    return False


def _pre_pre_clash(a, b, view_a, view_b) -> bool:
    for pre_a in a.pre:
        if not pre_a.positive:
            continue
        shared, d_j = _pair_sets(view_a, view_b, pre_a.var)
        if pre_a.value not in shared:
            continue
        for pre_b in b.pre:
            if pre_b.var != pre_a.var:
                continue
            if pre_b.positive and pre_b.value in d_j and pre_b.value != pre_a.value:
                return True
            if not pre_b.positive and pre_b.value == pre_a.value:
                return True
    return False


def validate_task(task: MapTask) -> list[str]:
    """Diagnostics for every violated task or view invariant; empty when sound."""
    issues: list[str] = []

    committed: dict[int, tuple[int, str]] = {}
    for agent in task.agents:
        for fluent in task.views[agent].initial:
            if not fluent.positive:
                continue
            seen = committed.get(fluent.var)
            if seen is not None and seen[0] != fluent.value:
                issues.append(
                    f"contradictory initial fragments on {task.variable_name(fluent.var)}: "
                    f"{seen[1]} commits {task.value_name(seen[0])}, "
                    f"{agent} commits {task.value_name(fluent.value)}")
            else:
                committed[fluent.var] = (fluent.value, agent)

    for goal in task.goals:
        holders = [a for a in task.agents
                   if goal.var in task.views[a].variables
                   and goal.value in task.views[a].domains.get(goal.var, frozenset())]
        if not holders:
            issues.append(
                f"goal {goal.render(task)} names a variable or value outside every agent view")

    init = task.initial_action
    if init.pre or init.owner != FICTITIOUS:
        issues.append("malformed initial action: must be fictitious with no preconditions")
    if set(init.eff) != {Assignment(f.var, f.value, f.positive) for f in task.initial}:
        issues.append("initial action effects do not encode the initial state")
    final = task.final_action
    if final.eff or final.owner != FICTITIOUS:
        issues.append("malformed final action: must be fictitious with no effects")
    if set(final.pre) != set(task.goals):
        issues.append("final action preconditions do not encode the goals")

    for agent in task.agents:
        view = task.views[agent]
        mentioned: set[tuple[int, int]] = set()
        for action in view.actions:
            for f in action.pre:
                mentioned.add((f.var, f.value))
            for e in action.eff:
                mentioned.add((e.var, e.value))
        for f in view.initial:
            mentioned.add((f.var, f.value))
        for var, value in mentioned:
            if var not in view.variables:
                issues.append(f"agent {agent}: variable {task.variable_name(var)} "
                              f"used but not in its view")
            elif value != UNDEFINED and value not in view.domains[var]:
                issues.append(f"agent {agent}: value {task.value_name(value)} "
                              f"used outside its domain of {task.variable_name(var)}")
        for other, table in view.shared.items():
            peer = task.views.get(other)
            if peer is None:
                issues.append(f"agent {agent}: sharing entry for unknown agent {other}")
                continue
            peer_table = peer.shared.get(agent, {})
            if {v: s for v, s in table.items()} != {v: s for v, s in peer_table.items()}:
                issues.append(f"asymmetric sharing between {agent} and {other}")

    return issues
