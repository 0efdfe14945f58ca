"""Domain transition graphs and the relaxed-plan heuristic over frontier states.

Each agent builds one DTG per variable it knows.  Concrete edges come from its
own actions; edges contributed by peers arrive once, at startup, as privacy
projected transitions whose endpoints outside the pair's shared values
collapse to the undefined value and whose conditions are filtered by the same
rules as plan projections.  Those edges carry the contributing agents as
labels, and their true length is resolved lazily by asking a labeled agent
for its path cost, which gets memoized because the graphs never change.

The heuristic walks the classic three stages per open goal: pick the goal
needing the most transitions, find its cheapest transition path, then charge
an inducing action per transition, pushing that action's unsupported
preconditions as new open goals.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .model import UNDEFINED, Action, AgentView, Fluent, ModelError, State
from .plan import PartialPlan, frontier_state
from .privacy import project_fluent

INF = float("inf")

# remote_fn(peer, var, source, target, visited) -> cost; wired in by the runtime.
RemoteCostFn = Callable[[str, int, int, int, frozenset[str]], float]


@dataclass(frozen=True)
class DtgEdge:
    source: int
    target: int
    conditions: frozenset[Fluent]
    local_actions: frozenset[int]
    labels: frozenset[str]

    def is_local(self) -> bool:
        return bool(self.local_actions)


@dataclass
class Dtg:
    """Directed value-transition graph of one variable for one agent."""

    var: int
    nodes: frozenset[int]
    edges: dict[tuple[int, int], DtgEdge] = field(default_factory=dict)

    def add_transition(self, source: int, target: int,
                       conditions: Iterable[Fluent],
                       action_id: int | None = None,
                       label: str | None = None):
        if source == target:
            return
        key = (source, target)
        conditions = frozenset(conditions)
        existing = self.edges.get(key)
        if existing is None:
            self.edges[key] = DtgEdge(source, target, conditions,
                                      frozenset() if action_id is None else frozenset({action_id}),
                                      frozenset() if label is None else frozenset({label}))
            return
        self.edges[key] = DtgEdge(
            source, target,
            existing.conditions & conditions,
            existing.local_actions | (frozenset() if action_id is None else {action_id}),
            existing.labels | (frozenset() if label is None else {label}))

    def successors(self, node: int) -> list[int]:
        return sorted(t for (s, t) in self.edges if s == node)

    def predecessors(self, node: int) -> list[int]:
        return sorted(s for (s, t) in self.edges if t == node)


def build_dtgs(view: AgentView) -> dict[int, Dtg]:
    """One DTG per known variable, from the agent's own actions only."""
    dtgs = {var: Dtg(var, view.domains[var] | {UNDEFINED})
            for var in sorted(view.variables)}
    for action in view.actions:
        for eff in action.eff:
            if not eff.assign:
                continue
            dtg = dtgs[eff.var]
            conditions = frozenset(p for p in action.pre if p.var != eff.var)
            for source in _transition_sources(view, action, eff.var, dtg.nodes):
                dtg.add_transition(source, eff.value, conditions,
                                   action_id=action.index)
    return dtgs


def _transition_sources(view: AgentView, action: Action, var: int,
                        nodes: frozenset[int]) -> list[int]:
    """Origins of the transitions an effect on ``var`` induces.

    A positive precondition on the variable pins the source; negative
    preconditions exclude their values; otherwise the effect applies from
    every node, the undefined one included.
    """
    positive = [p for p in action.pre if p.var == var and p.positive]
    if positive:
        return [positive[0].value]
    banned = {p.value for p in action.pre if p.var == var and not p.positive}
    return sorted(nodes - banned)


def shared_transitions(sender: AgentView, receiver: str) -> list[tuple[int, int, int, tuple[Fluent, ...]]]:
    """The sender's transitions as the receiver may see them (startup exchange).

    Endpoints outside the pair's shared values collapse to ⊥; conditions are
    projected like any other fluent.  Transitions that collapse to a ⊥ self
    loop carry no information and are dropped.
    """
    table = sender.shared.get(receiver, {})
    out = []
    for action in sender.actions:
        for eff in action.eff:
            if not eff.assign or eff.var not in table:
                continue
            shared_values = table[eff.var]
            target = eff.value if eff.value in shared_values else UNDEFINED
            conditions = []
            for pre in action.pre:
                if pre.var == eff.var:
                    continue
                projected = project_fluent(sender, receiver, pre)
                if projected is not None:
                    conditions.append(projected)
            nodes = sender.domains[eff.var] | {UNDEFINED}
            for source in _transition_sources(sender, action, eff.var, nodes):
                src = source if source in shared_values else UNDEFINED
                if src == target:
                    continue
                out.append((eff.var, src, target, tuple(sorted(conditions))))
    return sorted(set(out))


def merge_shared_transitions(dtgs: Mapping[int, Dtg], sender: str,
                             transitions: Iterable[tuple[int, int, int, tuple[Fluent, ...]]]):
    for var, src, dst, conditions in transitions:
        dtg = dtgs.get(var)
        if dtg is None:
            continue
        dtg.add_transition(src, dst, conditions, label=sender)


def dtg_path(dtg: Dtg, source: int, target: int) -> tuple[float, list[int]]:
    """Unit-weight shortest path; ties resolved to the smallest node sequence."""
    for node in (source, target):
        if node not in dtg.nodes and node != UNDEFINED:
            raise ModelError(f"value {node} is not a node of the DTG of {dtg.var}")
    if source == target:
        return 0, []
    dist_from = _bfs(dtg, source, forward=True)
    if target not in dist_from:
        return INF, []
    dist_to = _bfs(dtg, target, forward=False)
    path = [source]
    current = source
    while current != target:
        step_options = [nxt for nxt in dtg.successors(current)
                        if dist_to.get(nxt, INF) == dist_to[current] - 1]
        current = min(step_options)
        path.append(current)
    return float(len(path) - 1), path


def _bfs(dtg: Dtg, start: int, forward: bool) -> dict[int, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        neighbours = dtg.successors(node) if forward else dtg.predecessors(node)
        for nxt in neighbours:
            if nxt not in dist:
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
    return dist


class PathCache:
    """Memo of path costs; entries are final because DTGs never change."""

    def __init__(self):
        self._store: dict[tuple, float] = {}
        self.hits = 0

    def get(self, key: tuple) -> float | None:
        value = self._store.get(key)
        if value is not None:
            self.hits += 1
        return value

    def put(self, key: tuple, value: float):
        self._store.setdefault(key, value)

    def __len__(self):
        return len(self._store)


@dataclass
class RelaxedPlan:
    """Bookkeeping of one heuristic evaluation."""

    actions: set[int] = field(default_factory=set)
    virtual_cost: float = 0.0
    values: dict[int, set[int]] = field(default_factory=dict)
    open_goals: list[Fluent] = field(default_factory=list)

    def total(self) -> float:
        return len(self.actions) + self.virtual_cost


class DtgHeuristic:
    """Per-agent heuristic evaluator with remote path-cost queries."""

    def __init__(self, view: AgentView, dtgs: Mapping[int, Dtg],
                 use_cache: bool = True):
        self.view = view
        self.dtgs = dtgs
        self.cache = PathCache()
        self.use_cache = use_cache
        self.remote_fn: RemoteCostFn | None = None
        self._static_memo: dict[tuple, float] = {}
        self._static_running: set[tuple] = set()
        self._actions_by_id = {a.index: a for a in view.actions}

    # ----- public entry points -------------------------------------------

    def evaluate_plan(self, plan: PartialPlan) -> float:
        fs = frontier_state(plan, self.view.domains)
        return self.evaluate_state(fs)

    def evaluate_state(self, fs: State) -> float:
        """Relaxed-plan size from a frontier state to the goals; INF on dead ends."""
        rp = RelaxedPlan()
        for var in self.view.variables:
            committed = fs.committed(var)
            rp.values[var] = {committed if committed is not None else UNDEFINED}
        visited = frozenset({self.view.agent})
        rp.open_goals = [g for g in self.view.goals if not self._satisfied(rp, g)]
        processed: set[Fluent] = set()
        while rp.open_goals:
            scored = []
            for goal in rp.open_goals:
                cost = self._goal_cost(rp, goal, visited)
                if cost == INF:
                    return INF
                scored.append((-cost, goal.var, goal.value, not goal.positive, goal))
            scored.sort()
            goal = scored[0][4]
            rp.open_goals.remove(goal)
            if goal in processed:
                continue
            processed.add(goal)
            if self._satisfied(rp, goal):
                continue
            if self._charge_goal(rp, goal, visited) == INF:
                return INF
        return rp.total()

    def remote_path_cost(self, peer: str, var: int, source: int, target: int,
                         visited: frozenset[str] | None = None) -> float:
        """Ask a peer for its path cost; cached so repeats send no messages."""
        if peer not in self.view.shared:
            raise ModelError(f"unknown agent id {peer!r}")
        if var not in self.view.shared[peer]:
            return INF
        visited = (visited or frozenset({self.view.agent})) | {peer}
        key = ("remote", peer, var, source, target, visited)
        if self.use_cache:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
        if self.remote_fn is None:
            return INF
        answer = self.remote_fn(peer, var, source, target, visited)
        self.cache.put(key, answer)
        return answer

    def answer_path_cost(self, var: int, source: int, target: int,
                         visited: frozenset[str]) -> float:
        """Peer-side reply: static, support-inclusive cost of reaching ``target``.

        An undefined source is grounded in this agent's initial value for the
        variable, its honest state-independent starting point.
        """
        if var not in self.dtgs:
            return INF
        if target == UNDEFINED:
            return 1.0
        sources = {source}
        if source == UNDEFINED:
            init = self.view.initial_state().committed(var)
            sources = {init if init is not None else UNDEFINED}
        best = INF
        for src in sorted(sources):
            best = min(best, self._static_cost(var, src, target, visited))
        return best

    # ----- goal pricing ----------------------------------------------------

    def _satisfied(self, rp: RelaxedPlan, fluent: Fluent) -> bool:
        values = rp.values.setdefault(fluent.var, {UNDEFINED})
        if fluent.positive:
            return fluent.value in values
        return any(v != fluent.value for v in values)

    def _targets(self, fluent: Fluent) -> list[int]:
        dtg = self.dtgs[fluent.var]
        if fluent.positive:
            return [fluent.value]
        return sorted(dtg.nodes - {fluent.value})

    def _goal_cost(self, rp: RelaxedPlan, fluent: Fluent,
                   visited: frozenset[str]) -> float:
        if self._satisfied(rp, fluent):
            return 0.0
        if fluent.var not in self.dtgs:
            return INF
        best = INF
        for target in self._targets(fluent):
            for source in sorted(rp.values[fluent.var]):
                cost, _ = self._priced_path(fluent.var, source, target, visited)
                best = min(best, cost)
        return best

    def _priced_path(self, var: int, source: int, target: int,
                     visited: frozenset[str],
                     banned: frozenset[tuple[int, int]] = frozenset()) -> tuple[float, list[int]]:
        dtg = self.dtgs[var]
        if source == target:
            return 0.0, []
        if target not in dtg.nodes or (source not in dtg.nodes and source != UNDEFINED):
            return INF, []
        cost, path = self._restricted_path(dtg, source, target, banned)
        if not path:
            return INF, []
        total = 0.0
        for a, b in zip(path, path[1:]):
            total += self._edge_price(var, dtg.edges[(a, b)], visited)
        return total, path

    def _restricted_path(self, dtg: Dtg, source: int, target: int,
                         banned: frozenset[tuple[int, int]]) -> tuple[float, list[int]]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nxt in dtg.successors(node):
                if (node, nxt) in banned or nxt in dist:
                    continue
                dist[nxt] = dist[node] + 1
                queue.append(nxt)
        if target not in dist:
            return INF, []
        # Greedy reconstruction: smallest predecessor chain read forwards.
        path = [target]
        current = target
        while current != source:
            options = [p for p in dtg.predecessors(current)
                       if dist.get(p, INF) == dist[current] - 1
                       and (p, current) not in banned]
            current = min(options)
            path.append(current)
        path.reverse()
        return float(len(path) - 1), path

    def _edge_price(self, var: int, edge: DtgEdge, visited: frozenset[str]) -> float:
        """Unit for locally inducible edges; peers price the rest."""
        if edge.is_local():
            return 1.0
        if edge.target == UNDEFINED:
            # Leaving the visible region costs at least the peer's hiding step.
            return 1.0
        best = INF
        for peer in sorted(edge.labels):
            if peer in visited or not self._query_safe(peer, var, edge):
                continue
            answer = self.remote_path_cost(peer, var, edge.source, edge.target, visited)
            best = min(best, answer)
        return best if best != INF else 1.0

    def _query_safe(self, peer: str, var: int, edge: DtgEdge) -> bool:
        """Concrete endpoints must be shared with the peer or be goal values."""
        shared = self.view.shared.get(peer, {}).get(var, frozenset())
        goal_values = {g.value for g in self.view.goals if g.var == var}
        for endpoint in (edge.source, edge.target):
            if endpoint == UNDEFINED:
                continue
            if endpoint not in shared and endpoint not in goal_values:
                return False
        return True

    # ----- relaxed plan construction ---------------------------------------

    def _charge_goal(self, rp: RelaxedPlan, fluent: Fluent,
                     visited: frozenset[str]) -> float:
        """Insert supporting actions for one open goal along its cheapest path."""
        var = fluent.var
        best: tuple[float, int, int, list[int]] | None = None
        for target in self._targets(fluent):
            for source in sorted(rp.values[var]):
                cost, path = self._priced_path(var, source, target, visited)
                if cost == INF:
                    continue
                candidate = (cost, target, source, path)
                if best is None or candidate[:3] < best[:3]:
                    best = candidate
        if best is None:
            return INF
        _, _, _, path = best
        dtg = self.dtgs[var]
        for a, b in zip(path, path[1:]):
            edge = dtg.edges[(a, b)]
            if edge.is_local():
                action = self._select_min_action(rp, var, a, b, visited)
                if action is None:
                    return INF
                if action.index not in rp.actions:
                    rp.actions.add(action.index)
                    for pre in action.pre:
                        if not self._satisfied(rp, pre) and pre not in rp.open_goals:
                            rp.open_goals.append(pre)
                    for eff in action.eff:
                        if eff.assign:
                            rp.values.setdefault(eff.var, {UNDEFINED}).add(eff.value)
            else:
                rp.virtual_cost += self._edge_price(var, edge, visited)
                for cond in sorted(edge.conditions):
                    if not self._satisfied(rp, cond) and cond not in rp.open_goals:
                        rp.open_goals.append(cond)
                rp.values[var].add(b)
        rp.values[var].add(path[-1])
        return 0.0

    def _select_min_action(self, rp: RelaxedPlan, var: int, source: int,
                           target: int, visited: frozenset[str]) -> Action | None:
        """Minimum-cost inducer of a transition; support costs break the tie."""
        edge = self.dtgs[var].edges[(source, target)]
        best: tuple[float, int] | None = None
        for action_id in sorted(edge.local_actions):
            action = self._actions_by_id[action_id]
            if not self._induces(action, var, source, target):
                continue
            support = 0.0
            for pre in action.pre:
                if pre.var == var:
                    continue
                support += self._goal_cost(rp, pre, visited)
                if support == INF:
                    break
            if support == INF:
                continue
            if best is None or (support, action_id) < best:
                best = (support, action_id)
        if best is None:
            return None
        return self._actions_by_id[best[1]]

    def _induces(self, action: Action, var: int, source: int, target: int) -> bool:
        if action.assigned_value(var) != target:
            return False
        positive = [p for p in action.pre if p.var == var and p.positive]
        if positive:
            return positive[0].value == source
        banned = {p.value for p in action.pre if p.var == var and not p.positive}
        return source not in banned

    # ----- static peer-side estimates --------------------------------------

    def _static_cost(self, var: int, source: int, target: int,
                     visited: frozenset[str]) -> float:
        """Support-inclusive path cost from a fixed source, Values-independent."""
        key = (var, source, target, visited)
        if key in self._static_memo:
            return self._static_memo[key]
        if key in self._static_running:
            return 0.0
        self._static_running.add(key)
        try:
            banned: set[tuple[int, int]] = set()
            while True:
                cost, path = self._priced_path(var, source, target, visited,
                                               frozenset(banned))
                if not path and cost == INF:
                    result = INF
                    break
                total = 0.0
                dead_edge = None
                dtg = self.dtgs[var]
                for a, b in zip(path, path[1:]):
                    edge = dtg.edges[(a, b)]
                    if edge.is_local():
                        step = self._static_action_cost(edge, var, visited)
                        if step == INF:
                            dead_edge = (a, b)
                            break
                        total += step
                    else:
                        total += self._edge_price(var, edge, visited)
                if dead_edge is not None:
                    banned.add(dead_edge)
                    continue
                result = total
                break
        finally:
            self._static_running.discard(key)
        self._static_memo[key] = result
        return result

    def _static_action_cost(self, edge: DtgEdge, var: int,
                            visited: frozenset[str]) -> float:
        """1 + the cheapest inducer's precondition supports from initial values."""
        init = self.view.initial_state()
        best = INF
        for action_id in sorted(edge.local_actions):
            action = self._actions_by_id[action_id]
            support = 0.0
            for pre in action.pre:
                if pre.var == var:
                    continue
                support += self._static_support(pre, visited)
                if support == INF:
                    break
            best = min(best, support)
            if best == 0.0:
                break
        return INF if best == INF else 1.0 + best

    def _static_support(self, fluent: Fluent, visited: frozenset[str]) -> float:
        if fluent.var not in self.dtgs:
            return INF
        init = self.view.initial_state().committed(fluent.var)
        source = init if init is not None else UNDEFINED
        if fluent.positive:
            if source == fluent.value:
                return 0.0
            return self._static_cost(fluent.var, source, fluent.value, visited)
        if source != fluent.value:
            return 0.0
        best = INF
        for target in sorted(self.dtgs[fluent.var].nodes - {fluent.value}):
            best = min(best, self._static_cost(fluent.var, source, target, visited))
        return best


def dump_dtgs(dtgs: Mapping[int, Dtg],
              variable_name: Callable[[int], str],
              value_name: Callable[[int], str]) -> list[str]:
    """One line per edge: ``v: d -> d' [cond: ...] [agents: ...]``."""
    lines = []
    for var in sorted(dtgs):
        dtg = dtgs[var]
        for (src, dst) in sorted(dtg.edges):
            edge = dtg.edges[(src, dst)]
            line = f"{variable_name(var)}: {value_name(src)} -> {value_name(dst)}"
            if edge.conditions:
                rendered = " ".join(
                    f"{'' if c.positive else '!'}{variable_name(c.var)}={value_name(c.value)}"
                    for c in sorted(edge.conditions))
                line += f" [cond: {rendered}]"
            if edge.labels:
                line += f" [agents: {' '.join(sorted(edge.labels))}]"
            lines.append(line)
    return lines
