"""Independent reference implementations used to cross-check the planner.

Everything here is written from the rule statements directly, in a plain
dict-and-loop style, and stays clear of the package's search code paths so
that a bug cannot cancel itself out across both sides of a comparison.
"""

from __future__ import annotations

import itertools
from collections import deque

from fmap.model import UNDEFINED, Action, AgentView, Assignment, Fluent
from fmap.plan import CausalLink, PartialPlan, PlanStep

INF = float("inf")


# --------------------------------------------------------------------------
# Effect semantics as literal fluent-set manipulation
# --------------------------------------------------------------------------

def fluent_set_apply(fluents: frozenset[Fluent], action: Action,
                     domains) -> frozenset[Fluent]:
    """Rule-by-rule transcription of effect application over a fluent set.

    Negative effects first, then positive ones, each in (var, value) order,
    matching the documented intra-action convention.
    """
    current = set(fluents)
    ordered = sorted(action.eff, key=lambda e: (e.assign, e.var, e.value))
    for eff in ordered:
        if eff.assign:
            universe = domains[eff.var] | {UNDEFINED}
            current = {f for f in current if f.var != eff.var
                       or (f.positive and f.value == eff.value)
                       or (not f.positive and f.value != eff.value)}
            current.add(Fluent(eff.var, eff.value, True))
            for other in universe - {eff.value}:
                current.add(Fluent(eff.var, other, False))
        else:
            current.discard(Fluent(eff.var, eff.value, True))
            current.add(Fluent(eff.var, eff.value, False))
    return frozenset(current)


# --------------------------------------------------------------------------
# Mutual consistency: the three clash conditions verbatim
# --------------------------------------------------------------------------

def bullet_mutually_consistent(a: Action, b: Action,
                               view_a: AgentView, view_b: AgentView) -> bool:
    def clash(x, view_x, y, view_y, x_items, y_items):
        # x_items: (var, value) assignments or positive preconditions of x.
        # y_items interpretation: positive (var, d') or negative (var, d).
        for var, d in x_items:
            shared = view_x.shared.get(view_y.agent, {}).get(var, frozenset())
            if d not in shared:
                continue
            for var2, d2, positive in y_items:
                if var2 != var:
                    continue
                if positive and d2 in view_y.domains.get(var, frozenset()) and d2 != d:
                    return True
                if not positive and d2 == d:
                    return True
        return False

    def eff_items(action):
        return [(e.var, e.value) for e in action.eff if e.assign]

    def eff_as_targets(action):
        out = []
        for e in action.eff:
            out.append((e.var, e.value, e.assign))
        return out

    def pre_pos_items(action):
        return [(p.var, p.value) for p in action.pre if p.positive]

    def pre_as_targets(action):
        return [(p.var, p.value, p.positive) for p in action.pre]

    for x, vx, y, vy in ((a, view_a, b, view_b), (b, view_b, a, view_a)):
        if clash(x, vx, y, vy, eff_items(x), pre_as_targets(y)):
            return False
        if clash(x, vx, y, vy, eff_items(x), eff_as_targets(y)):
            return False
        if clash(x, vx, y, vy, pre_pos_items(x), pre_as_targets(y)):
            return False
    return True


# --------------------------------------------------------------------------
# Threats by exhaustive scan
# --------------------------------------------------------------------------

def transitive_pairs(plan: PartialPlan) -> set[tuple[int, int]]:
    n = len(plan.steps)
    edges = set(plan.orderings)
    edges.update((l.producer, l.consumer) for l in plan.links)
    edges.update((0, sid) for sid in range(1, n))
    closure = set(edges)
    changed = True
    while changed:
        changed = False
        for (a, b) in list(closure):
            for (c, d) in list(closure):
                if b == c and (a, d) not in closure:
                    closure.add((a, d))
                    changed = True
    return closure


def brute_force_threats(plan: PartialPlan) -> set[tuple[int, CausalLink]]:
    closure = transitive_pairs(plan)
    found = set()
    for link in plan.links:
        for step in plan.steps:
            if step.step_id in (link.producer, link.consumer):
                continue
            conflict = False
            for eff in step.action.eff:
                if eff.var != link.fluent.var:
                    continue
                if link.fluent.positive:
                    if eff.assign and eff.value != link.fluent.value:
                        conflict = True
                    if not eff.assign and eff.value == link.fluent.value:
                        conflict = True
                else:
                    if eff.assign and eff.value == link.fluent.value:
                        conflict = True
            if not conflict:
                continue
            if (step.step_id, link.producer) in closure:
                continue
            if (link.consumer, step.step_id) in closure:
                continue
            found.add((step.step_id, link))
    return found


def brute_force_interference(plan: PartialPlan) -> set[tuple[int, int, int]]:
    closure = transitive_pairs(plan)
    found = set()
    for a, b in itertools.combinations(plan.steps, 2):
        if (a.step_id, b.step_id) in closure or (b.step_id, a.step_id) in closure:
            continue
        for ea in a.action.eff:
            for eb in b.action.eff:
                if ea.var != eb.var:
                    continue
                bad = (ea.assign and eb.assign and ea.value != eb.value) \
                    or (ea.assign != eb.assign and ea.value == eb.value)
                if bad:
                    found.add((a.step_id, b.step_id, ea.var))
    return found


# --------------------------------------------------------------------------
# Frontier state by the reachability definition
# --------------------------------------------------------------------------

def reachability_frontier(plan: PartialPlan) -> dict[int, int]:
    """Committed values: fluents achieved by steps no writer can follow."""
    closure = transitive_pairs(plan)
    committed = {}
    for step in plan.steps:
        for eff in step.action.eff:
            if not eff.assign:
                continue
            clobbered = False
            for other in plan.steps:
                if other.step_id == step.step_id:
                    continue
                writes = any(e.var == eff.var and (not e.assign or e.value != eff.value)
                             for e in other.action.eff)
                if writes and (step.step_id, other.step_id) in closure:
                    clobbered = True
                    break
            if not clobbered:
                committed[eff.var] = eff.value
    return committed


def all_linearizations(plan: PartialPlan):
    n = len(plan.steps)
    closure = transitive_pairs(plan)
    succ = {i: {b for (a, b) in closure if a == i} for i in range(n)}

    def extend(order, remaining):
        if not remaining:
            yield list(order)
            return
        for sid in sorted(remaining):
            if all(sid not in succ[other] for other in remaining if other != sid):
                yield from extend(order + [sid], remaining - {sid})

    yield from extend([], set(range(n)))


# --------------------------------------------------------------------------
# FLEX refinements by brute force
# --------------------------------------------------------------------------

def _produces(action: Action, pre: Fluent) -> bool:
    for eff in action.eff:
        if eff.var != pre.var:
            continue
        if pre.positive:
            if eff.assign and eff.value == pre.value:
                return True
        else:
            if eff.assign and eff.value != pre.value:
                return True
            if not eff.assign and eff.value == pre.value:
                return True
    return False


def _powerset(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def brute_force_refinements(view: AgentView, base: PartialPlan) -> dict[tuple, PartialPlan]:
    """Every flaw-free single-action extension, by exhaustive enumeration.

    Branches over all producer combinations per precondition and over all
    subsets of candidate promotion/demotion/interference orderings, keeping
    acyclic plans with zero threats, zero interference, and full support.
    """
    results: dict[tuple, PartialPlan] = {}
    new_id = len(base.steps)
    for action in view.actions:
        producer_choices = []
        supportable = True
        for pre in action.pre:
            producers = [s.step_id for s in base.steps if _produces(s.action, pre)]
            if not producers:
                supportable = False
                break
            producer_choices.append([(pre, p) for p in producers])
        if not supportable:
            continue
        for combo in itertools.product(*producer_choices):
            links = frozenset(CausalLink(p, new_id, pre) for pre, p in combo)
            try:
                plan0 = base.extend(PlanStep(new_id, action), links)
            except Exception:
                continue
            candidates = set()
            for link in plan0.links:
                for step in plan0.steps:
                    if step.step_id in (link.producer, link.consumer):
                        continue
                    conflict = any(
                        e.var == link.fluent.var
                        and ((link.fluent.positive and
                              (e.assign and e.value != link.fluent.value
                               or not e.assign and e.value == link.fluent.value))
                             or (not link.fluent.positive and e.assign
                                 and e.value == link.fluent.value))
                        for e in step.action.eff)
                    if conflict:
                        candidates.add((link.consumer, step.step_id))
                        candidates.add((step.step_id, link.producer))
            for a, b in itertools.combinations(plan0.steps, 2):
                contradicts = any(
                    ea.var == eb.var
                    and (ea.assign and eb.assign and ea.value != eb.value
                         or ea.assign != eb.assign and ea.value == eb.value)
                    for ea in a.action.eff for eb in b.action.eff)
                if contradicts:
                    candidates.add((a.step_id, b.step_id))
                    candidates.add((b.step_id, a.step_id))
            candidates = sorted(candidates)
            assert len(candidates) <= 18, "oracle blow-up; shrink the random task"
            for subset in _powerset(candidates):
                plan = PartialPlan(plan0.steps,
                                   plan0.orderings | frozenset(subset),
                                   plan0.links)
                if not plan.is_acyclic():
                    continue
                if brute_force_threats(plan):
                    continue
                if brute_force_interference(plan):
                    continue
                results[plan.structure_key] = plan
    return results


# --------------------------------------------------------------------------
# Centralized relaxed-plan heuristic (single-agent view, no remote parts)
# --------------------------------------------------------------------------

def _oracle_edges(view: AgentView):
    """var -> {(src, dst) -> [action, ...]} following the documented rules."""
    edges: dict[int, dict[tuple[int, int], list[Action]]] = {
        var: {} for var in view.variables}
    for action in view.actions:
        for eff in action.eff:
            if not eff.assign:
                continue
            nodes = view.domains[eff.var] | {UNDEFINED}
            positive = [p for p in action.pre if p.var == eff.var and p.positive]
            if positive:
                sources = [positive[0].value]
            else:
                banned = {p.value for p in action.pre
                          if p.var == eff.var and not p.positive}
                sources = sorted(nodes - banned)
            for src in sources:
                if src == eff.value:
                    continue
                edges[eff.var].setdefault((src, eff.value), []).append(action)
    return edges


def centralized_h(view: AgentView, plan: PartialPlan) -> float:
    """Stand-alone relaxed-plan evaluation for full-knowledge tasks."""
    from fmap.plan import frontier_state

    edges = _oracle_edges(view)
    fs = frontier_state(plan, view.domains)
    values = {}
    for var in view.variables:
        committed = fs.committed(var)
        values[var] = {committed if committed is not None else UNDEFINED}

    def satisfied(fluent: Fluent) -> bool:
        if fluent.positive:
            return fluent.value in values[fluent.var]
        return any(v != fluent.value for v in values[fluent.var])

    def shortest(var, source, target, banned):
        if source == target:
            return 0, []
        adjacency = {}
        for (s, d) in edges[var]:
            if (s, d) not in banned:
                adjacency.setdefault(s, []).append(d)
        dist = {source: 0}
        queue = deque([source])
        while queue:
            node = queue.popleft()
            for nxt in sorted(adjacency.get(node, [])):
                if nxt not in dist:
                    dist[nxt] = dist[node] + 1
                    queue.append(nxt)
        if target not in dist:
            return INF, []
        path = [target]
        while path[-1] != source:
            options = [s for (s, d) in edges[var]
                       if d == path[-1] and (s, d) not in banned
                       and dist.get(s, INF) == dist[path[-1]] - 1]
            path.append(min(options))
        path.reverse()
        return len(path) - 1, path

    def targets(fluent):
        if fluent.positive:
            return [fluent.value]
        return sorted((view.domains[fluent.var] | {UNDEFINED}) - {fluent.value})

    def goal_cost(fluent):
        if satisfied(fluent):
            return 0
        best = INF
        for target in targets(fluent):
            for source in sorted(values[fluent.var]):
                cost, _ = shortest(fluent.var, source, target, frozenset())
                best = min(best, cost)
        return best

    actions: set[int] = set()
    open_goals = [g for g in view.goals if not satisfied(g)]
    processed = set()
    while open_goals:
        scored = sorted(((-goal_cost(g), g.var, g.value, not g.positive, g)
                         for g in open_goals))
        if scored and scored[0][0] == -INF:
            return INF
        goal = scored[0][4]
        open_goals.remove(goal)
        if goal in processed:
            continue
        processed.add(goal)
        if satisfied(goal):
            continue
        best = None
        for target in targets(goal):
            for source in sorted(values[goal.var]):
                cost, path = shortest(goal.var, source, target, frozenset())
                if cost == INF:
                    continue
                key = (cost, target, source)
                if best is None or key < best[0]:
                    best = (key, path)
        if best is None:
            return INF
        _, path = best
        var = goal.var
        for a, b in zip(path, path[1:]):
            choices = []
            for action in edges[var][(a, b)]:
                support = 0
                dead = False
                for pre in action.pre:
                    if pre.var == var:
                        continue
                    cost = goal_cost(pre)
                    if cost == INF:
                        dead = True
                        break
                    support += cost
                if not dead:
                    choices.append((support, action.index, action))
            if not choices:
                return INF
            choices.sort(key=lambda c: (c[0], c[1]))
            action = choices[0][2]
            if action.index not in actions:
                actions.add(action.index)
                for pre in action.pre:
                    if not satisfied(pre) and pre not in open_goals:
                        open_goals.append(pre)
                for eff in action.eff:
                    if eff.assign:
                        values.setdefault(eff.var, {UNDEFINED}).add(eff.value)
            values[var].add(b)
    return float(len(actions))


# --------------------------------------------------------------------------
# Ground-truth solvability by forward state search on the merged task
# --------------------------------------------------------------------------

def state_space_solvable(view: AgentView, max_states: int = 200_000) -> bool:
    from fmap.model import State

    start = State(view.domains)
    start = start.apply(Assignment(f.var, f.value, f.positive) for f in view.initial)

    def key(state):
        return (tuple(sorted((v, state.committed(v)) for v in view.variables
                             if state.committed(v) is not None)),
                tuple(sorted((v, tuple(sorted(state.excluded(v))))
                             for v in view.variables
                             if state.committed(v) is None and state.excluded(v))))

    def applicable(state, action):
        return all(state.entails(p) for p in action.pre)

    seen = {key(start)}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if all(state.entails(g) for g in view.goals):
            return True
        for action in view.actions:
            if not applicable(state, action):
                continue
            nxt = state.apply(action.eff)
            k = key(nxt)
            if k not in seen:
                if len(seen) >= max_states:
                    raise RuntimeError("state space too large for the oracle")
                seen.add(k)
                queue.append(nxt)
    return False


def merged_view(task) -> AgentView:
    """Single 'central' agent seeing the whole task; no sharing, no privacy."""
    actions = tuple(a for a in task.actions if not a.is_fictitious())
    return AgentView(agent="central",
                     variables=frozenset(task.domains),
                     domains=dict(task.domains),
                     actions=actions,
                     initial=task.initial,
                     goals=task.goals,
                     shared={})
