"""Forward-chaining partial-order refinement generation.

For each candidate action the search exhaustively enumerates every way of
supporting its preconditions with causal links from existing steps plus every
way of resolving the flaws that arise, collecting all flaw-free single-action
extensions of the base plan.  Candidates may sit anywhere in the plan, not
just after the frontier state.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .model import Action, AgentView, Fluent
from .plan import (
    CausalLink,
    Interference,
    PartialPlan,
    PlanStep,
    Threat,
    detect_interference,
    detect_threats,
    produces,
    resolve_interference,
    resolve_threat,
)


@dataclass(frozen=True)
class Refinement:
    """One flaw-free extension of a base plan by a single new step."""

    plan: PartialPlan
    is_solution: bool = False


@dataclass
class RefinementSet:
    """All refinements an agent generated over one base plan."""

    base_key: str
    refinements: list[Refinement] = field(default_factory=list)

    def plans(self) -> list[PartialPlan]:
        return [r.plan for r in self.refinements]


def potentially_supportable(action: Action, plan: PartialPlan) -> bool:
    """Cheap estimate: every precondition has some matching effect in the plan.

    No threat analysis; the per-candidate search does the exact work.
    """
    for pre in action.pre:
        if not any(produces(step.action, pre) for step in plan.steps):
            return False
    return True


def candidate_actions(view: AgentView, plan: PartialPlan) -> list[Action]:
    """Actions of the agent that look supportable, repeats included."""
    return [a for a in view.actions if potentially_supportable(a, plan)]


def _new_flaws(plan: PartialPlan, new_step_id: int,
               new_links: frozenset[CausalLink]) -> list:
    """Flaws introduced by the new structure, threats and interference only."""
    threats = detect_threats(plan, links=new_links)
    threats |= detect_threats(plan, step_ids=[new_step_id])
    interference = detect_interference(plan, step_ids=[new_step_id])
    return sorted(threats) + sorted(interference)


def _support_choices(plan: PartialPlan, new_step_id: int, pre: Fluent) -> list[CausalLink]:
    producers = [s.step_id for s in plan.steps
                 if s.step_id != new_step_id and produces(s.action, pre)]
    return [CausalLink(p, new_step_id, pre) for p in sorted(producers)]


def _expand_action(base: PartialPlan, action: Action) -> list[PartialPlan]:
    """Exhaustive POP search inserting one action into the base plan.

    Flaw order: threats and interference first, then the open precondition
    with the fewest producers (fail-first).  The order changes the tree, not
    the leaf set, since structural identity collapses redundant orderings.
    """
    new_id = len(base.steps)
    start = base.extend(PlanStep(new_id, action))
    leaves: dict[tuple, PartialPlan] = {}
    stack = [start]
    while stack:
        node = stack.pop()
        base_links = frozenset(l for l in node.links if l.consumer == new_id)
        conflicts = _new_flaws(node, new_id, base_links)
        if conflicts:
            flaw = conflicts[0]
            if isinstance(flaw, Threat):
                stack.extend(resolve_threat(node, flaw))
            else:
                stack.extend(resolve_interference(node, flaw))
            continue
        open_pres = node.open_preconditions(new_id)
        if not open_pres:
            leaves[node.structure_key] = node
            continue
        ranked = sorted(open_pres,
                        key=lambda p: (len(_support_choices(node, new_id, p)),
                                       p.var, p.value, not p.positive))
        pre = ranked[0]
        for link in _support_choices(node, new_id, pre):
            if node.would_be_acyclic((link.producer, link.consumer)):
                stack.append(node.with_link(link))
    return [leaves[k] for k in sorted(leaves)]


def refine(view: AgentView, base: PartialPlan,
           parallelism: int = 1) -> RefinementSet:
    """Every flaw-free single-action extension of the base plan from this agent.

    Per-candidate searches are independent; with parallelism > 1 they run on
    a worker pool and merge in candidate order, so results are unchanged.
    """
    candidates = sorted(candidate_actions(view, base), key=lambda a: a.index)
    if parallelism > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            expansions = list(pool.map(lambda a: _expand_action(base, a), candidates))
    else:
        expansions = [_expand_action(base, a) for a in candidates]

    result = RefinementSet(base.structure_digest)
    seen: set[tuple] = set()
    for plans in expansions:
        for plan in plans:
            if plan.structure_key in seen:
                continue
            seen.add(plan.structure_key)
            result.refinements.append(Refinement(plan))
    return result


def try_solution(view: AgentView, base: PartialPlan,
                 final_action: Action) -> RefinementSet:
    """All flaw-free plans closing the goals of the final action over the base.

    The final step is ordered after every existing step, so no later step can
    undo a goal: threats against goal links then only resolve by demotion.
    """
    result = RefinementSet(base.structure_digest)
    if not potentially_supportable(final_action, base):
        return result
    new_id = len(base.steps)
    closing = tuple((sid, new_id) for sid in range(new_id))
    start = base.extend(PlanStep(new_id, final_action), new_orderings=closing)
    stack = [start]
    seen: set[tuple] = set()
    while stack:
        node = stack.pop()
        goal_links = frozenset(l for l in node.links if l.consumer == new_id)
        conflicts = _new_flaws(node, new_id, goal_links)
        if conflicts:
            flaw = conflicts[0]
            if isinstance(flaw, Threat):
                stack.extend(resolve_threat(node, flaw))
            else:
                stack.extend(resolve_interference(node, flaw))
            continue
        open_pres = node.open_preconditions(new_id)
        if not open_pres:
            if node.structure_key not in seen:
                seen.add(node.structure_key)
                result.refinements.append(Refinement(node, is_solution=True))
            continue
        pre = sorted(open_pres, key=lambda p: (p.var, p.value, not p.positive))[0]
        for link in _support_choices(node, new_id, pre):
            if node.would_be_acyclic((link.producer, link.consumer)):
                stack.append(node.with_link(link))
    result.refinements.sort(key=lambda r: r.plan.structure_key)
    return result
