"""Partial-order plan representation and reasoning.

Plans are immutable; refinement builds new plans that share their parents'
tuples.  Ordering queries always run over the union of explicit ordering
constraints and the orderings implied by causal links, so the explicit set
stays small.  Structural identity is the transitive closure of that union
together with the step/action map and the causal-link set, which makes it
independent of how redundant orderings were introduced.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping

from .model import (
    UNDEFINED,
    Action,
    Assignment,
    Fluent,
    MapTask,
    State,
    FINAL_ACTION_ID,
    INITIAL_ACTION_ID,
)


class PlanError(Exception):
    """Internal plan invariant violation (a bug, not a search dead end)."""


@dataclass(frozen=True, order=True)
class PlanStep:
    """A step of a plan: a dense id plus the action it executes."""

    step_id: int
    action: Action

    def is_initial(self) -> bool:
        return self.action.index == INITIAL_ACTION_ID

    def is_final(self) -> bool:
        return self.action.index == FINAL_ACTION_ID


@dataclass(frozen=True, order=True)
class CausalLink:
    """Commitment that the producer's effect supports the consumer's precondition."""

    producer: int
    consumer: int
    fluent: Fluent

    def __post_init__(self):
        if self.producer == self.consumer:
            raise PlanError("a causal link cannot loop on one step")


@dataclass(frozen=True, order=True)
class Threat:
    """A step that could break a causal link if ordered between its endpoints."""

    step_id: int
    link: CausalLink


@dataclass(frozen=True, order=True)
class Interference:
    """Two unordered steps whose effects contradict on some variable.

    Left unordered they would make the frontier state depend on the chosen
    linearization, so they are flaws on a par with link threats.
    """

    first: int
    second: int
    var: int


def values_conflict(effect: Assignment, fluent: Fluent) -> bool:
    """Whether an effect falsifies a link fluent.  ⊥ differs from every concrete value."""
    if effect.var != fluent.var:
        return False
    if fluent.positive:
        # <v,d> is broken by (v != d) and by (v = d') with d' != d.
        if effect.assign:
            return effect.value != fluent.value
        return effect.value == fluent.value
    # <v,¬d> is broken only by (v = d).
    return effect.assign and effect.value == fluent.value


def produces(action: Action, fluent: Fluent) -> bool:
    """Whether some effect of the action can support the fluent via a link.

    A positive precondition needs the exact assignment; an undefined-valued
    effect supports nothing concrete.  A negative precondition <v,¬d> accepts
    (v != d) or any (v = d') with d' != d, including d' = ⊥.
    """
    for eff in action.eff:
        if eff.var != fluent.var:
            continue
        if fluent.positive:
            if eff.assign and eff.value == fluent.value:
                return True
        else:
            if eff.assign and eff.value != fluent.value:
                return True
            if not eff.assign and eff.value == fluent.value:
                return True
    return False


def link_matches_precondition(link_fluent: Fluent, pre: Fluent) -> bool:
    """Match a link's fluent against a step precondition, ⊥ acting as a stand-in."""
    if link_fluent == pre:
        return True
    return (link_fluent.var == pre.var
            and link_fluent.positive == pre.positive
            and link_fluent.value == UNDEFINED)


class PartialPlan:
    """A partial-order plan: steps, explicit orderings, and causal links."""

    __slots__ = ("steps", "orderings", "links", "parent_key", "__dict__")

    def __init__(self, steps: tuple[PlanStep, ...],
                 orderings: frozenset[tuple[int, int]],
                 links: frozenset[CausalLink],
                 parent_key: str | None = None):
        self.steps = steps
        self.orderings = orderings
        self.links = links
        self.parent_key = parent_key
        for i, step in enumerate(steps):
            if step.step_id != i:
                raise PlanError("step ids must be dense and ordered")
        if steps and not steps[0].is_initial():
            raise PlanError("step 0 must be the initial action")

    def __len__(self) -> int:
        return len(self.steps)

    def step(self, step_id: int) -> PlanStep:
        return self.steps[step_id]

    def action_count(self) -> int:
        """Number of real (non-fictitious) actions; the g value of the plan."""
        return sum(1 for s in self.steps if not s.action.is_fictitious())

    def final_step(self) -> PlanStep | None:
        for s in self.steps:
            if s.is_final():
                return s
        return None

    @cached_property
    def ordering_union(self) -> frozenset[tuple[int, int]]:
        implied = {(l.producer, l.consumer) for l in self.links}
        # The initial step precedes every other step by definition.
        implied.update((0, sid) for sid in range(1, len(self.steps)))
        return self.orderings | implied

    @cached_property
    def _successors(self) -> dict[int, int]:
        """Reachability bitmasks over the ordering union (strict, transitive)."""
        n = len(self.steps)
        direct: list[int] = [0] * n
        for a, b in self.ordering_union:
            direct[a] |= 1 << b
        reach = [0] * n
        order = self._topological_or_none()
        if order is None:
            raise PlanError("cyclic orderings in plan")
        for sid in reversed(order):
            mask = direct[sid]
            acc = mask
            rest = mask
            while rest:
                low = rest & -rest
                acc |= reach[low.bit_length() - 1]
                rest ^= low
            reach[sid] = acc
        return {i: reach[i] for i in range(n)}

    def _topological_or_none(self) -> list[int] | None:
        n = len(self.steps)
        indeg = [0] * n
        succ: list[list[int]] = [[] for _ in range(n)]
        for a, b in self.ordering_union:
            succ[a].append(b)
            indeg[b] += 1
        import heapq
        ready = [i for i in range(n) if indeg[i] == 0]
        heapq.heapify(ready)
        out: list[int] = []
        while ready:
            sid = heapq.heappop(ready)
            out.append(sid)
            for nxt in sorted(succ[sid]):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    heapq.heappush(ready, nxt)
        return out if len(out) == n else None

    def is_acyclic(self) -> bool:
        return self._topological_or_none() is not None

    def precedes(self, a: int, b: int) -> bool:
        """Strict precedence of a before b in the ordering union closure."""
        return bool(self._successors[a] & (1 << b))

    def unordered(self, a: int, b: int) -> bool:
        return a != b and not self.precedes(a, b) and not self.precedes(b, a)

    def would_be_acyclic(self, extra: tuple[int, int]) -> bool:
        a, b = extra
        if a == b:
            return False
        return not self.precedes(b, a)

    @cached_property
    def structure_key(self) -> tuple:
        """Canonical identity: (step actions, ordering closure, links)."""
        actions = tuple(s.action.index for s in self.steps)
        closure = []
        for sid in range(len(self.steps)):
            mask = self._successors[sid]
            rest = mask
            while rest:
                low = rest & -rest
                closure.append((sid, low.bit_length() - 1))
                rest ^= low
        links = tuple(sorted(
            (l.producer, l.consumer, l.fluent.var, l.fluent.value, l.fluent.positive)
            for l in self.links))
        return (actions, tuple(sorted(closure)), links)

    @cached_property
    def structure_digest(self) -> str:
        return hashlib.sha256(repr(self.structure_key).encode()).hexdigest()[:16]

    def extend(self, step: PlanStep,
               new_links: Iterable[CausalLink] = (),
               new_orderings: Iterable[tuple[int, int]] = ()) -> "PartialPlan":
        if step.step_id != len(self.steps):
            raise PlanError("new step id must be the next dense id")
        return PartialPlan(self.steps + (step,),
                           self.orderings | frozenset(new_orderings),
                           self.links | frozenset(new_links),
                           parent_key=self.structure_digest)

    def with_ordering(self, ordering: tuple[int, int]) -> "PartialPlan":
        return PartialPlan(self.steps, self.orderings | {ordering}, self.links,
                           parent_key=self.parent_key)

    def with_link(self, link: CausalLink) -> "PartialPlan":
        return PartialPlan(self.steps, self.orderings, self.links | {link},
                           parent_key=self.parent_key)

    def support_count(self, step_id: int, pre: Fluent) -> int:
        return sum(1 for l in self.links
                   if l.consumer == step_id and link_matches_precondition(l.fluent, pre))

    def open_preconditions(self, step_id: int) -> list[Fluent]:
        step = self.steps[step_id]
        return [p for p in step.action.pre if self.support_count(step_id, p) == 0]

    def __repr__(self):
        return (f"PartialPlan(steps={[s.action.name for s in self.steps]}, "
                f"|OR|={len(self.orderings)}, |CL|={len(self.links)})")


def empty_plan(initial_action: Action) -> PartialPlan:
    """The root plan: only the fictitious initial step, nothing else."""
    if initial_action.index != INITIAL_ACTION_ID:
        raise PlanError("the empty plan starts from the initial action")
    return PartialPlan((PlanStep(0, initial_action),), frozenset(), frozenset())


def detect_threats(plan: PartialPlan,
                   step_ids: Iterable[int] | None = None,
                   links: Iterable[CausalLink] | None = None) -> set[Threat]:
    """Threats between the given steps and links (defaults: all against all).

    A step threatens a link when its effects conflict with the link's fluent
    and it can still be ordered between the link's endpoints.
    """
    candidate_steps = plan.steps if step_ids is None else [plan.steps[i] for i in step_ids]
    candidate_links = plan.links if links is None else links
    found: set[Threat] = set()
    for link in candidate_links:
        for step in candidate_steps:
            if step.step_id in (link.producer, link.consumer):
                continue
            if not any(values_conflict(e, link.fluent) for e in step.action.eff):
                continue
            # Safe only when forced outside the link's span.
            if plan.precedes(step.step_id, link.producer):
                continue
            if plan.precedes(link.consumer, step.step_id):
                continue
            found.add(Threat(step.step_id, link))
    return found


def all_threats(plan: PartialPlan) -> set[Threat]:
    return detect_threats(plan)


def detect_interference(plan: PartialPlan,
                        step_ids: Iterable[int] | None = None) -> set[Interference]:
    """Unordered step pairs with contradictory effects on a common variable."""
    probe = range(len(plan.steps)) if step_ids is None else step_ids
    found: set[Interference] = set()
    for sid in probe:
        step = plan.steps[sid]
        for other in plan.steps:
            if other.step_id == sid or not plan.unordered(sid, other.step_id):
                continue
            for eff in step.action.eff:
                for oeff in other.action.eff:
                    if eff.contradicts(oeff):
                        a, b = sorted((sid, other.step_id))
                        found.add(Interference(a, b, eff.var))
    return found


def resolve_threat(plan: PartialPlan, threat: Threat) -> list[PartialPlan]:
    """Promotion and demotion children that keep the orderings acyclic."""
    children = []
    promotion = (threat.link.consumer, threat.step_id)
    if plan.would_be_acyclic(promotion):
        children.append(plan.with_ordering(promotion))
    demotion = (threat.step_id, threat.link.producer)
    if plan.would_be_acyclic(demotion):
        children.append(plan.with_ordering(demotion))
    return children


def resolve_interference(plan: PartialPlan, flaw: Interference) -> list[PartialPlan]:
    children = []
    for ordering in ((flaw.first, flaw.second), (flaw.second, flaw.first)):
        if plan.would_be_acyclic(ordering):
            children.append(plan.with_ordering(ordering))
    return children


def linearize(plan: PartialPlan) -> list[int]:
    """Deterministic topological order of the steps, ties by ascending id."""
    order = plan._topological_or_none()
    if order is None:
        raise PlanError("cannot linearize a cyclic plan")
    return order


def frontier_state(plan: PartialPlan, domains: Mapping[int, frozenset[int]]) -> State:
    """State after executing the plan in any valid linearization."""
    state = State(domains)
    for sid in linearize(plan):
        state = state.apply(plan.steps[sid].action.eff)
    return state


def flaw_summary(plan: PartialPlan) -> list[str]:
    """Reasons the plan is not flaw-free; empty for exported-quality plans."""
    issues = []
    if not plan.is_acyclic():
        issues.append("cyclic orderings")
        return issues
    for step in plan.steps:
        if step.is_final():
            continue
        for pre in step.action.pre:
            n = plan.support_count(step.step_id, pre)
            if n != 1 and not step.is_initial():
                issues.append(f"step {step.step_id} precondition supported {n} times")
    for threat in all_threats(plan):
        issues.append(f"threat: step {threat.step_id} on link "
                      f"{threat.link.producer}->{threat.link.consumer}")
    for flaw in detect_interference(plan):
        issues.append(f"interference between steps {flaw.first} and {flaw.second} "
                      f"on variable {flaw.var}")
    return issues


def is_flaw_free(plan: PartialPlan) -> bool:
    return not flaw_summary(plan)


def is_solution(plan: PartialPlan, goals: Iterable[Fluent]) -> bool:
    """True iff the final action is present, every goal is link-supported,
    and the plan is flaw-free."""
    final = plan.final_step()
    if final is None:
        return False
    for goal in goals:
        if not any(l.consumer == final.step_id
                   and link_matches_precondition(l.fluent, goal)
                   for l in plan.links):
            return False
    for goal in plan.final_step().action.pre:
        if plan.support_count(final.step_id, goal) == 0:
            return False
    return is_flaw_free(plan)


def makespan(plan: PartialPlan) -> int:
    """Longest chain of real steps in the ordering union (unit durations)."""
    order = linearize(plan)
    depth = {sid: 0 for sid in order}
    for sid in order:
        base = depth[sid] + (0 if plan.steps[sid].action.is_fictitious() else 1)
        for a, b in plan.ordering_union:
            if a == sid:
                depth[b] = max(depth[b], base)
    final = max((depth[sid] + (0 if plan.steps[sid].action.is_fictitious() else 1))
                for sid in order) if order else 0
    return final
