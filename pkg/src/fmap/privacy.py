"""Fluent classification and privacy-preserving plan projections.

Projections re-render a plan for one receiving agent: public fluents pass
through, partially private ones collapse to the undefined value, private
ones vanish (their causal links weaken to plain orderings).  Step count and
step ids are preserved, so both sides keep talking about the same plan.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .model import UNDEFINED, Action, AgentView, Assignment, Fluent
from .plan import CausalLink, PartialPlan, PlanStep


class FluentClass(Enum):
    PUBLIC = "public"
    PRIVATE = "private"
    PARTIALLY_PRIVATE = "partially-private"


def classify_fluent(sender: AgentView, receiver: str, fluent: Fluent) -> FluentClass:
    """Classification of a sender fluent w.r.t. one receiver.

    Public when both the variable and the value are shared by the pair,
    private when the variable is not shared, partially private when the
    variable is shared but the value is not.  The undefined value counts as
    shared wherever the variable is.
    """
    table = sender.shared.get(receiver)
    if table is None or fluent.var not in table:
        return FluentClass.PRIVATE
    if fluent.value == UNDEFINED or fluent.value in table[fluent.var]:
        return FluentClass.PUBLIC
    return FluentClass.PARTIALLY_PRIVATE


@dataclass(frozen=True)
class PlanProjection:
    """A plan as one receiver is allowed to see it."""

    sender: str
    receiver: str
    steps: tuple[PlanStep, ...]
    orderings: frozenset[tuple[int, int]]
    links: frozenset[CausalLink]

    def as_plan(self) -> PartialPlan:
        return PartialPlan(self.steps, self.orderings, self.links)


def project_fluent(sender: AgentView, receiver: str, fluent: Fluent) -> Fluent | None:
    cls = classify_fluent(sender, receiver, fluent)
    if cls is FluentClass.PUBLIC:
        return fluent
    if cls is FluentClass.PARTIALLY_PRIVATE:
        return Fluent(fluent.var, UNDEFINED, fluent.positive)
    return None


def project_assignment(sender: AgentView, receiver: str, eff: Assignment) -> Assignment | None:
    cls = classify_fluent(sender, receiver, Fluent(eff.var, eff.value, True))
    if cls is FluentClass.PUBLIC:
        return eff
    if cls is FluentClass.PARTIALLY_PRIVATE:
        return Assignment(eff.var, UNDEFINED, eff.assign)
    return None


def project_action(sender: AgentView, receiver: str, action: Action) -> Action:
    """The receiver-visible rendering of an action (name and owner stay visible)."""
    pre = []
    for fluent in action.pre:
        projected = project_fluent(sender, receiver, fluent)
        if projected is not None:
            pre.append(projected)
    eff = []
    for assignment in action.eff:
        projected = project_assignment(sender, receiver, assignment)
        if projected is not None and projected not in eff:
            eff.append(projected)
    return Action(action.index, action.name, tuple(pre), tuple(eff), action.owner)


def project_plan(plan: PartialPlan, sender: AgentView, receiver: str) -> PlanProjection:
    """view^receiver of a plan held by the sender.

    Links on private fluents become ordering constraints; links on partially
    private fluents keep their endpoints with the fluent replaced by ⊥.
    """
    if receiver == sender.agent:
        return PlanProjection(sender.agent, receiver, plan.steps,
                              plan.orderings, plan.links)
    steps = tuple(PlanStep(s.step_id, project_action(sender, receiver, s.action))
                  for s in plan.steps)
    orderings = set(plan.orderings)
    links = set()
    for link in plan.links:
        fluent = project_fluent(sender, receiver, link.fluent)
        if fluent is None:
            orderings.add((link.producer, link.consumer))
        else:
            links.add(CausalLink(link.producer, link.consumer, fluent))
    return PlanProjection(sender.agent, receiver, steps,
                          frozenset(orderings), frozenset(links))


def interpret_undefined(receiver: AgentView, var: int) -> frozenset[Fluent]:
    """Reading of <v,⊥>: the variable holds none of the receiver's values."""
    if var not in receiver.variables:
        return frozenset()
    return frozenset(Fluent(var, value, False)
                     for value in receiver.domains.get(var, frozenset()))


def scan_fluents_for_leak(sender: AgentView, receiver: str,
                          fluents: Iterable[tuple[int, int]],
                          allowed: frozenset[tuple[int, int]] = frozenset()) -> list[str]:
    """Report (variable, concrete value) pairs the receiver must not see.

    ``allowed`` whitelists pairs that are common knowledge regardless of the
    sharing tables (the global goals every agent read from its own files).
    """
    issues = []
    for var, value in fluents:
        if value == UNDEFINED or (var, value) in allowed:
            continue
        cls = classify_fluent(sender, receiver, Fluent(var, value, True))
        if cls is not FluentClass.PUBLIC:
            issues.append(f"leak of ({var},{value}) [{cls.value}] "
                          f"from {sender.agent} to {receiver}")
    return issues
