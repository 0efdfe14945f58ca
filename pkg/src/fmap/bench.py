"""Plan documents, an independent solution validator, and task generators.

The validator re-grounds the task from the agent files and re-implements the
support, threat, and execution checks from scratch, so a planner bug cannot
hide behind shared plan-construction code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    FICTITIOUS,
    FINAL_ACTION_ID,
    INITIAL_ACTION_ID,
    UNDEFINED,
    UNDEFINED_NAME,
    Action,
    MapTask,
    State,
)
from .parser import AgentFilePair, ground_task
from .plan import PartialPlan, makespan

FIXTURES = Path(__file__).parent / "fixtures"


def example1_pairs() -> list[AgentFilePair]:
    """The bundled three-agent transport task (two carriers and a factory)."""
    pairs = []
    for agent in ("f", "ta1", "ta2"):
        domain = (FIXTURES / "example1" / f"{agent}-domain.pddl").read_text()
        problem = (FIXTURES / "example1" / f"{agent}-problem.pddl").read_text()
        pairs.append(AgentFilePair(agent, domain, problem,
                                   f"{agent}-domain.pddl", f"{agent}-problem.pddl"))
    return pairs


def example1_task() -> MapTask:
    return ground_task(example1_pairs(), name="example1")


# --------------------------------------------------------------------------
# Plan documents
# --------------------------------------------------------------------------

@dataclass
class PlanDocument:
    """Line-oriented, diff-friendly rendering of a finished plan."""

    task_name: str
    steps: list[tuple[int, str, str]]                 # id, owner, signature
    orderings: list[tuple[int, int]]
    links: list[tuple[int, int, str, str, bool]]      # producer, consumer, var, value, positive
    action_count: int = 0
    plan_makespan: int = 0

    def render(self) -> str:
        lines = [f"task {self.task_name}",
                 f"actions {self.action_count}",
                 f"makespan {self.plan_makespan}"]
        for sid, owner, signature in self.steps:
            lines.append(f"step {sid} {owner} {signature}")
        for a, b in sorted(self.orderings):
            lines.append(f"order {a} {b}")
        for producer, consumer, var, value, positive in sorted(self.links):
            sign = "+" if positive else "-"
            lines.append(f"link {producer} {consumer} {var} {value} {sign}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_plan(cls, task: MapTask, plan: PartialPlan) -> "PlanDocument":
        steps = []
        for step in plan.steps:
            owner = step.action.owner
            steps.append((step.step_id, owner, step.action.name))
        links = []
        for link in sorted(plan.links):
            links.append((link.producer, link.consumer,
                          task.variable_name(link.fluent.var),
                          task.value_name(link.fluent.value),
                          link.fluent.positive))
        return cls(task_name=task.name,
                   steps=steps,
                   orderings=sorted(plan.orderings),
                   links=links,
                   action_count=plan.action_count(),
                   plan_makespan=makespan(plan))

    @classmethod
    def parse(cls, text: str) -> "PlanDocument":
        doc = cls(task_name="", steps=[], orderings=[], links=[])
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            head, _, rest = line.partition(" ")
            if head == "task":
                doc.task_name = rest
            elif head == "actions":
                doc.action_count = int(rest)
            elif head == "makespan":
                doc.plan_makespan = int(rest)
            elif head == "step":
                sid, owner, signature = rest.split(" ", 2)
                doc.steps.append((int(sid), owner, signature))
            elif head == "order":
                a, b = rest.split()
                doc.orderings.append((int(a), int(b)))
            elif head == "link":
                producer, consumer, var, value, sign = rest.split(" ")
                doc.links.append((int(producer), int(consumer), var, value, sign == "+"))
            else:
                raise ValueError(f"unknown plan document line: {line!r}")
        return doc


# --------------------------------------------------------------------------
# Independent validation
# --------------------------------------------------------------------------

@dataclass
class Verdict:
    valid: bool
    diagnostics: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return "VALID" if self.valid else "INVALID"


def validate_plan(pairs: list[AgentFilePair], document: PlanDocument) -> Verdict:
    """Re-ground the task and check the document from first principles."""
    task = ground_task(pairs, name=document.task_name or "task")

    by_signature: dict[tuple[str, str], Action] = {}
    for action in task.actions:
        by_signature[(action.owner, action.name)] = action

    steps: list[Action] = []
    for sid, owner, signature in sorted(document.steps):
        if sid != len(steps):
            return Verdict(False, [f"step ids not dense at {sid}"])
        action = by_signature.get((owner, signature))
        if action is None:
            return Verdict(False, [f"unknown action {signature!r} owned by {owner!r}"])
        steps.append(action)
    if not steps or steps[0].index != INITIAL_ACTION_ID:
        return Verdict(False, ["step 0 is not the initial action"])
    if all(a.index != FINAL_ACTION_ID for a in steps):
        return Verdict(False, ["plan has no goal step"])

    n = len(steps)
    edges = set(document.orderings)
    links = []
    for producer, consumer, var_name, value_name, positive in document.links:
        var = task.variable_names.lookup(var_name)
        value = UNDEFINED if value_name == UNDEFINED_NAME else task.value_names.lookup(value_name)
        if var is None or value is None:
            return Verdict(False, [f"unknown symbol in link {var_name}={value_name}"])
        if producer >= n or consumer >= n:
            return Verdict(False, [f"link references missing step {producer}->{consumer}"])
        if value == UNDEFINED:
            value = steps[producer].assigned_value(var)
            if value is None and positive:
                return Verdict(False, [f"undefined link {producer}->{consumer} has no "
                                       f"producing effect to resolve it"])
        links.append((producer, consumer, var, value, positive))
        edges.add((producer, consumer))

    # Acyclicity and a deterministic execution order, written independently.
    succ = {i: set() for i in range(n)}
    indeg = {i: 0 for i in range(n)}
    for a, b in edges:
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    order = []
    ready = sorted(i for i in range(n) if indeg[i] == 0)
    while ready:
        current = ready.pop(0)
        order.append(current)
        changed = False
        for b in sorted(succ[current]):
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
                changed = True
        if changed:
            ready.sort()
    if len(order) != n:
        return Verdict(False, ["ordering constraints contain a cycle"])

    def before(a: int, b: int) -> bool:
        seen = set()
        stack = [a]
        while stack:
            node = stack.pop()
            for nxt in succ[node]:
                if nxt == b:
                    return True
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return False

    # Support: every precondition of every step carried by exactly one link.
    for sid, action in enumerate(steps):
        if action.index == INITIAL_ACTION_ID:
            continue
        for pre in action.pre:
            matching = [l for l in links
                        if l[1] == sid and l[2] == pre.var and l[4] == pre.positive
                        and (l[3] == pre.value or l[3] is None)]
            if len(matching) != 1:
                return Verdict(False, [f"step {sid} precondition "
                                       f"{task.variable_name(pre.var)}="
                                       f"{task.value_name(pre.value)} has "
                                       f"{len(matching)} supporting links"])

    # Producer really provides each link, and no step may break a link.
    for producer, consumer, var, value, positive in links:
        action = steps[producer]
        provides = False
        for eff in action.eff:
            if eff.var != var:
                continue
            if positive and eff.assign and eff.value == value:
                provides = True
            if not positive and (not eff.assign and eff.value == value
                                 or eff.assign and eff.value != value):
                provides = True
        if not provides:
            return Verdict(False, [f"link {producer}->{consumer} lacks a producing effect"])
        for sid, action in enumerate(steps):
            if sid in (producer, consumer):
                continue
            breaks = any(
                (eff.var == var and positive and
                 (eff.assign and eff.value != value or not eff.assign and eff.value == value))
                or (eff.var == var and not positive and eff.assign and eff.value == value)
                for eff in action.eff)
            if breaks and not before(sid, producer) and not before(consumer, sid):
                return Verdict(False, [f"step {sid} can break link "
                                       f"{producer}->{consumer} on "
                                       f"{task.variable_name(var)}"])

    # Unordered contradictory writers would make the outcome order-dependent.
    for a in range(n):
        for b in range(a + 1, n):
            if before(a, b) or before(b, a):
                continue
            for ea in steps[a].eff:
                for eb in steps[b].eff:
                    if ea.contradicts(eb):
                        return Verdict(False, [f"steps {a} and {b} are unordered but "
                                               f"write conflicting values"])

    # Goals supported on the final step.
    final_sid = next(sid for sid, a in enumerate(steps) if a.index == FINAL_ACTION_ID)
    for goal in task.goals:
        if not any(l[1] == final_sid and l[2] == goal.var for l in links):
            return Verdict(False, [f"goal {task.variable_name(goal.var)} is unsupported"])

    # Execute one linearization from the global initial state.
    state = State(task.domains)
    for sid in order:
        action = steps[sid]
        state = state.apply(action.eff)
    for goal in task.goals:
        if not state.entails(goal):
            return Verdict(False, [f"goal {task.variable_name(goal.var)}="
                                   f"{task.value_name(goal.value)} does not hold "
                                   f"after execution"])
    return Verdict(True)


# --------------------------------------------------------------------------
# Scalability generators
# --------------------------------------------------------------------------

LOGISTICS_DOMAIN = """(define (domain hauling)
  (:types spot flag - object place truck - spot package - object)
  (:constants yes - flag)
  (:functions (at ?p - package) - spot (pos ?t - truck) - place
              (road ?a - place ?b - place) - flag)
  (:action drive
    :parameters (?t - truck ?from - place ?to - place)
    :precondition (and (= (pos ?t) ?from) (= (road ?from ?to) yes))
    :effect (and (assign (pos ?t) ?to)))
  (:action load
    :parameters (?t - truck ?p - package ?l - place)
    :precondition (and (= (pos ?t) ?l) (= (at ?p) ?l))
    :effect (and (assign (at ?p) ?t)))
  (:action unload
    :parameters (?t - truck ?p - package ?l - place)
    :precondition (and (= (pos ?t) ?l) (= (at ?p) ?t))
    :effect (and (assign (at ?p) ?l)))
)
"""

SATELLITE_DOMAIN = """(define (domain skywatch)
  (:types target satellite shot - object direction planet - target)
  (:constants blank taken - shot)
  (:functions (point ?s - satellite) - target (cal ?s - satellite) - planet
              (img ?p - planet) - shot)
  (:action turn
    :parameters (?s - satellite ?from - target ?to - target)
    :precondition (and (= (point ?s) ?from))
    :effect (and (assign (point ?s) ?to)))
  (:action shoot
    :parameters (?s - satellite ?p - planet)
    :precondition (and (= (point ?s) ?p) (= (cal ?s) ?p))
    :effect (and (assign (img ?p) taken)))
)
"""


def gen_scalability(kind: str, n_agents: int) -> list[AgentFilePair]:
    """Loosely coupled transport or imaging tasks with 2..15 agents."""
    if not 2 <= n_agents <= 15:
        raise ValueError("n_agents must lie between 2 and 15")
    if kind == "logistics":
        return _gen_logistics(n_agents)
    if kind == "satellite":
        return _gen_satellite(n_agents)
    raise ValueError(f"unknown generator kind {kind!r}")


def _gen_logistics(n_agents: int) -> list[AgentFilePair]:
    agents = [f"t{i}" for i in range(1, n_agents + 1)]
    goals = "(= (at p1) l2) (= (at p2) l1) (= (at p3) l4) (= (at p4) l3)"
    goal_places = {"p1": "l2", "p2": "l1", "p3": "l4", "p4": "l3"}
    pairs = []
    for i, agent in enumerate(agents, start=1):
        if agent == "t1":
            places = ["l1", "l2"]
            init = ("(= (pos t1) l1) (= (at p1) l1) (= (at p2) l2) "
                    "(= (road l1 l2) yes) (= (road l2 l1) yes)")
        elif agent == "t2":
            places = ["l3", "l4"]
            init = ("(= (pos t2) l3) (= (at p3) l3) (= (at p4) l4) "
                    "(= (road l3 l4) yes) (= (road l4 l3) yes)")
        else:
            places = ["l5", "l6"]
            init = f"(= (pos {agent}) l5) (= (road l5 l6) yes)"
        objects = sorted(set(places) | set(goal_places.values()))
        receivers = " ".join(a for a in agents if a != agent)
        problem = (
            f"(define (problem haul-{agent})\n"
            f"  (:domain hauling)\n"
            f"  (:objects {agent} - truck p1 p2 p3 p4 - package "
            f"{' '.join(objects)} - place)\n"
            f"  (:init {init})\n"
            f"  (:global-goal (and {goals}))\n"
            f"  (:shared-data ((at ?p - package) - place :agents {receivers}))\n"
            f")\n")
        pairs.append(AgentFilePair(agent, LOGISTICS_DOMAIN, problem,
                                   f"{agent}-domain.pddl", f"{agent}-problem.pddl"))
    return pairs


def _gen_satellite(n_agents: int) -> list[AgentFilePair]:
    agents = [f"s{i}" for i in range(1, n_agents + 1)]
    planets = [f"p{i}" for i in range(1, n_agents + 1)]
    goals = " ".join(f"(= (img {p}) taken)" for p in planets)
    pairs = []
    for i, agent in enumerate(agents, start=1):
        own_planet = planets[i - 1]
        receivers = " ".join(a for a in agents if a != agent)
        inits = [f"(= (point {agent}) d0)", f"(= (cal {agent}) {own_planet})"]
        inits += [f"(= (img {p}) blank)" for p in planets]
        problem = (
            f"(define (problem watch-{agent})\n"
            f"  (:domain skywatch)\n"
            f"  (:objects {agent} - satellite d0 - direction "
            f"{' '.join(planets)} - planet)\n"
            f"  (:init {' '.join(inits)})\n"
            f"  (:global-goal (and {goals}))\n"
            f"  (:shared-data ((img ?p - planet) - shot :agents {receivers}))\n"
            f")\n")
        pairs.append(AgentFilePair(agent, SATELLITE_DOMAIN, problem,
                                   f"{agent}-domain.pddl", f"{agent}-problem.pddl"))
    return pairs
