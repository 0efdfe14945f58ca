"""Simulated agent actors on a deterministic in-process message bus.

Each agent owns its view, its DTGs, and its copy of the multi-agent search
tree; agents exchange data only through bus messages.  The bus is lossless,
exactly-once, FIFO per sender/receiver pair, so one run is bit-reproducible
given the same configuration.  Plan ids are assigned by replaying each
round's announcements in lexicographic originator order, which keeps every
agent's open list aligned without a master process.
"""

from __future__ import annotations

import hashlib
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable

from .dtg import INF, DtgHeuristic, build_dtgs, merge_shared_transitions, shared_transitions
from .flex import refine, try_solution
from .model import (
    FICTITIOUS,
    FINAL_ACTION_ID,
    INITIAL_ACTION_ID,
    UNDEFINED,
    Action,
    AgentView,
    Assignment,
    Fluent,
    MapTask,
    validate_task,
)
from .plan import CausalLink, PartialPlan, PlanStep, empty_plan, flaw_summary
from .privacy import project_action, project_fluent

MSG_DTG_SHARE = "dtgshare"
MSG_BASE_SELECTED = "baseplanselected"
MSG_ANNOUNCE = "refinementannounce"
MSG_PATH_REQUEST = "pathcostrequest"
MSG_PATH_RESPONSE = "pathcostresponse"
MSG_ROUND_COMPLETE = "roundcomplete"
MSG_SOLUTION = "solutionfound"
MSG_EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class Message:
    kind: str
    sender: str
    receiver: str
    seq: int
    payload: dict
    correlation_id: int | None = None


class Bus:
    """Lossless per-pair FIFO message transport with a full log."""

    def __init__(self):
        self.queue: deque[Message] = deque()
        self.log: list[Message] = []
        self._seq: Counter = Counter()
        self._correlation = 0

    def _stamp(self, kind, sender, receiver, payload, correlation_id=None) -> Message:
        self._seq[(sender, receiver)] += 1
        msg = Message(kind, sender, receiver, self._seq[(sender, receiver)],
                      payload, correlation_id)
        self.log.append(msg)
        return msg

    def send(self, kind: str, sender: str, receiver: str, payload: dict):
        self.queue.append(self._stamp(kind, sender, receiver, payload))

    def broadcast(self, kind: str, sender: str, receivers: Iterable[str], payload: dict):
        for receiver in sorted(receivers):
            if receiver != sender:
                self.send(kind, sender, receiver, payload)

    def request(self, sender: str, receiver: str, payload: dict, answer_fn) -> dict:
        """Synchronous request/response pair, both logged with one correlation id."""
        self._correlation += 1
        cid = self._correlation
        self._stamp(MSG_PATH_REQUEST, sender, receiver, payload, cid)
        answer = answer_fn(payload)
        self._stamp(MSG_PATH_RESPONSE, receiver, sender, answer, cid)
        return answer

    def pump(self, deliver):
        while self.queue:
            deliver(self.queue.popleft())


@dataclass
class RunConfig:
    """Reproducibility knobs; identical config and inputs give identical runs."""

    seed: int = 0
    parallelism: int = 1
    timeout_s: float = 120.0
    node_limit: int = 500_000
    trace_level: int = 0
    initial_coordinator: str | None = None
    audit: bool = True
    use_path_cache: bool = True


@dataclass
class SolveStats:
    iterations: int = 0
    nodes_expanded: int = 0
    nodes_generated: int = 0
    messages: Counter = field(default_factory=Counter)
    messages_sent_by_agent: Counter = field(default_factory=Counter)
    time_refinement: float = 0.0
    time_evaluation: float = 0.0
    time_communication: float = 0.0
    selection_sequence: list[tuple[int, float]] = field(default_factory=list)
    audit_violations: list[str] = field(default_factory=list)
    solution_plan_id: int | None = None

    def as_lines(self) -> list[str]:
        lines = [f"iterations={self.iterations}",
                 f"nodes_expanded={self.nodes_expanded}",
                 f"nodes_generated={self.nodes_generated}"]
        for kind in sorted(self.messages):
            lines.append(f"msg_{kind}={self.messages[kind]}")
        lines.append(f"time_refinement={self.time_refinement:.4f}")
        lines.append(f"time_evaluation={self.time_evaluation:.4f}")
        lines.append(f"time_communication={self.time_communication:.4f}")
        return lines


@dataclass
class PlanMeta:
    originator: str
    parent_id: int | None
    g: int
    h: float
    is_solution: bool

    @property
    def f(self) -> float:
        return self.g + self.h


@dataclass
class SolveResult:
    status: str                      # solution | unsolvable | timeout
    plan: PartialPlan | None
    stats: SolveStats
    trace: list[str]
    bus_log: list[Message]
    task: MapTask
    actors: dict[str, "AgentActor"]

    def solution_owners(self) -> set[str]:
        if self.plan is None:
            return set()
        return {s.action.owner for s in self.plan.steps if not s.action.is_fictitious()}


def _fingerprint(parent_id: int, action: Action,
                 new_links: Iterable[CausalLink],
                 new_orderings: Iterable[tuple[int, int]]) -> str:
    """Identity token all receivers can compare without seeing private data.

    Links are named by (producer, slot of the consumed precondition), which
    is view-independent, so structurally identical announcements from two
    agents collide here and only the lower agent id's copy survives.
    """
    slots = []
    pre_index = {f: i for i, f in enumerate(action.pre)}
    for link in sorted(new_links):
        slots.append((link.producer, pre_index.get(link.fluent, -1)))
    raw = repr((parent_id, action.index, tuple(slots), tuple(sorted(new_orderings))))
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


class AgentActor:
    """One planning agent: isolated state, bus-mediated interaction."""

    def __init__(self, agent: str, view: AgentView, bus: Bus, config: RunConfig,
                 stats: SolveStats):
        self.agent = agent
        self.view = view
        self.bus = bus
        self.config = config
        self.stats = stats
        self.initial_action = Action(
            INITIAL_ACTION_ID, "<init>", (),
            tuple(Assignment(f.var, f.value, f.positive) for f in view.initial),
            FICTITIOUS)
        self.final_action = Action(FINAL_ACTION_ID, "<goal>", view.goals, (), FICTITIOUS)
        self.dtgs = build_dtgs(view)
        self.heuristic = DtgHeuristic(view, self.dtgs, use_cache=config.use_path_cache)
        self.plans: dict[int, PartialPlan] = {}
        self.meta: dict[int, PlanMeta] = {}
        self.open: dict[int, PlanMeta] = {}
        self.generated_keys: set[tuple] = set()
        self.next_plan_id = 0
        self.round_buffer: list[dict] = []
        self.round_complete_from: set[str] = set()
        self.peers = sorted(set(view.shared) - {agent})

    # ----- startup ---------------------------------------------------------

    def seed_root(self):
        root = empty_plan(self.initial_action)
        self.plans[0] = root
        self.meta[0] = PlanMeta(self.agent, None, 0, 0.0, False)
        self.open[0] = self.meta[0]
        self.next_plan_id = 1

    def share_dtg_transitions(self):
        for receiver in self.peers:
            transitions = shared_transitions(self.view, receiver)
            payload = {"transitions": [
                (var, src, dst, tuple((c.var, c.value, c.positive) for c in conds))
                for var, src, dst, conds in transitions]}
            self._send(MSG_DTG_SHARE, receiver, payload)

    # ----- message handling --------------------------------------------------

    def on_message(self, msg: Message):
        if msg.kind == MSG_DTG_SHARE:
            transitions = [
                (var, src, dst,
                 tuple(Fluent(v, d, pol) for v, d, pol in conds))
                for var, src, dst, conds in msg.payload["transitions"]]
            merge_shared_transitions(self.dtgs, msg.sender, transitions)
        elif msg.kind == MSG_BASE_SELECTED:
            self.note_base_selected(msg.payload["plan_id"])
        elif msg.kind == MSG_ANNOUNCE:
            self.round_buffer.append(msg.payload)
        elif msg.kind == MSG_ROUND_COMPLETE:
            self.round_complete_from.add(msg.sender)
        elif msg.kind in (MSG_SOLUTION, MSG_EXHAUSTED):
            pass
        else:
            raise RuntimeError(f"unroutable message kind {msg.kind}")

    def _send(self, kind: str, receiver: str, payload: dict):
        self.stats.messages_sent_by_agent[self.agent] += 1
        self.bus.send(kind, self.agent, receiver, payload)

    # ----- search duties -----------------------------------------------------

    def select_base(self) -> tuple[int, PlanMeta] | None:
        ranked = sorted(
            ((meta.f, meta.h, pid) for pid, meta in self.open.items()
             if meta.f != INF),
            key=lambda t: (t[0], t[1], t[2]))
        if not ranked:
            return None
        pid = ranked[0][2]
        return pid, self.open[pid]

    def note_base_selected(self, plan_id: int):
        self.open.pop(plan_id, None)

    def expand(self, base_id: int) -> list[dict]:
        """FLEX refinements plus solution closures, evaluated and packaged."""
        base = self.plans[base_id]
        t0 = time.perf_counter()
        refinements = refine(self.view, base, self.config.parallelism)
        solutions = try_solution(self.view, base, self.final_action)
        self.stats.time_refinement += time.perf_counter() - t0

        products = list(refinements.refinements) + list(solutions.refinements)
        payloads = []
        for product in products:
            plan = product.plan
            if plan.structure_key in self.generated_keys:
                continue
            self.generated_keys.add(plan.structure_key)
            t1 = time.perf_counter()
            h = self.heuristic.evaluate_plan(plan)
            self.stats.time_evaluation += time.perf_counter() - t1
            if self.config.audit:
                issues = flaw_summary(plan)
                if issues:
                    self.stats.audit_violations.append(
                        f"{self.agent} built a flawed plan over {base_id}: {issues}")
            new_step = plan.steps[-1]
            new_links = sorted(plan.links - base.links)
            new_orderings = sorted(plan.orderings - base.orderings)
            payloads.append({
                "originator": self.agent,
                "parent_id": base_id,
                "fingerprint": _fingerprint(base_id, new_step.action,
                                            new_links, new_orderings),
                "g": plan.action_count(),
                "h": h,
                "is_solution": product.is_solution,
                "step_id": new_step.step_id,
                "action": new_step.action,
                "links": new_links,
                "orderings": new_orderings,
            })
        return payloads

    def announce(self, payloads: list[dict]):
        """Send each product to every peer under its privacy projection."""
        for payload in payloads:
            self.round_buffer.append(payload)
            for receiver in self.peers:
                self._send(MSG_ANNOUNCE, receiver, self._project_payload(payload, receiver))
        for receiver in self.peers:
            self._send(MSG_ROUND_COMPLETE, receiver, {})

    def _project_payload(self, payload: dict, receiver: str) -> dict:
        action = payload["action"]
        projected_action = project_action(self.view, receiver, action)
        links = []
        orderings = list(payload["orderings"])
        for link in payload["links"]:
            fluent = project_fluent(self.view, receiver, link.fluent)
            if fluent is None:
                orderings.append((link.producer, link.consumer))
            else:
                links.append(CausalLink(link.producer, link.consumer, fluent))
        out = dict(payload)
        out["action"] = projected_action
        out["links"] = sorted(links)
        out["orderings"] = sorted(set(orderings))
        return out

    def close_round(self, expected_peers: set[str]) -> list[tuple[int, dict]]:
        """Deterministic id assignment over the round's announcements.

        Everyone sorts by originator id and replays; fingerprint duplicates
        keep only the first (lowest originator) copy.  Returns the inserted
        (plan id, payload) pairs for tracing.
        """
        if self.round_complete_from != expected_peers:
            raise RuntimeError(f"{self.agent} closing round without all signals")
        by_originator: dict[str, list[dict]] = {}
        for payload in self.round_buffer:
            by_originator.setdefault(payload["originator"], []).append(payload)
        ordered = []
        for originator in sorted(by_originator):
            ordered.extend(by_originator[originator])

        inserted = []
        seen_fingerprints: set[str] = set()
        for payload in ordered:
            if payload["fingerprint"] in seen_fingerprints:
                continue
            seen_fingerprints.add(payload["fingerprint"])
            pid = self.next_plan_id
            self.next_plan_id += 1
            plan = self._adopt(payload)
            meta = PlanMeta(payload["originator"], payload["parent_id"],
                            payload["g"], payload["h"], payload["is_solution"])
            self.plans[pid] = plan
            self.meta[pid] = meta
            self.open[pid] = meta
            inserted.append((pid, payload))
        self.round_buffer = []
        self.round_complete_from = set()
        return inserted

    def _adopt(self, payload: dict) -> PartialPlan:
        parent = self.plans[payload["parent_id"]]
        step = PlanStep(payload["step_id"], payload["action"])
        return parent.extend(step, payload["links"], payload["orderings"])


def _wire_remote_costs(actors: dict[str, AgentActor], bus: Bus, stats: SolveStats):
    def make_remote(agent: str):
        def remote(peer: str, var: int, source: int, target: int,
                   visited: frozenset[str]) -> float:
            t0 = time.perf_counter()
            stats.messages_sent_by_agent[agent] += 1
            stats.messages_sent_by_agent[peer] += 1
            payload = {"variable": var, "from": source, "to": target,
                       "visited": tuple(sorted(visited))}
            answer = bus.request(
                agent, peer, payload,
                lambda p: {"cost": actors[peer].heuristic.answer_path_cost(
                    p["variable"], p["from"], p["to"], frozenset(p["visited"]))})
            stats.time_communication += time.perf_counter() - t0
            return answer["cost"]
        return remote

    for agent, actor in actors.items():
        actor.heuristic.remote_fn = make_remote(agent)


def _merge_solution(task: MapTask, actors: dict[str, AgentActor],
                    plan_id: int, originator: str) -> PartialPlan:
    """Reassemble the global plan from the owners' concrete copies."""
    reference = actors[originator].plans[plan_id]
    steps = []
    for step in reference.steps:
        action = step.action
        if action.index in (INITIAL_ACTION_ID, FINAL_ACTION_ID):
            steps.append(PlanStep(step.step_id, task.actions[action.index]))
        else:
            owned = actors[action.owner].plans[plan_id].steps[step.step_id].action
            steps.append(PlanStep(step.step_id, owned))
    links: set[CausalLink] = set()
    orderings: set[tuple[int, int]] = set()
    for agent, actor in actors.items():
        copy = actor.plans.get(plan_id)
        if copy is None:
            continue
        orderings.update(copy.orderings)
        for link in copy.links:
            consumer = copy.steps[link.consumer]
            if consumer.action.owner == agent:
                links.add(link)
            elif consumer.action.index == FINAL_ACTION_ID and agent == originator:
                links.add(link)
    return PartialPlan(tuple(steps), frozenset(orderings), frozenset(links))


def solve(task: MapTask, config: RunConfig | None = None) -> SolveResult:
    """Run the distributed search to completion on a simulated bus."""
    config = config or RunConfig()
    diagnostics = validate_task(task)
    if diagnostics:
        raise ValueError("task failed validation: " + "; ".join(diagnostics))

    stats = SolveStats()
    bus = Bus()
    trace: list[str] = []
    actors = {agent: AgentActor(agent, task.views[agent], bus, config, stats)
              for agent in task.agents}
    _wire_remote_costs(actors, bus, stats)

    def deliver(msg: Message):
        actors[msg.receiver].on_message(msg)

    def communicate(fn):
        t0 = time.perf_counter()
        fn()
        bus.pump(deliver)
        stats.time_communication += time.perf_counter() - t0

    for agent in task.agents:
        actors[agent].seed_root()
    for agent in task.agents:
        communicate(lambda a=agent: actors[a].share_dtg_transitions())

    agents = list(task.agents)
    if config.initial_coordinator is not None:
        if config.initial_coordinator not in actors:
            raise ValueError(f"unknown initial coordinator {config.initial_coordinator!r}")
        coordinator_ix = agents.index(config.initial_coordinator)
    else:
        import random
        coordinator_ix = random.Random(config.seed).randrange(len(agents))

    deadline = time.monotonic() + config.timeout_s
    status = "timeout"
    solution_plan = None

    while True:
        if time.monotonic() > deadline or stats.nodes_generated > config.node_limit:
            status = "timeout"
            break
        coordinator = agents[coordinator_ix % len(agents)]
        selected = actors[coordinator].select_base()
        if selected is None:
            communicate(lambda: bus.broadcast(MSG_EXHAUSTED, coordinator, agents, {}))
            stats.messages_sent_by_agent[coordinator] += len(agents) - 1
            trace.append(f"iter={stats.iterations} event=exhausted agent={coordinator} "
                         f"plan=- g=- h=- f=-")
            status = "unsolvable"
            break
        plan_id, meta = selected
        stats.selection_sequence.append((plan_id, meta.f))
        trace.append(f"iter={stats.iterations} event=select agent={coordinator} "
                     f"plan={plan_id} g={meta.g} h={meta.h} f={meta.f}")
        if meta.is_solution:
            communicate(lambda: bus.broadcast(MSG_SOLUTION, coordinator, agents,
                                              {"plan_id": plan_id}))
            stats.messages_sent_by_agent[coordinator] += len(agents) - 1
            trace.append(f"iter={stats.iterations} event=solution agent={coordinator} "
                         f"plan={plan_id} g={meta.g} h={meta.h} f={meta.f}")
            stats.solution_plan_id = plan_id
            solution_plan = _merge_solution(task, actors, plan_id, meta.originator)
            status = "solution"
            break

        communicate(lambda: bus.broadcast(MSG_BASE_SELECTED, coordinator, agents,
                                          {"plan_id": plan_id}))
        stats.messages_sent_by_agent[coordinator] += len(agents) - 1
        actors[coordinator].note_base_selected(plan_id)

        stats.iterations += 1
        stats.nodes_expanded += 1
        for agent in agents:
            payloads = actors[agent].expand(plan_id)
            communicate(lambda a=agent, p=payloads: actors[a].announce(p))

        expected = set(agents)
        inserted_view = None
        for agent in agents:
            inserted = actors[agent].close_round(expected - {agent})
            if agent == task.agents[0]:
                inserted_view = inserted
        stats.nodes_generated += len(inserted_view or [])
        for pid, payload in inserted_view or []:
            trace.append(f"iter={stats.iterations} event=announce "
                         f"agent={payload['originator']} plan={pid} "
                         f"g={payload['g']} h={payload['h']} "
                         f"f={payload['g'] + payload['h']}")

        if config.audit:
            tables = {agent: {pid: (m.g, m.h, m.f) for pid, m in actors[agent].open.items()}
                      for agent in agents}
            reference = tables[agents[0]]
            for agent, table in tables.items():
                if table != reference:
                    stats.audit_violations.append(
                        f"open-list divergence at iteration {stats.iterations}: "
                        f"{agents[0]} vs {agent}")

        coordinator_ix += 1

    for msg in bus.log:
        stats.messages[msg.kind] += 1

    return SolveResult(status=status, plan=solution_plan, stats=stats,
                       trace=trace, bus_log=bus.log, task=task, actors=actors)
