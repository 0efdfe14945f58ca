"""Shared fixtures: the bundled transport task and random tiny-task makers."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fmap.model import (
    FICTITIOUS,
    FINAL_ACTION_ID,
    INITIAL_ACTION_ID,
    Action,
    AgentView,
    Assignment,
    Fluent,
    MapTask,
    SymbolTable,
    UNDEFINED_NAME,
    validate_task,
)


@pytest.fixture(scope="session")
def example1():
    from fmap.bench import example1_task
    return example1_task()


@pytest.fixture(scope="session")
def example1_result(example1):
    from fmap.runtime import RunConfig, solve
    result = solve(example1, RunConfig(initial_coordinator="ta1", timeout_s=60))
    assert result.status == "solution"
    return result


def make_tiny_task(rng: random.Random, n_agents: int = 2, n_vars: int = 3,
                   n_values: int = 4, n_actions: int = 6,
                   goal_count: int = 1, share: str = "gated",
                   name: str = "tiny") -> MapTask:
    """Random small task built straight at the model level.

    Agents know every variable but only a random slice of each domain.
    ``share='full'`` marks every variable shared with the full domain
    intersection; ``share='gated'`` additionally hides a random quarter of
    the variables per agent pair.  Goal variables and values always join
    every agent's view; goals are positive, as in the task language.
    """
    agents = tuple(f"a{i}" for i in range(n_agents))
    var_names = SymbolTable()
    val_names = SymbolTable(reserved=[UNDEFINED_NAME])
    variables = [var_names.intern(f"v{i}") for i in range(n_vars)]
    pool = [val_names.intern(f"d{i}") for i in range(n_values)]

    global_domains = {v: set(rng.sample(pool, rng.randint(2, n_values)))
                      for v in variables}
    agent_domains = {a: {v: set(rng.sample(sorted(global_domains[v]),
                                           rng.randint(1, len(global_domains[v]))))
                         for v in variables}
                     for a in agents}

    initial: dict[int, tuple[int, str]] = {}
    for v in variables:
        if rng.random() < 0.7:
            owner = rng.choice(agents)
            value = rng.choice(sorted(agent_domains[owner][v]))
            initial[v] = (value, owner)

    goals: list[Fluent] = []
    for _ in range(goal_count):
        v = rng.choice(variables)
        holder = rng.choice(agents)
        value = rng.choice(sorted(agent_domains[holder][v]))
        goal = Fluent(v, value, True)
        if goal not in goals:
            goals.append(goal)
    goals.sort()
    for goal in goals:
        for a in agents:
            agent_domains[a][goal.var].add(goal.value)

    # Finalized knowledge first, symmetric sharing tables second.
    gates: dict[tuple[str, str, int], bool] = {}
    for i, a in enumerate(agents):
        for b in agents[i + 1:]:
            for v in variables:
                keep = share == "full" or rng.random() < 0.75
                gates[(a, b, v)] = keep

    def shared_table(a: str, b: str) -> dict[int, frozenset[int]]:
        lo, hi = sorted((a, b))
        table = {}
        for v in variables:
            if gates[(lo, hi, v)]:
                table[v] = frozenset(agent_domains[a][v] & agent_domains[b][v])
        return table

    raw_actions = []
    for i in range(n_actions):
        owner = agents[i % n_agents]
        domains = agent_domains[owner]
        pre: list[Fluent] = []
        for _ in range(rng.randint(0, 2)):
            v = rng.choice(variables)
            value = rng.choice(sorted(domains[v]))
            fluent = Fluent(v, value, rng.random() < 0.8)
            if all(fluent.var != g.var for g in pre):
                pre.append(fluent)
        eff: list[Assignment] = []
        assigned: set[int] = set()
        for _ in range(rng.randint(1, 2)):
            v = rng.choice(variables)
            if v in assigned:
                continue
            assigned.add(v)
            value = rng.choice(sorted(domains[v]))
            eff.append(Assignment(v, value, rng.random() < 0.85))
        raw_actions.append((f"act{i} {owner}", owner,
                            tuple(sorted(pre)), tuple(sorted(eff))))

    init_fluents = tuple(sorted(Fluent(v, value, True)
                                for v, (value, _) in initial.items()))
    alpha_i = Action(INITIAL_ACTION_ID, "<init>", (),
                     tuple(Assignment(f.var, f.value, True) for f in init_fluents),
                     FICTITIOUS)
    alpha_f = Action(FINAL_ACTION_ID, "<goal>", tuple(goals), (), FICTITIOUS)
    actions = [alpha_i, alpha_f]
    raw_actions.sort(key=lambda item: (item[0], item[1]))
    for index, (label, owner, pre, eff) in enumerate(raw_actions, start=2):
        actions.append(Action(index, label, pre, eff, owner))

    views = {}
    for a in agents:
        views[a] = AgentView(
            agent=a,
            variables=frozenset(variables),
            domains={v: frozenset(vals) for v, vals in agent_domains[a].items()},
            actions=tuple(x for x in actions if x.owner == a),
            initial=tuple(f for f in init_fluents if initial[f.var][1] == a),
            goals=tuple(goals),
            shared={b: shared_table(a, b) for b in agents if b != a})

    task = MapTask(name=name,
                   agents=agents,
                   variable_names=var_names,
                   value_names=val_names,
                   domains={v: frozenset(vals) for v, vals in global_domains.items()},
                   initial=init_fluents,
                   goals=tuple(goals),
                   actions=tuple(actions),
                   views=views)
    issues = validate_task(task)
    assert not issues, f"generator produced an invalid task: {issues}"
    return task


def agent_root_plan(view: AgentView):
    """The empty plan as one agent sees it (its own initial fragment)."""
    from fmap.plan import empty_plan

    init = Action(INITIAL_ACTION_ID, "<init>", (),
                  tuple(Assignment(f.var, f.value, f.positive) for f in view.initial),
                  FICTITIOUS)
    return empty_plan(init)
