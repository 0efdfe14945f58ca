"""Effect application, shared domains, mutual consistency, task validation."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmap.model import (
    UNDEFINED,
    Action,
    Assignment,
    Fluent,
    ModelError,
    State,
    apply_effects,
    mutually_consistent,
    shared_domain,
    validate_task,
)

from conftest import make_tiny_task
from oracles import bullet_mutually_consistent, fluent_set_apply

V, W = 0, 1
D1, D2, D3, D4 = 1, 2, 3, 4
DOMAINS = {V: frozenset({D1, D2, D3}), W: frozenset({D1, D4})}


def act(pre=(), eff=(), owner="a0", index=2, name="x"):
    return Action(index, name, tuple(pre), tuple(eff), owner)


class TestApplyEffects:
    def test_assignment_commits_and_excludes(self):
        # Moving cargo out of its initial spot drops the old fluent entirely.
        state = State(DOMAINS).apply([Assignment(V, D2)])
        result = apply_effects(state, act(eff=[Assignment(V, D1)]))
        assert result.committed(V) == D1
        assert result.excluded(V) == frozenset({D2, D3, UNDEFINED})
        assert not result.entails(Fluent(V, D2))

    def test_empty_effects_identity(self):
        state = State(DOMAINS).apply([Assignment(V, D2)])
        assert apply_effects(state, act(eff=[])) == state

    def test_negation_of_committed_value(self):
        state = State(DOMAINS).apply([Assignment(V, D2)])
        result = state.apply([Assignment(V, D2, assign=False)])
        assert result.committed(V) is None
        assert result.excluded(V) == frozenset({D1, D2, D3, UNDEFINED})

    def test_negation_on_unknown_variable(self):
        result = State(DOMAINS).apply([Assignment(W, D4, assign=False)])
        assert result.committed(W) is None
        assert result.excluded(W) == frozenset({D4})

    def test_unknown_variable_is_model_error(self):
        with pytest.raises(ModelError):
            State(DOMAINS).apply([Assignment(9, D1)])

    def test_assign_idempotent(self):
        state = State(DOMAINS)
        once = state.apply([Assignment(V, D1)])
        twice = once.apply([Assignment(V, D1)])
        assert once == twice

    def test_matches_fluent_set_oracle_on_random_cases(self):
        rng = random.Random(20331)
        for _ in range(1000):
            state = State(DOMAINS)
            for var in DOMAINS:
                roll = rng.random()
                if roll < 0.4:
                    state = state.apply([Assignment(var, rng.choice(sorted(DOMAINS[var])))])
                elif roll < 0.7:
                    state = state.apply([Assignment(var, rng.choice(sorted(DOMAINS[var])),
                                                    assign=False)])
            effects = []
            for var in DOMAINS:
                if rng.random() < 0.6:
                    effects.append(Assignment(var, rng.choice(sorted(DOMAINS[var])),
                                              assign=rng.random() < 0.7))
            action = act(eff=effects)
            expected = fluent_set_apply(state.fluents(), action, DOMAINS)
            assert apply_effects(state, action).fluents() == expected

    def test_never_contradictory(self):
        rng = random.Random(7)
        state = State(DOMAINS)
        for _ in range(200):
            var = rng.choice(sorted(DOMAINS))
            value = rng.choice(sorted(DOMAINS[var]))
            state = state.apply([Assignment(var, value, assign=rng.random() < 0.5)])
            for v in DOMAINS:
                committed = state.committed(v)
                if committed is not None:
                    assert committed not in state.excluded(v)


class TestSharedDomain:
    def test_transport_pair_overlap(self, example1):
        view = example1.views["ta1"]
        var = example1.variable_names.lookup("at(rm)")
        values = shared_domain(view, "ta2", var)
        assert {example1.value_name(v) for v in values} == {"sf"}

    def test_self_intersection(self, example1):
        view = example1.views["ta1"]
        var = example1.variable_names.lookup("at(rm)")
        assert shared_domain(view, "ta1", var) == view.domains[var]

    def test_disjoint_domains_empty(self, example1):
        view = example1.views["ta1"]
        var = example1.variable_names.lookup("at(rm)")
        assert shared_domain(view, "f", var) == frozenset()

    def test_unknown_agent(self, example1):
        view = example1.views["ta1"]
        var = example1.variable_names.lookup("at(rm)")
        with pytest.raises(ModelError):
            shared_domain(view, "nobody", var)

    def test_symmetry_on_random_tasks(self):
        rng = random.Random(5150)
        for _ in range(25):
            task = make_tiny_task(rng)
            a, b = task.agents
            for var in task.views[a].variables:
                assert (shared_domain(task.views[a], b, var)
                        == shared_domain(task.views[b], a, var))


class TestMutualConsistency:
    def test_disjoint_variables(self, example1):
        a = act(eff=[Assignment(V, D1)])
        b = act(eff=[Assignment(W, D4)], name="y", index=3, owner="a1")
        rng = random.Random(0)
        task = make_tiny_task(rng)
        va, vb = task.views[task.agents[0]], task.views[task.agents[1]]
        assert mutually_consistent(a, b, va, vb)

    def test_effect_against_precondition(self, example1):
        # Committing the cargo to the truck clashes with a consumer that
        # still expects it at the shared facility.
        var = example1.variable_names.lookup("at(rm)")
        sf = example1.value_names.lookup("sf")
        l3 = example1.value_names.lookup("l3")
        mover = act(eff=[Assignment(var, sf)])
        reader = act(pre=[Fluent(var, l3)], name="y", index=3, owner="ta2")
        assert not mutually_consistent(mover, reader,
                                       example1.views["ta1"], example1.views["ta2"])

    def test_matches_bullet_oracle(self):
        rng = random.Random(424242)
        for _ in range(1000):
            task = make_tiny_task(rng)
            a_view, b_view = (task.views[a] for a in task.agents)
            pool_a = [x for x in task.actions if x.owner == task.agents[0]]
            pool_b = [x for x in task.actions if x.owner == task.agents[1]]
            if not pool_a or not pool_b:
                continue
            a = rng.choice(pool_a)
            b = rng.choice(pool_b)
            assert mutually_consistent(a, b, a_view, b_view) \
                == bullet_mutually_consistent(a, b, a_view, b_view)
            assert mutually_consistent(a, b, a_view, b_view) \
                == mutually_consistent(b, a, b_view, a_view)


class TestValidateTask:
    def test_bundled_fixture_clean(self, example1):
        assert validate_task(example1) == []

    def test_contradictory_initial_fragments(self):
        rng = random.Random(11)
        task = make_tiny_task(rng)
        a, b = task.agents
        view_a = task.views[a]
        if not view_a.initial:
            return
        clash = view_a.initial[0]
        other_value = next(v for v in task.views[b].domains[clash.var] | {clash.value + 1}
                           if v != clash.value)
        bad_view = task.views[b]
        patched = bad_view.__class__(
            agent=bad_view.agent, variables=bad_view.variables,
            domains={**bad_view.domains,
                     clash.var: bad_view.domains[clash.var] | {other_value}},
            actions=bad_view.actions,
            initial=bad_view.initial + (Fluent(clash.var, other_value, True),),
            goals=bad_view.goals, shared=bad_view.shared)
        task.views[b] = patched
        issues = validate_task(task)
        assert any("contradictory initial" in issue for issue in issues)

    def test_goal_unknown_to_all(self):
        rng = random.Random(12)
        task = make_tiny_task(rng)
        orphan = Fluent(0, task.value_names.intern("nowhere"), True)
        patched = task.__class__(
            name=task.name, agents=task.agents,
            variable_names=task.variable_names, value_names=task.value_names,
            domains=task.domains, initial=task.initial,
            goals=task.goals + (orphan,), actions=task.actions, views=task.views)
        issues = validate_task(patched)
        assert any("outside every agent view" in issue for issue in issues)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(1, 4),
                          st.booleans()), max_size=6))
def test_apply_sequence_never_contradicts(effects):
    domains = {0: frozenset({1, 2, 3, 4}), 1: frozenset({1, 2, 3, 4})}
    state = State(domains)
    for var, value, positive in effects:
        state = state.apply([Assignment(var, value, positive)])
    for var in domains:
        committed = state.committed(var)
        if committed is not None:
            assert committed not in state.excluded(var)
        assert state.excluded(var) <= domains[var] | {UNDEFINED}
