"""Distributed cooperative multi-agent planning over a simulated agent runtime."""

from .model import (
    UNDEFINED,
    Action,
    AgentView,
    Assignment,
    Fluent,
    MapTask,
    State,
    apply_effects,
    mutually_consistent,
    shared_domain,
    validate_task,
)
from .parser import AgentFilePair, MadlError, ground_task, parse_domain, parse_problem
from .plan import (
    CausalLink,
    PartialPlan,
    PlanStep,
    Threat,
    detect_threats,
    empty_plan,
    frontier_state,
    is_solution,
    linearize,
    resolve_threat,
)
from .flex import candidate_actions, potentially_supportable, refine, try_solution
from .privacy import FluentClass, classify_fluent, interpret_undefined, project_plan
from .dtg import Dtg, DtgHeuristic, build_dtgs, dtg_path
from .runtime import RunConfig, SolveResult, solve
from .bench import PlanDocument, example1_pairs, example1_task, gen_scalability, validate_plan

__all__ = [name for name in dir() if not name.startswith("_")]
