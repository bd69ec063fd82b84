"""MAP/PH/S retrial cell with guard channels and channel failures."""

from ._core import (
    MapProcess,
    ModelError,
    ModelParams,
    PhDistribution,
    ScenarioError,
    SolverError,
    anneal,
    apply_sweep,
    build_case,
    choose_truncation,
    cost,
    exponential_ph,
    generator,
    level_dimensions,
    load_scenario_model,
    poisson_map,
    reference_model,
    resolved_scenario,
    retrial_ph,
    service_ph,
    simulate,
    solve,
    stationary,
    validate_map,
)

__all__ = [name for name in dir() if not name.startswith("_")]
