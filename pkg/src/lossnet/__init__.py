"""Loss networks with routing: simulation, fluid limit, equilibria.

The package models finite-capacity service networks where blocked
arrivals and blocked transfers are lost.  It provides an exact
event-driven simulator of the scaled Markov process, an integrator for
the limiting deterministic flow, and equilibrium solvers with three
mutually checking representations (fixed point, per-class visit-count
systems, closed forms).
"""

from .model import (EXIT, DerivedParams, NetworkSpec, SpecFormatError,
                    derived, load_spec, reachable_set, require_valid,
                    save_spec, spec_from_dict, spec_to_dict, validate)
from .fluid import (CAP_TOL, FluidPath, FreeCapacityLaw, NodeFlow,
                    acceptance, free_capacity_analysis, integrate,
                    node_flows, node_total_drift, offered_inflow,
                    project_state, random_state, release_rate, vector_field)
from .ctmc import (SimState, Trajectory, acceptance_rates, build_generator,
                   check_sim_state, empty_state, level_fractions,
                   occupancy_time_average, replicate, scaled_capacities,
                   simulate, stationary)
from .equilibrium import (ConvergenceError, DivergentVisitsError,
                          EquilibriumPoint, ProbeResult, TwoNodeEquilibrium,
                          acceptance_from_state, capacity_clip,
                          complementarity_defect, equilibrium_map,
                          monotonicity_functional, monotonicity_functional_mc,
                          node_totals, occupancy_from_acceptance,
                          occupancy_from_acceptance_mc, route_occupancy,
                          solve_equilibrium, supports_acceptance,
                          two_node_case, two_node_closed_form, two_node_spec,
                          unthrottled_demand, uniqueness_probe)
from .entropy import (SeriesValue, selfcheck, sequence_divergence,
                      sequence_divergence_series, split_identity_defect)
from .presets import PRESETS, branching_network, erlang_single, golden_ratio
from .compare import ScalingStudy, scaling_study, study_report

__version__ = "0.1.0"

__all__ = [
    "EXIT", "CAP_TOL", "__version__",
    "NetworkSpec", "DerivedParams", "SpecFormatError",
    "derived", "load_spec", "reachable_set", "require_valid", "save_spec",
    "spec_from_dict", "spec_to_dict", "validate",
    "FluidPath", "FreeCapacityLaw", "NodeFlow", "acceptance",
    "free_capacity_analysis", "integrate", "node_flows", "node_total_drift",
    "offered_inflow", "project_state", "random_state", "release_rate",
    "vector_field",
    "SimState", "Trajectory", "acceptance_rates", "build_generator",
    "check_sim_state", "empty_state", "level_fractions",
    "occupancy_time_average", "replicate", "scaled_capacities", "simulate",
    "stationary",
    "ConvergenceError", "DivergentVisitsError", "EquilibriumPoint",
    "ProbeResult", "TwoNodeEquilibrium", "acceptance_from_state",
    "capacity_clip", "complementarity_defect", "equilibrium_map",
    "monotonicity_functional", "monotonicity_functional_mc", "node_totals",
    "occupancy_from_acceptance", "occupancy_from_acceptance_mc",
    "route_occupancy", "solve_equilibrium", "supports_acceptance",
    "two_node_case", "two_node_closed_form", "two_node_spec",
    "unthrottled_demand", "uniqueness_probe",
    "SeriesValue", "selfcheck", "sequence_divergence",
    "sequence_divergence_series", "split_identity_defect",
    "PRESETS", "branching_network", "erlang_single", "golden_ratio",
    "ScalingStudy", "scaling_study", "study_report",
]
