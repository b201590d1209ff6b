"""Upper bounds for the time-dependent travelling salesman problem.

Constant-cost ATSP tours evaluated on time-dependent travel times, with arc
costs taken from worst-case travel times (HTSP), from an auxiliary
speed-profile graph fitted by LP on all discretization points (PL-HTSP), or
fitted only around learned arrival times (MLPL-HTSP).
"""
from .atsp import AtspSolution, brute_force_atsp, solve_atsp
from .bounds import (BoundResult, Discretization, Method, dev_percent, htsp_baseline,
                     mlpl_htsp, optimality_diagnostic, pl_htsp, run_method, upper_bound)
from .errors import *  # noqa: F401,F403
from .fitlp import OmegaSelection, assemble_fit_lp, build_coefficients, fit_auxiliary, solve_fit
from .generator import GeneratorConfig, generate_instance
from .io import load_instance, load_model, run_benchmark, save_instance, save_model
from .learn import EtaModel, kmeans_fit, make_labels, mlp_train, train_from_instances
from .oracle import brute_force_tdtsp, solve_tdtsp_exact
from .tdgraph import (AuxiliaryGraph, SpeedProfile, TimeDependentGraph, TimeGrid,
                      TravelTimeFunction, eval_travel_time, path_duration, tour_duration)

__version__ = "0.1.0"
