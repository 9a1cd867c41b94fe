"""Constrained long-horizon predictive torque control for surface-mounted PMSMs.

Polynomial current trajectories over a multi-millisecond horizon are
optimized every sampling period against a quadratic tracking-plus-losses
cost under affine current and voltage limits. The constrained solve runs
through a least-distance transformation and a linear program, with an exact
quadratic-programming oracle available for comparison, all wrapped in a
closed-loop simulation harness.
"""

from .constraints import (AffineConstraint, ConstraintSet,
                          build_constraint_set, expand_rectangle,
                          id_min_doubled, id_min_raw, loss_optimal_id,
                          steady_voltage_rectangle)
from .controller import (ControllerConfig, ControllerState,
                         PredictiveTorqueController, SpeedPi,
                         delay_compensate, observe_disturbance, pi_gains)
from .harness import (CompareResult, Scenario, SimTrace, SimulationDiverged,
                      builtin_scenarios, closed_loop_cost, compare_lp_qp,
                      efficiency_report, field_weakening_metrics,
                      get_scenario, load_scenario, parse_scenario,
                      run_scenario)
from .motor import (DqState, DqVoltage, MechState, MotorParams, default_motor,
                    discrete_one_step, electrical_derivatives, nameplate_motor,
                    power_loss, rpm, step_plant, torque, zoh_matrices)
from .optimizer import (ConvexityError, LeastDistanceProblem, LinearProgramStd,
                        SolveReport, linearize_to_lp, solve, to_least_distance,
                        unconstrained_optimum)
from .qp import QpResult, qp_solve
from .simplex import SimplexResult, SimplexTolerances, simplex, simplex_solve
from .trajectory import (INTERLAY_DELTA, PolyTrajectory, QuadraticProblem,
                         assemble_cost, eval_current, eval_derivative,
                         flat_voltage, sample_constraints, steady_voltage)

__version__ = "0.1.0"

__all__ = [
    "AffineConstraint", "CompareResult", "ConstraintSet", "ControllerConfig",
    "ControllerState", "ConvexityError", "DqState", "DqVoltage",
    "INTERLAY_DELTA", "LeastDistanceProblem", "LinearProgramStd", "MechState",
    "MotorParams", "PolyTrajectory", "PredictiveTorqueController", "QpResult",
    "QuadraticProblem", "Scenario", "SimTrace", "SimplexResult",
    "SimplexTolerances", "SimulationDiverged", "SolveReport", "SpeedPi",
    "assemble_cost", "build_constraint_set", "builtin_scenarios",
    "closed_loop_cost", "compare_lp_qp", "default_motor", "delay_compensate",
    "discrete_one_step", "efficiency_report", "electrical_derivatives",
    "eval_current", "eval_derivative", "expand_rectangle",
    "field_weakening_metrics", "flat_voltage", "get_scenario",
    "id_min_doubled", "id_min_raw", "linearize_to_lp", "load_scenario",
    "loss_optimal_id", "nameplate_motor", "observe_disturbance",
    "parse_scenario", "pi_gains", "power_loss", "qp_solve", "rpm",
    "run_scenario", "sample_constraints", "simplex", "simplex_solve", "solve",
    "steady_voltage", "steady_voltage_rectangle", "step_plant",
    "to_least_distance", "torque", "unconstrained_optimum", "zoh_matrices",
]
