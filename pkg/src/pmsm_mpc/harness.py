"""Closed-loop scenario runner, trace recording and solver comparisons.

Timing contract per period: at each interrupt the previously computed
command starts acting and the current is sampled; the controller works
from the sample taken one interrupt earlier. The plant integrates between
interrupts with the command held. Traces record true plant signals plus
per-solve diagnostics and serialize to deterministic CSV.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import build_constraint_set, loss_optimal_id
from .controller import ControllerConfig, PredictiveTorqueController
from .motor import (FREE_INERTIA, SPEED_HELD, DqState, DqVoltage, MechState,
                    MotorParams, default_motor, power_loss, rpm, step_plant,
                    torque)

TRACE_COLUMNS = ("time", "omega", "i_d", "i_q", "u_d", "u_q", "tau", "tau_ref",
                 "dhat_d", "dhat_q", "iterations", "active_constraints",
                 "cost", "status")

DIVERGENCE_FACTOR = 10.0
DEFAULT_INERTIA = 2e-3          # motor plus coupling guess [kg m^2]
FW_DURATION_BAND = 0.1          # [A] below steady value counted as excursion

TORQUE_CONTROL = "torque-control"
SPEED_CONTROL = "speed-control"


class SimulationDiverged(RuntimeError):
    pass


class TraceInvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str                                   # torque-control | speed-control
    schedule: tuple[tuple[float, float], ...]   # (time, value) reference steps
    speed_held: float | None = None             # imposed speed in torque mode [rad/s]
    inertia: float = DEFAULT_INERTIA
    tau_load: float = 0.0
    plant_overrides: dict = field(default_factory=dict)
    controller_overrides: dict = field(default_factory=dict)
    solver: str = "lp"                          # lp | qp | both
    duration: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (TORQUE_CONTROL, SPEED_CONTROL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.duration > 0.0:
            raise ValueError("duration must be positive")
        times = [t for t, _ in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule times must be strictly increasing")
        if self.mode == TORQUE_CONTROL and self.speed_held is None:
            raise ValueError("torque-control scenarios need a held speed")
        if self.solver not in ("lp", "qp", "both"):
            raise ValueError(f"unknown solver {self.solver!r}")


def schedule_value(schedule, t: float) -> float:
    value = 0.0
    for when, level in schedule:
        if t >= when:
            value = level
        else:
            break
    return value


@dataclass
class SimTrace:
    scenario: str
    solver: str
    Ts: float
    time: np.ndarray
    omega: np.ndarray
    i_d: np.ndarray
    i_q: np.ndarray
    u_d: np.ndarray
    u_q: np.ndarray
    tau: np.ndarray
    tau_ref: np.ndarray
    dhat_d: np.ndarray
    dhat_q: np.ndarray
    iterations: np.ndarray
    active_constraints: np.ndarray
    cost: np.ndarray
    status: list[str]
    qp_cost: np.ndarray | None = None       # co-solved reference, when recorded
    solve_seconds: np.ndarray | None = None

    def __len__(self):
        return len(self.time)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(",".join(TRACE_COLUMNS) + "\n")
        for k in range(len(self.time)):
            row = [f"{self.time[k]:.12g}", f"{self.omega[k]:.12g}",
                   f"{self.i_d[k]:.12g}", f"{self.i_q[k]:.12g}",
                   f"{self.u_d[k]:.12g}", f"{self.u_q[k]:.12g}",
                   f"{self.tau[k]:.12g}", f"{self.tau_ref[k]:.12g}",
                   f"{self.dhat_d[k]:.12g}", f"{self.dhat_q[k]:.12g}",
                   str(int(self.iterations[k])),
                   str(int(self.active_constraints[k])),
                   f"{self.cost[k]:.12g}", self.status[k]]
            out.write(",".join(row) + "\n")
        return out.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())

    def steady_tail(self, column: str, fraction: float = 0.1) -> np.ndarray:
        values = getattr(self, column)
        n = max(1, int(len(values) * fraction))
        return values[-n:]


def closed_loop_cost(trace: SimTrace, p: MotorParams, loss_weight: float) -> float:
    """Time-integrated tracking error plus weighted losses along the trace."""
    total = 0.0
    for k in range(len(trace)):
        s = DqState(trace.i_d[k], trace.i_q[k])
        err = (trace.tau[k] - trace.tau_ref[k]) ** 2
        total += (err + loss_weight * power_loss(s, trace.omega[k], p)) * trace.Ts
    return total


def field_weakening_metrics(trace: SimTrace, band: float = FW_DURATION_BAND):
    """Depth [A] and duration [s] of the transient d-current excursion."""
    steady = float(np.median(trace.steady_tail("i_d")))
    depth = steady - float(np.min(trace.i_d))
    duration = float(np.sum(trace.i_d < steady - band)) * trace.Ts
    return {"steady": steady, "depth": depth, "duration": duration}


def _make_controller(sc: Scenario, cfg: ControllerConfig, p: MotorParams,
                     solver: str, cosolve: bool) -> PredictiveTorqueController:
    if sc.controller_overrides:
        cfg = replace(cfg, **sc.controller_overrides)
    return PredictiveTorqueController(p, cfg, solver=solver, cosolve_qp=cosolve)


def run_scenario(sc: Scenario, cfg: ControllerConfig | None = None,
                 p: MotorParams | None = None, solver: str | None = None,
                 cosolve: bool = False, validate: bool = True) -> SimTrace:
    """Simulate one closed-loop scenario and return its trace."""
    p = default_motor() if p is None else p
    cfg = ControllerConfig() if cfg is None else cfg
    solver = sc.solver if solver is None else solver
    if solver == "both":
        raise ValueError("run_scenario handles one solver; use compare_lp_qp")

    p_plant = replace(p, **sc.plant_overrides) if sc.plant_overrides else p
    ctl = _make_controller(sc, cfg, p, solver, cosolve)
    ts = ctl.cfg.Ts
    steps = max(1, int(round(sc.duration / ts)))

    if sc.mode == TORQUE_CONTROL:
        mech = MechState(omega=sc.speed_held, mode=SPEED_HELD)
    else:
        mech = MechState(omega=0.0, inertia=sc.inertia, tau_load=sc.tau_load,
                         mode=FREE_INERTIA)
    plant = DqState(0.0, 0.0)
    ctl.reset(plant)
    meas_prev = plant
    omega_prev = mech.omega

    cols = {name: np.zeros(steps) for name in
            ("time", "omega", "i_d", "i_q", "u_d", "u_q", "tau", "tau_ref",
             "dhat_d", "dhat_q", "iterations", "active_constraints", "cost",
             "qp_cost", "solve_seconds")}
    status: list[str] = []

    for k in range(steps):
        t = k * ts
        if sc.mode == TORQUE_CONTROL:
            tau_ref = schedule_value(sc.schedule, t)
        else:
            omega_ref = schedule_value(sc.schedule, t)
            tau_ref = ctl.torque_reference(omega_ref, omega_prev)

        u_cmd, diag = ctl.step(meas_prev, omega_prev, tau_ref)

        cols["time"][k] = t
        cols["omega"][k] = mech.omega
        cols["i_d"][k] = plant.i_d
        cols["i_q"][k] = plant.i_q
        cols["u_d"][k] = u_cmd.u_d
        cols["u_q"][k] = u_cmd.u_q
        cols["tau"][k] = torque(plant.i_q, p)
        cols["tau_ref"][k] = tau_ref
        cols["dhat_d"][k] = ctl.state.dhat.u_d
        cols["dhat_q"][k] = ctl.state.dhat.u_q
        cols["iterations"][k] = diag.iterations
        cols["active_constraints"][k] = diag.active_count
        cols["cost"][k] = diag.cost
        cols["qp_cost"][k] = diag.qp_cost
        cols["solve_seconds"][k] = diag.solve_seconds
        status.append(diag.status + ("|clamp" if diag.clamped else ""))

        meas_prev = plant
        omega_prev = mech.omega
        plant, mech = step_plant(plant, mech, u_cmd, ts, p_plant)
        if math.hypot(plant.i_d, plant.i_q) > DIVERGENCE_FACTOR * p.i_max:
            raise SimulationDiverged(
                f"{sc.name}: current {plant!r} at t={t + ts:.6f}s exceeds "
                f"{DIVERGENCE_FACTOR} x i_max")

    trace = SimTrace(
        scenario=sc.name, solver=solver, Ts=ts,
        time=cols["time"], omega=cols["omega"], i_d=cols["i_d"],
        i_q=cols["i_q"], u_d=cols["u_d"], u_q=cols["u_q"], tau=cols["tau"],
        tau_ref=cols["tau_ref"], dhat_d=cols["dhat_d"], dhat_q=cols["dhat_q"],
        iterations=cols["iterations"],
        active_constraints=cols["active_constraints"], cost=cols["cost"],
        status=status, qp_cost=cols["qp_cost"],
        solve_seconds=cols["solve_seconds"],
    )
    if validate:
        validate_trace(trace, ctl, p)
    return trace


def validate_trace(trace: SimTrace, ctl: PredictiveTorqueController,
                   p: MotorParams):
    """Hard invariants every emitted trace must satisfy."""
    cs = ctl.cs
    tol_u = 1e-9
    if (np.any(trace.u_d < cs.ud_lo - tol_u) or np.any(trace.u_d > cs.ud_hi + tol_u)
            or np.any(trace.u_q < cs.uq_lo - tol_u)
            or np.any(trace.u_q > cs.uq_hi + tol_u)):
        raise TraceInvariantViolation(f"{trace.scenario}: voltage outside rectangle")
    margin = 0.01 * p.i_max
    if (np.any(trace.i_d < cs.id_min - margin) or np.any(trace.i_d > margin)
            or np.any(np.abs(trace.i_q) > cs.iq_max + margin)):
        raise TraceInvariantViolation(f"{trace.scenario}: current outside box")


@dataclass
class CompareResult:
    lp: SimTrace
    qp: SimTrace
    cost_gap: np.ndarray            # per-instance J_lp - J_qp on the lp run
    cost_gap_min: float
    median_relative_excess: float
    lp_metrics: dict
    qp_metrics: dict


def compare_lp_qp(sc: Scenario, cfg: ControllerConfig | None = None,
                  p: MotorParams | None = None) -> CompareResult:
    """Run the scenario under both solvers and summarize the differences.

    Per-instance cost gaps come from co-solving each problem of the
    lp-driven run with the reference solver, so both costs refer to the
    identical problem data.
    """
    lp_trace = run_scenario(sc, cfg, p, solver="lp", cosolve=True)
    qp_trace = run_scenario(sc, cfg, p, solver="qp")
    ok = np.isfinite(lp_trace.cost) & np.isfinite(lp_trace.qp_cost)
    gap = lp_trace.cost[ok] - lp_trace.qp_cost[ok]
    scale = np.maximum(np.abs(lp_trace.qp_cost[ok]), 1e-12)
    rel = gap / scale
    return CompareResult(
        lp=lp_trace, qp=qp_trace, cost_gap=gap,
        cost_gap_min=float(gap.min()) if len(gap) else 0.0,
        median_relative_excess=float(np.median(rel)) if len(rel) else 0.0,
        lp_metrics=field_weakening_metrics(lp_trace),
        qp_metrics=field_weakening_metrics(qp_trace),
    )


@dataclass
class EfficiencyReport:
    omega: float
    tau: float
    i_q: float
    id_optimal: float       # loss-optimal d-current clipped to the box
    loss_optimal: float
    loss_zero_id: float
    improvement: float      # fractional loss reduction

    def improvement_percent(self) -> float:
        return 100.0 * self.improvement


def efficiency_report(omega: float, tau: float, p: MotorParams | None = None,
                      cfg: ControllerConfig | None = None) -> EfficiencyReport:
    """Steady-state loss with optimized d-current versus zero d-current."""
    p = default_motor() if p is None else p
    cfg = ControllerConfig() if cfg is None else cfg
    cs = build_constraint_set(p, omega_max=cfg.omega_max, u_max=cfg.u_max)
    i_q = tau / (1.5 * p.n_p * p.K)
    ido = min(max(loss_optimal_id(p, omega), cs.id_min), 0.0)
    loss_opt = power_loss(DqState(ido, i_q), omega, p)
    loss_zero = power_loss(DqState(0.0, i_q), omega, p)
    improvement = (loss_zero - loss_opt) / loss_zero if loss_zero > 0.0 else 0.0
    return EfficiencyReport(omega=omega, tau=tau, i_q=i_q, id_optimal=ido,
                            loss_optimal=loss_opt, loss_zero_id=loss_zero,
                            improvement=improvement)


# --- scenario files -------------------------------------------------------

_SCENARIO_KEYS = ("name", "mode", "reference", "speed", "inertia", "tau_load",
                  "solver", "duration", "seed")


def _parse_number(text: str) -> float:
    text = text.strip()
    if text.lower().endswith("rpm"):
        return rpm(float(text[:-3]))
    return float(text)


def _parse_schedule(text: str):
    pairs = []
    for chunk in text.split(","):
        when, _, level = chunk.partition(":")
        pairs.append((float(when), _parse_number(level)))
    return tuple(pairs)


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse the plain-text key = value scenario format (see README)."""
    fields: dict = {"name": name}
    plant: dict = {}
    controller: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        value = value.strip()
        if key.startswith("plant."):
            plant[key[6:]] = _parse_number(value)
        elif key.startswith("controller."):
            sub = key[11:]
            controller[sub] = int(value) if sub == "degree" else _parse_number(value)
        elif key == "reference":
            fields["schedule"] = _parse_schedule(value)
        elif key == "speed":
            fields["speed_held"] = _parse_number(value)
        elif key in ("duration", "inertia", "tau_load"):
            fields[key] = float(value)
        elif key == "seed":
            fields["seed"] = int(value)
        elif key in ("name", "mode", "solver"):
            fields[key] = value
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    fields.setdefault("schedule", ())
    if plant:
        fields["plant_overrides"] = plant
    if controller:
        fields["controller_overrides"] = controller
    return Scenario(**fields)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    import os
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_scenario(text, name=stem)


# --- built-in scenario library --------------------------------------------

def builtin_scenarios() -> dict[str, Scenario]:
    """Reference situations used by the experiments and the acceptance suite."""
    p = default_motor()
    rated = p.tau_rated
    lib = {
        "torque_step_standstill": Scenario(
            name="torque_step_standstill", mode=TORQUE_CONTROL,
            schedule=((0.0, 0.0), (2e-3, rated)), speed_held=0.0,
            duration=0.012),
        "torque_step_midspeed": Scenario(
            name="torque_step_midspeed", mode=TORQUE_CONTROL,
            schedule=((0.0, 0.0), (10e-3, rated)), speed_held=rpm(2000.0),
            duration=0.05),
        "torque_step_highspeed": Scenario(
            name="torque_step_highspeed", mode=TORQUE_CONTROL,
            schedule=((0.0, 0.0), (10e-3, rated)), speed_held=rpm(2400.0),
            duration=0.04,
            controller_overrides={"omega_max": rpm(2400.0)}),
        "torque_step_highspeed_novolt": Scenario(
            name="torque_step_highspeed_novolt", mode=TORQUE_CONTROL,
            schedule=((0.0, 0.0), (10e-3, rated)), speed_held=rpm(2400.0),
            duration=0.04,
            controller_overrides={"omega_max": rpm(2400.0), "u_max": 1e6}),
        "k_error_rejection": Scenario(
            name="k_error_rejection", mode=TORQUE_CONTROL,
            schedule=((0.0, rated),), speed_held=rpm(2000.0),
            duration=0.04, plant_overrides={"K": 1.1 * p.K}),
        "speed_steps": Scenario(
            name="speed_steps", mode=SPEED_CONTROL,
            schedule=((5e-3, rpm(1000.0)), (60e-3, rpm(2000.0))),
            duration=0.12),
    }
    return lib


def get_scenario(name_or_path) -> Scenario:
    lib = builtin_scenarios()
    text = str(name_or_path)
    if text in lib:
        return lib[text]
    import os
    if os.path.exists(text):
        return load_scenario(text)
    raise KeyError(f"no builtin scenario or file named {text!r}; "
                   f"builtins: {sorted(lib)}")
