"""Discrete-time predictive torque controller.

Each sampling period: advance the stale measurement one step through the
model (computational-delay compensation), assemble the trajectory cost and
sampled constraints at frozen speed, solve, read the initial voltage off
the optimal trajectory, subtract the disturbance estimate and clamp to the
voltage rectangle. A first-order filtered voltage-equivalent residual
observer removes steady-state offsets from model errors such as a wrong
motor constant. An outer PI loop turns speed error into the torque
reference.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import optimizer
from .constraints import ConstraintSet, build_constraint_set
from .motor import DqState, DqVoltage, MotorParams, zoh_matrices
from .qp import qp_solve
from .trajectory import (INTERLAY_DELTA, PolyTrajectory, assemble_cost,
                         flat_voltage, sample_constraints, steady_voltage)

STATUS_OK = "ok"
STATUS_FALLBACK = "fallback"


@dataclass(frozen=True)
class ControllerConfig:
    Ts: float = 125e-6              # sampling period [s]
    T: float = 2e-3                 # optimization horizon [s]
    loss_weight: float = 0.05       # trade-off between tracking and losses
    degree: int = 3                 # trajectory polynomial degree
    interlay: float = INTERLAY_DELTA
    omega_max: float | None = None  # rectangle design speed; motor rated if None
    u_max: float | None = None      # voltage circle radius; motor limit if None
    observer_gain: float = 0.1      # per-sample disturbance filter factor
    kp: float = 1.2                 # speed PI proportional gain [Nm s/rad]
    ki: float = 180.0               # speed PI integral gain [Nm/rad]
    tau_limit: float | None = None  # PI output clamp; motor rated torque if None

    def __post_init__(self):
        if not self.Ts > 0.0 or not self.T > 0.0:
            raise ValueError("periods must be positive")
        if self.T < 4.0 * self.Ts:
            raise ValueError("horizon must span at least four sampling periods")
        if self.loss_weight < 0.0:
            raise ValueError("loss weight must be nonnegative")
        if not 0.0 < self.observer_gain <= 1.0:
            raise ValueError("observer gain must be in (0, 1]")


def pi_gains(inertia: float, bandwidth: float, zeta: float = 1.0):
    """Pole-placement speed PI gains for a pure-inertia mechanical model."""
    return 2.0 * zeta * bandwidth * inertia, bandwidth ** 2 * inertia


@dataclass
class ControllerState:
    u_prev: DqVoltage = field(default_factory=lambda: DqVoltage(0.0, 0.0))
    i_pred_nom: DqState = field(default_factory=lambda: DqState(0.0, 0.0))
    dhat: DqVoltage = field(default_factory=lambda: DqVoltage(0.0, 0.0))
    pi_integral: float = 0.0


@dataclass
class StepDiagnostics:
    status: str
    iterations: int
    active_count: int
    cost: float
    clamped: bool
    solver: str
    solve_seconds: float
    qp_cost: float = float("nan")   # co-solved reference cost, when requested


def delay_compensate(i_meas: DqState, u_prev: DqVoltage, dhat: DqVoltage,
                     omega: float, p: MotorParams, Ts: float) -> DqState:
    """One-step model prediction bridging the computational delay."""
    from .motor import discrete_one_step
    return discrete_one_step(i_meas, u_prev + dhat, omega, Ts, p)


def voltage_residual(i_meas: DqState, i_pred: DqState, omega: float,
                     p: MotorParams, Ts: float) -> DqVoltage:
    """Voltage-equivalent of a one-step prediction error (inverse input map)."""
    _, bd, _ = zoh_matrices(omega, Ts, p)
    r = np.linalg.solve(bd, np.array([i_meas.i_d - i_pred.i_d,
                                      i_meas.i_q - i_pred.i_q]))
    return DqVoltage(float(r[0]), float(r[1]))


def observe_disturbance(i_meas: DqState, i_pred_nom: DqState, dhat: DqVoltage,
                        omega: float, p: MotorParams, Ts: float,
                        gain: float) -> DqVoltage:
    """Filtered update of the voltage-equivalent disturbance estimate.

    The prediction must come from the nominal model driven by the command
    actually applied over the interval, so the raw residual equals the full
    disturbance and the filter fixed point matches it.
    """
    raw = voltage_residual(i_meas, i_pred_nom, omega, p, Ts)
    return DqVoltage((1.0 - gain) * dhat.u_d + gain * raw.u_d,
                     (1.0 - gain) * dhat.u_q + gain * raw.u_q)


class SpeedPi:
    """PI speed controller with output clamp and back-calculation anti-windup."""

    def __init__(self, kp: float, ki: float, tau_limit: float, Ts: float):
        self.kp = kp
        self.ki = ki
        self.tau_limit = tau_limit
        self.Ts = Ts
        self.integral = 0.0

    def reset(self):
        self.integral = 0.0

    def step(self, omega_ref: float, omega: float) -> float:
        err = omega_ref - omega
        raw = self.kp * err + self.integral
        out = min(max(raw, -self.tau_limit), self.tau_limit)
        back = (out - raw) * (self.ki / self.kp) if self.kp else 0.0
        self.integral += self.Ts * (self.ki * err + back)
        self.integral = min(max(self.integral, -self.tau_limit), self.tau_limit)
        return out


class PredictiveTorqueController:
    """Stateful per-sample torque controller (one instance per drive)."""

    def __init__(self, p: MotorParams, cfg: ControllerConfig = ControllerConfig(),
                 solver: str = "lp", cosolve_qp: bool = False):
        if solver not in ("lp", "qp"):
            raise ValueError("solver must be 'lp' or 'qp'")
        self.p = p
        self.cfg = cfg
        self.solver = solver
        self.cosolve_qp = cosolve_qp
        self.cs: ConstraintSet = build_constraint_set(
            p, omega_max=cfg.omega_max, u_max=cfg.u_max)
        self.tau_limit = cfg.tau_limit if cfg.tau_limit is not None else p.tau_rated
        self.speed_pi = SpeedPi(cfg.kp, cfg.ki, self.tau_limit, cfg.Ts)
        self.state = ControllerState()
        self._primed = False

    def reset(self, i_meas: DqState = DqState(0.0, 0.0)):
        self.state = ControllerState(i_pred_nom=i_meas)
        self.speed_pi.reset()
        self._primed = True

    def _plan(self, i0: DqState, omega: float, tau_ref: float):
        cfg = self.cfg
        qp = assemble_cost(i0, tau_ref, omega, cfg.loss_weight, cfg.T, self.p,
                           degree=cfg.degree)
        g, h = sample_constraints(self.cs, i0, omega, cfg.T, cfg.degree, self.p,
                                  delta=cfg.interlay)
        return qp.with_constraints(g, h)

    def step(self, i_meas_prev: DqState, omega: float,
             tau_ref: float) -> tuple[DqVoltage, StepDiagnostics]:
        """Compute the voltage command for the upcoming period.

        ``i_meas_prev`` is the current sampled one interrupt ago, the only
        measurement available when the command must be ready.
        """
        if not self._primed:
            self.reset(i_meas_prev)
        cfg, p, st = self.cfg, self.p, self.state

        st.dhat = observe_disturbance(i_meas_prev, st.i_pred_nom, st.dhat,
                                      omega, p, cfg.Ts, cfg.observer_gain)
        i0 = delay_compensate(i_meas_prev, st.u_prev, st.dhat, omega, p, cfg.Ts)

        problem = self._plan(i0, omega, tau_ref)
        t0 = time.perf_counter()
        qp_cost = float("nan")
        if self.solver == "qp":
            res = qp_solve(problem.Q, problem.q, problem.G, problem.h)
            status = res.status
            iterations = res.iterations
            active = res.active_set
            alpha = res.alpha_star
            cost = problem.value(alpha) if status == "optimal" else float("nan")
        else:
            rep = optimizer.solve(problem)
            status = rep.status
            iterations = rep.iterations
            active = rep.active_constraints
            alpha = rep.alpha_star
            cost = rep.objective
            if self.cosolve_qp:
                ref = qp_solve(problem.Q, problem.q, problem.G, problem.h)
                if ref.status == "optimal":
                    qp_cost = problem.value(ref.alpha_star)
        solve_seconds = time.perf_counter() - t0

        if status == "optimal":
            traj = PolyTrajectory.from_free(i0, alpha, cfg.T)
            u_des = flat_voltage(traj, 0.0, omega, p)
            diag_status = STATUS_OK
        else:
            # hold the current operating point until the problem recovers
            u_des = steady_voltage(i0, omega, p)
            diag_status = f"{STATUS_FALLBACK}:{status}"
            cost = float("nan")

        raw = u_des - st.dhat
        u_d, u_q = self.cs.clamp_voltage(raw.u_d, raw.u_q)
        clamped = (u_d != raw.u_d) or (u_q != raw.u_q)
        u_cmd = DqVoltage(u_d, u_q)

        # bookkeeping for the next cycle: nominal prediction of the sample
        # that will arrive next, driven by the command applied meanwhile
        from .motor import discrete_one_step
        st.i_pred_nom = discrete_one_step(i_meas_prev, st.u_prev, omega, cfg.Ts, p)
        st.u_prev = u_cmd

        diag = StepDiagnostics(
            status=diag_status, iterations=iterations,
            active_count=len(active), cost=cost, clamped=clamped,
            solver=self.solver, solve_seconds=solve_seconds, qp_cost=qp_cost,
        )
        return u_cmd, diag

    def torque_reference(self, omega_ref: float, omega: float) -> float:
        return self.speed_pi.step(omega_ref, omega)
