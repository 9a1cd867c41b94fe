"""Polynomial current trajectories and their projection into coefficient space.

Currents over the horizon are cubics in normalized time with the zeroth
coefficients pinned to the measured initial condition. Voltages follow
algebraically from the model equations (differential flatness), so the
optimization never carries voltage variables. The running cost is assembled
exactly from closed-form monomial integrals, and path constraints are
enforced at a handful of samples with an interlay tightening that keeps the
continuous curves inside the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constraints import ConstraintSet
from .motor import DqState, DqVoltage, MotorParams

# interlay tightening for cubic trajectories sampled at T/3 spacing
INTERLAY_DELTA = 0.064

# relative ridge keeping the cost Hessian factorizable when a loss weight
# of zero empties the d-axis block
REGULARIZATION_REL = 1e-12


@dataclass(frozen=True)
class PolyTrajectory:
    """Current trajectories i(t) = sum_k alpha_k (t/T)^k over t in [0, T]."""

    alpha_d: np.ndarray
    alpha_q: np.ndarray
    T: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_d", np.asarray(self.alpha_d, float))
        object.__setattr__(self, "alpha_q", np.asarray(self.alpha_q, float))
        if self.alpha_d.shape != self.alpha_q.shape or self.alpha_d.ndim != 1:
            raise ValueError("coefficient vectors must be 1-d and equally sized")
        if not self.T > 0.0:
            raise ValueError("horizon must be positive")

    @property
    def degree(self) -> int:
        return len(self.alpha_d) - 1

    @classmethod
    def from_free(cls, i0: DqState, free: np.ndarray, T: float) -> "PolyTrajectory":
        """Attach optimized coefficients to the fixed initial condition."""
        free = np.asarray(free, float)
        n = len(free) // 2
        return cls(np.concatenate(([i0.i_d], free[:n])),
                   np.concatenate(([i0.i_q], free[n:])), T)


def _check_time(traj: PolyTrajectory, t: float):
    if not 0.0 <= t <= traj.T:
        raise ValueError(f"t={t} outside horizon [0, {traj.T}]")


def eval_current(traj: PolyTrajectory, t: float) -> DqState:
    _check_time(traj, t)
    s = t / traj.T
    powers = s ** np.arange(len(traj.alpha_d))
    return DqState(float(traj.alpha_d @ powers), float(traj.alpha_q @ powers))


def eval_derivative(traj: PolyTrajectory, t: float) -> tuple[float, float]:
    """Term-wise differentiated series, in A/s."""
    _check_time(traj, t)
    s = t / traj.T
    k = np.arange(1, len(traj.alpha_d))
    dpow = k * s ** (k - 1) / traj.T
    return float(traj.alpha_d[1:] @ dpow), float(traj.alpha_q[1:] @ dpow)


def flat_voltage(traj: PolyTrajectory, t: float, omega: float,
                 p: MotorParams) -> DqVoltage:
    """Voltage that drives the model exactly along the trajectory at time t."""
    cur = eval_current(traj, t)
    did, diq = eval_derivative(traj, t)
    u_d = p.L_d * did + p.R * cur.i_d - p.n_p * omega * p.L_q * cur.i_q
    u_q = p.L_q * diq + p.R * cur.i_q + p.n_p * omega * p.L_d * cur.i_d + p.n_p * omega * p.K
    return DqVoltage(u_d, u_q)


def steady_voltage(i0: DqState, omega: float, p: MotorParams) -> DqVoltage:
    """Voltage holding the currents constant at the given speed."""
    return DqVoltage(
        p.R * i0.i_d - p.n_p * omega * p.L_q * i0.i_q,
        p.R * i0.i_q + p.n_p * omega * p.L_d * i0.i_d + p.n_p * omega * p.K,
    )


@dataclass(frozen=True)
class QuadraticProblem:
    """Cost J(alpha) = alpha' Q alpha + q' alpha + q0 with rows G alpha <= h.

    The free-coefficient ordering is (d1, d2, d3, q1, q2, q3) for cubics.
    """

    Q: np.ndarray
    q: np.ndarray
    q0: float
    G: np.ndarray | None = None
    h: np.ndarray | None = None

    def value(self, alpha) -> float:
        alpha = np.asarray(alpha, float)
        return float(alpha @ self.Q @ alpha + self.q @ alpha + self.q0)

    def with_constraints(self, G, h) -> "QuadraticProblem":
        return replace(self, G=np.asarray(G, float), h=np.asarray(h, float))

    @property
    def n_free(self) -> int:
        return len(self.q)


def assemble_cost(i0: DqState, tau_ref: float, omega: float, loss_weight: float,
                  T: float, p: MotorParams, degree: int = 3) -> QuadraticProblem:
    """Exact quadratic form of the running cost over the polynomial family.

    Integrates squared torque error plus weighted machine losses over the
    horizon and adds the horizon-length-weighted terminal torque error.
    Monomial products integrate in closed form, so the result is exact up
    to roundoff; a tiny relative ridge keeps the Hessian factorizable even
    when the loss weight is zero (which leaves the d axis costless).
    """
    if not T > 0.0:
        raise ValueError("horizon must be positive")
    if loss_weight < 0.0:
        raise ValueError("loss weight must be nonnegative")
    nc = degree + 1
    k = np.arange(nc)
    gram = T / (k[:, None] + k[None, :] + 1.0)    # integral of s^j s^k dt
    first = T / (k + 1.0)                         # integral of s^k dt
    ones = np.ones(nc)                            # s^k at t = T

    c_tau = 1.5 * p.n_p * p.K
    iron = 1.5 * p.n_p * omega * p.k_Fe
    w_dd = loss_weight * (1.5 * p.R + iron * p.L_d ** 2)
    w_qq = c_tau ** 2 + loss_weight * (1.5 * p.R + iron * p.L_q ** 2)

    full_d = w_dd * gram
    full_q = w_qq * gram + T * c_tau ** 2 * np.outer(ones, ones)
    lin_d = loss_weight * iron * 2.0 * p.L_d * p.K * first
    lin_q = -2.0 * c_tau * tau_ref * (first + T * ones)
    const = tau_ref ** 2 * T + loss_weight * iron * p.K ** 2 * T + T * tau_ref ** 2

    def fold(full, lin, a0):
        quad = full[1:, 1:]
        linear = 2.0 * a0 * full[0, 1:] + lin[1:]
        offset = full[0, 0] * a0 ** 2 + lin[0] * a0
        return quad, linear, offset

    qd, ld, od = fold(full_d, lin_d, i0.i_d)
    qq, lq, oq = fold(full_q, lin_q, i0.i_q)

    n = degree
    Q = np.zeros((2 * n, 2 * n))
    Q[:n, :n] = qd
    Q[n:, n:] = qq
    Q += REGULARIZATION_REL * float(np.max(np.diag(Q))) * np.eye(2 * n)
    q = np.concatenate([ld, lq])
    q0 = od + oq + const
    return QuadraticProblem(Q=Q, q=q, q0=float(q0))


def _row_terms(con, s: float, i0: DqState, omega: float, T: float,
               degree: int, p: MotorParams):
    """Free-coefficient gradient and fixed offset of one constraint at s = t/T."""
    k = np.arange(1, degree + 1)
    spow = s ** k
    dpow = k * s ** (k - 1) / T
    g = np.zeros(2 * degree)
    w = 0.0
    if con.c_id:
        g[:degree] += con.c_id * spow
        w += con.c_id * i0.i_d
    if con.c_iq:
        g[degree:] += con.c_iq * spow
        w += con.c_iq * i0.i_q
    if con.c_ud:
        g[:degree] += con.c_ud * (p.L_d * dpow + p.R * spow)
        g[degree:] += con.c_ud * (-p.n_p * omega * p.L_q * spow)
        w += con.c_ud * (p.R * i0.i_d - p.n_p * omega * p.L_q * i0.i_q)
    if con.c_uq:
        g[:degree] += con.c_uq * (p.n_p * omega * p.L_d * spow)
        g[degree:] += con.c_uq * (p.L_q * dpow + p.R * spow)
        w += con.c_uq * (p.R * i0.i_q + p.n_p * omega * p.L_d * i0.i_d
                         + p.n_p * omega * p.K)
    return g, w


def sample_constraints(cs: ConstraintSet, i0: DqState, omega: float, T: float,
                       degree: int, p: MotorParams,
                       delta: float | None = None):
    """Sampled, interlay-tightened constraint rows (G, h) on the free coefficients.

    Current bounds are sampled at k T/n for k = 1..n; the initial sample is
    the fixed measurement and needs no row. Voltage bounds additionally get
    the k = 0 sample because the initial voltage is part of the decision.
    Rows at k >= 1 are tightened toward the bound by delta times the initial
    slack, which keeps the continuous curves from escaping between samples.
    """
    if delta is None:
        if degree != 3:
            raise ValueError("interlay constant is only calibrated for degree 3")
        delta = INTERLAY_DELTA
    rows_g = []
    rows_h = []
    for con in cs.rows():
        g0, w0 = _row_terms(con, 0.0, i0, omega, T, degree, p)
        if con.on_voltage:
            rows_g.append(g0)
            rows_h.append(con.bound - w0)
        for k in range(1, degree + 1):
            gk, wk = _row_terms(con, k / degree, i0, omega, T, degree, p)
            rows_g.append(gk - delta * g0)
            rows_h.append((1.0 - delta) * con.bound + delta * w0 - wk)
    return np.array(rows_g), np.array(rows_h)
