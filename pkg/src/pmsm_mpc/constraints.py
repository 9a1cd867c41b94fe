"""Affine approximation of the current and voltage limits.

The current region is a box: field-weakening range on the d axis, symmetric
limit on the q axis. The voltage region is a rectangle obtained from a
steady-state analysis at the configured maximum speed, then grown by a
uniform additive margin until the first corner touches the voltage circle.
When the raw rectangle already pokes outside the circle the margin is
clipped at zero and the set is flagged; the rectangle is kept verbatim so
that high-speed operation close to the voltage ceiling stays representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .motor import MotorParams


@dataclass(frozen=True)
class AffineConstraint:
    """One scalar inequality c_id*i_d + c_iq*i_q + c_ud*u_d + c_uq*u_q <= bound."""

    c_id: float
    c_iq: float
    c_ud: float
    c_uq: float
    bound: float

    def __post_init__(self):
        if self.c_id == self.c_iq == self.c_ud == self.c_uq == 0.0:
            raise ValueError("constraint has no nonzero coefficient")

    @property
    def on_voltage(self) -> bool:
        return self.c_ud != 0.0 or self.c_uq != 0.0


@dataclass(frozen=True)
class ExpandedRectangle:
    ud_lo: float
    ud_hi: float
    uq_lo: float
    uq_hi: float
    margin: float           # applied outward margin, >= 0
    margin_signed: float    # root of the corner-on-circle equation (negative: raw rect pokes out)
    infeasible: bool        # True when no outward expansion was possible

    def bounds(self):
        return (self.ud_lo, self.ud_hi, self.uq_lo, self.uq_hi)

    def corner_norms(self):
        return [math.hypot(a, b)
                for a in (self.ud_lo, self.ud_hi)
                for b in (self.uq_lo, self.uq_hi)]


@dataclass(frozen=True)
class ConstraintSet:
    """Box limits on currents plus the expanded voltage rectangle."""

    id_min: float
    iq_max: float
    ud_lo: float
    ud_hi: float
    uq_lo: float
    uq_hi: float
    u_max: float
    omega_max: float
    margin: float
    margin_signed: float
    infeasible_rectangle: bool

    def __post_init__(self):
        if not self.id_min < 0.0:
            raise ValueError("id_min must be negative")
        if not self.iq_max > 0.0:
            raise ValueError("iq_max must be positive")
        if not (self.ud_lo < self.ud_hi and self.uq_lo < self.uq_hi):
            raise ValueError("voltage rectangle bounds inconsistent")

    def rows(self) -> list[AffineConstraint]:
        """The eight scalar inequalities, one-sided, fixed order."""
        return [
            AffineConstraint(1.0, 0.0, 0.0, 0.0, 0.0),
            AffineConstraint(-1.0, 0.0, 0.0, 0.0, -self.id_min),
            AffineConstraint(0.0, 1.0, 0.0, 0.0, self.iq_max),
            AffineConstraint(0.0, -1.0, 0.0, 0.0, self.iq_max),
            AffineConstraint(0.0, 0.0, 1.0, 0.0, self.ud_hi),
            AffineConstraint(0.0, 0.0, -1.0, 0.0, -self.ud_lo),
            AffineConstraint(0.0, 0.0, 0.0, 1.0, self.uq_hi),
            AffineConstraint(0.0, 0.0, 0.0, -1.0, -self.uq_lo),
        ]

    def voltage_corner_norms(self):
        return [math.hypot(a, b)
                for a in (self.ud_lo, self.ud_hi)
                for b in (self.uq_lo, self.uq_hi)]

    def current_corner_norm(self) -> float:
        return math.hypot(self.iq_max, self.id_min)

    def clamp_voltage(self, u_d: float, u_q: float) -> tuple[float, float]:
        return (min(max(u_d, self.ud_lo), self.ud_hi),
                min(max(u_q, self.uq_lo), self.uq_hi))

    def contains_current(self, i_d: float, i_q: float, tol: float = 0.0) -> bool:
        return (self.id_min - tol <= i_d <= tol
                and -self.iq_max - tol <= i_q <= self.iq_max + tol)

    def contains_voltage(self, u_d: float, u_q: float, tol: float = 0.0) -> bool:
        return (self.ud_lo - tol <= u_d <= self.ud_hi + tol
                and self.uq_lo - tol <= u_q <= self.uq_hi + tol)


def loss_optimal_id(p: MotorParams, omega: float) -> float:
    """d-current minimizing the loss map at a given speed (unclipped).

    At standstill the iron term vanishes and copper loss alone drives the
    optimum to zero.
    """
    if p.k_Fe <= 0.0:
        raise ValueError("no iron-loss model: k_Fe must be positive")
    if omega <= 0.0:
        return 0.0
    return -p.L_d * p.K / (p.L_d ** 2 + p.R / (p.n_p * omega * p.k_Fe))


def id_min_raw(p: MotorParams) -> float:
    """Loss-optimal d-current at rated speed; the basis of the box bound."""
    if not p.omega_rated > 0.0:
        raise ValueError("omega_rated must be positive")
    value = loss_optimal_id(p, p.omega_rated)
    if value == 0.0:
        raise ValueError("degenerate loss model at rated speed")
    return value


def id_min_doubled(p: MotorParams) -> float:
    """Doubled box bound, leaving headroom for dynamic field-weakening."""
    return 2.0 * id_min_raw(p)


def steady_voltage_rectangle(p: MotorParams, omega_max: float):
    """Steady-state voltage envelope (ud_lo, ud_hi, uq_lo, uq_hi) at omega_max.

    Built from the extreme corners of the current box; the q-axis upper
    bound carries the full back-EMF and is the largest magnitude that
    appears in motoring operation.
    """
    if not omega_max >= 0.0:
        raise ValueError("omega_max must be nonnegative")
    idm = id_min_doubled(p)
    cross_d = p.n_p * p.L_q * omega_max * p.i_max
    ud_lo = p.R * idm - cross_d
    ud_hi = cross_d
    uq_hi = p.R * p.i_max + p.n_p * p.K * omega_max
    uq_lo = -p.R * p.i_max + p.n_p * p.L_d * omega_max * idm - p.n_p * p.K * omega_max
    return ud_lo, ud_hi, uq_lo, uq_hi


def _corner_margin(a: float, b: float, u_max: float) -> float:
    # largest d with (|a|+d)^2 + (|b|+d)^2 <= u_max^2
    s = abs(a) + abs(b)
    disc = s * s - 2.0 * (a * a + b * b - u_max * u_max)
    if disc < 0.0:
        return -u_max
    return 0.5 * (-s + math.sqrt(disc))


def expand_rectangle(rect, u_max: float) -> ExpandedRectangle:
    """Grow the rectangle by one additive margin until a corner hits the circle.

    The signed root is reported either way; the applied margin is clipped
    at zero when the raw rectangle already violates the circle, and the
    set is flagged for diagnostics.
    """
    if not u_max > 0.0:
        raise ValueError("u_max must be positive")
    ud_lo, ud_hi, uq_lo, uq_hi = rect
    signed = min(_corner_margin(a, b, u_max)
                 for a in (ud_lo, ud_hi) for b in (uq_lo, uq_hi))
    applied = max(0.0, signed)
    return ExpandedRectangle(
        ud_lo=ud_lo - applied, ud_hi=ud_hi + applied,
        uq_lo=uq_lo - applied, uq_hi=uq_hi + applied,
        margin=applied, margin_signed=signed, infeasible=signed < 0.0,
    )


def build_constraint_set(p: MotorParams, omega_max: float | None = None,
                         u_max: float | None = None) -> ConstraintSet:
    """Compose current box and expanded voltage rectangle into one set."""
    omega_max = p.omega_rated if omega_max is None else omega_max
    u_max = p.u_max if u_max is None else u_max
    rect = steady_voltage_rectangle(p, omega_max)
    exp = expand_rectangle(rect, u_max)
    return ConstraintSet(
        id_min=id_min_doubled(p), iq_max=p.i_max,
        ud_lo=exp.ud_lo, ud_hi=exp.ud_hi, uq_lo=exp.uq_lo, uq_hi=exp.uq_hi,
        u_max=u_max, omega_max=omega_max,
        margin=exp.margin, margin_signed=exp.margin_signed,
        infeasible_rectangle=exp.infeasible,
    )
