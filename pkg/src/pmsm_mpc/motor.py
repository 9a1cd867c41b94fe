"""Linear dq-frame model of a surface-mounted PMSM.

Electrical dynamics, torque and loss maps, plus the two integrators used
everywhere else: a fixed-step RK4 plant for closed-loop simulation and an
exact zero-order-hold discretization for one-step predictions.

Conventions: currents and voltages are peak values in the rotor-fixed
(d, q) frame, speeds are mechanical rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

FREE_INERTIA = "free-inertia"
SPEED_HELD = "speed-held"

# plant integrator sub-step ceiling [s]; keeps RK4 error well below 1e-9 A
PLANT_MAX_SUBSTEP = 1e-5


def rpm(value: float) -> float:
    """Mechanical speed in rpm to rad/s."""
    return value * 2.0 * math.pi / 60.0


@dataclass(frozen=True)
class MotorParams:
    """Nameplate and model constants (SI units, peak-value convention)."""

    L_d: float          # d-axis inductance [H]
    L_q: float          # q-axis inductance [H]
    R: float            # stator resistance [Ohm]
    K: float            # motor constant [Vs]
    n_p: int            # pole pairs
    k_Fe: float         # hysteresis iron-loss constant [A/(Vs)]
    omega_rated: float  # rated mechanical speed [rad/s]
    i_max: float        # peak current limit [A]
    u_max: float        # peak voltage limit [V]
    tau_rated: float    # rated torque [Nm]

    def __post_init__(self):
        for name in ("L_d", "L_q", "R", "K", "k_Fe", "omega_rated", "i_max", "u_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if self.n_p < 1:
            raise ValueError("n_p must be a positive integer")


def default_motor() -> MotorParams:
    """2.76 kW bench motor in its 250 V test configuration (rated speed cut to 2200 rpm)."""
    return MotorParams(
        L_d=4.8e-3, L_q=7.2e-3, R=0.92, K=0.334, n_p=3, k_Fe=1.27,
        omega_rated=rpm(2200.0), i_max=8.0, u_max=250.0, tau_rated=10.5,
    )


def nameplate_motor() -> MotorParams:
    """Same machine at nameplate ratings (3000 rpm, 330 V peak)."""
    return MotorParams(
        L_d=4.8e-3, L_q=7.2e-3, R=0.92, K=0.334, n_p=3, k_Fe=1.27,
        omega_rated=rpm(3000.0), i_max=8.0, u_max=330.0, tau_rated=10.5,
    )


def _require_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite: {v!r}")


@dataclass(frozen=True)
class DqState:
    """Stator currents in the rotor frame [A, peak]."""

    i_d: float
    i_q: float

    def __post_init__(self):
        _require_finite(i_d=self.i_d, i_q=self.i_q)

    def as_tuple(self):
        return (self.i_d, self.i_q)

    def __add__(self, other: "DqState") -> "DqState":
        return DqState(self.i_d + other.i_d, self.i_q + other.i_q)

    def __sub__(self, other: "DqState") -> "DqState":
        return DqState(self.i_d - other.i_d, self.i_q - other.i_q)


@dataclass(frozen=True)
class DqVoltage:
    """Stator voltages in the rotor frame [V, peak]."""

    u_d: float
    u_q: float

    def __post_init__(self):
        _require_finite(u_d=self.u_d, u_q=self.u_q)

    def as_tuple(self):
        return (self.u_d, self.u_q)

    def __add__(self, other: "DqVoltage") -> "DqVoltage":
        return DqVoltage(self.u_d + other.u_d, self.u_q + other.u_q)

    def __sub__(self, other: "DqVoltage") -> "DqVoltage":
        return DqVoltage(self.u_d - other.u_d, self.u_q - other.u_q)

    def norm(self) -> float:
        return math.hypot(self.u_d, self.u_q)


@dataclass(frozen=True)
class MechState:
    """Mechanical side of the plant.

    In speed-held mode the test bench load drive pins the speed; in
    free-inertia mode the shaft integrates torque against a load.
    """

    omega: float                # mechanical speed [rad/s]
    inertia: float = 1.0        # [kg m^2]
    tau_load: float = 0.0       # [Nm]
    mode: str = SPEED_HELD

    def __post_init__(self):
        if self.mode not in (FREE_INERTIA, SPEED_HELD):
            raise ValueError(f"unknown mechanical mode {self.mode!r}")
        if self.mode == FREE_INERTIA and not self.inertia > 0.0:
            raise ValueError("inertia must be positive in free-inertia mode")
        _require_finite(omega=self.omega)


def electrical_derivatives(s: DqState, u: DqVoltage, omega: float,
                           p: MotorParams) -> tuple[float, float]:
    """Current derivatives (di_d/dt, di_q/dt) in A/s at frozen mechanical speed."""
    di_d = (-p.R * s.i_d + p.n_p * omega * p.L_q * s.i_q + u.u_d) / p.L_d
    di_q = (-p.R * s.i_q - p.n_p * omega * p.L_d * s.i_d - p.n_p * omega * p.K + u.u_q) / p.L_q
    return di_d, di_q


def torque(i_q: float, p: MotorParams) -> float:
    """Electromagnetic torque [Nm]; reluctance contribution neglected."""
    return 1.5 * p.n_p * p.K * i_q


def power_loss(s: DqState, omega: float, p: MotorParams) -> float:
    """Copper plus hysteresis iron losses [W]."""
    copper = 1.5 * p.R * (s.i_d ** 2 + s.i_q ** 2)
    iron = 1.5 * p.n_p * omega * p.k_Fe * (
        (p.L_d * s.i_d + p.K) ** 2 + (p.L_q * s.i_q) ** 2
    )
    return copper + iron


def control_error_power(tau: float, tau_ref: float) -> float:
    """Squared torque tracking error [Nm^2]."""
    return (tau - tau_ref) ** 2


def step_plant(s: DqState, m: MechState, u: DqVoltage, dt: float,
               p: MotorParams) -> tuple[DqState, MechState]:
    """Integrate the plant over dt with the voltage held constant.

    Classical fixed-step RK4 with sub-steps no longer than
    ``PLANT_MAX_SUBSTEP``, so repeated runs produce bit-identical traces.
    Free-inertia mode co-integrates the shaft speed.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    nsub = max(1, math.ceil(dt / PLANT_MAX_SUBSTEP))
    h = dt / nsub
    free = m.mode == FREE_INERTIA
    i_d, i_q, w = s.i_d, s.i_q, m.omega
    u_d, u_q = u.u_d, u.u_q
    ct = 1.5 * p.n_p * p.K

    def rhs(x_d, x_q, x_w):
        did = (-p.R * x_d + p.n_p * x_w * p.L_q * x_q + u_d) / p.L_d
        diq = (-p.R * x_q - p.n_p * x_w * p.L_d * x_d - p.n_p * x_w * p.K + u_q) / p.L_q
        dw = (ct * x_q - m.tau_load) / m.inertia if free else 0.0
        return did, diq, dw

    for _ in range(nsub):
        k1 = rhs(i_d, i_q, w)
        k2 = rhs(i_d + 0.5 * h * k1[0], i_q + 0.5 * h * k1[1], w + 0.5 * h * k1[2])
        k3 = rhs(i_d + 0.5 * h * k2[0], i_q + 0.5 * h * k2[1], w + 0.5 * h * k2[2])
        k4 = rhs(i_d + h * k3[0], i_q + h * k3[1], w + h * k3[2])
        i_d += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        i_q += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        w += h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])

    return DqState(i_d, i_q), replace(m, omega=w)


@lru_cache(maxsize=512)
def _zoh_cached(L_d, L_q, R, K, n_p, omega, Ts):
    a = np.array([[-R / L_d, n_p * omega * L_q / L_d],
                  [-n_p * omega * L_d / L_q, -R / L_q]])
    blk = np.zeros((4, 4))
    blk[:2, :2] = a
    blk[:2, 2:] = np.eye(2)
    e = expm(blk * Ts)
    ad = e[:2, :2]
    s_int = e[:2, 2:]                        # integral of exp(a t) over the step
    bd = s_int @ np.diag([1.0 / L_d, 1.0 / L_q])
    wd = s_int @ np.array([0.0, -n_p * omega * K / L_q])
    for arr in (ad, bd, wd):
        arr.setflags(write=False)
    return ad, bd, wd


def zoh_matrices(omega: float, Ts: float, p: MotorParams):
    """Exact discretization (Ad, Bd, wd) of the electrical subsystem at frozen speed.

    State update: i[k+1] = Ad i[k] + Bd u[k] + wd, where wd carries the
    back-EMF contribution over one period.
    """
    if not Ts > 0.0:
        raise ValueError("Ts must be positive")
    return _zoh_cached(p.L_d, p.L_q, p.R, p.K, p.n_p, omega, Ts)


def discrete_one_step(s: DqState, u: DqVoltage, omega: float, Ts: float,
                      p: MotorParams) -> DqState:
    """One exact zero-order-hold step of the electrical subsystem."""
    ad, bd, wd = zoh_matrices(omega, Ts, p)
    x = ad @ np.array(s.as_tuple()) + bd @ np.array(u.as_tuple()) + wd
    return DqState(float(x[0]), float(x[1]))
