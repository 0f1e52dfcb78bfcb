"""Static ZIP loads and the third-order induction motor model.

The motor is the standard single-cage reduced model: stator transients
neglected, rotor flux kept as a complex EMF behind transient reactance,
slip governed by the swing equation with a quadratic mechanical torque
characteristic.  Parameters are given on the machine MVA base and scaled
to the system base through ``mva_scale``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

__all__ = ["ZipLoadParams", "zip_power",
           "InductionMotorParams", "InductionMotor"]


@dataclass(frozen=True)
class ZipLoadParams:
    """Voltage-dependent static load, fractions must sum to one."""

    p0: float
    q0: float
    z_frac: float = 0.0
    i_frac: float = 0.0
    p_frac: float = 1.0
    v0: float = 1.0

    def __post_init__(self):
        if abs(self.z_frac + self.i_frac + self.p_frac - 1.0) > 1e-12:
            raise ValueError("ZIP fractions must sum to 1")


def zip_power(params: ZipLoadParams, vmag: float) -> complex:
    """Consumed complex power at terminal voltage magnitude ``vmag``."""
    r = vmag / params.v0
    shape = params.z_frac * r * r + params.i_frac * r + params.p_frac
    return complex(params.p0 * shape, params.q0 * shape)


@dataclass(frozen=True)
class InductionMotorParams:
    """Equivalent-circuit data on the machine base plus base scaling."""

    rs: float
    xs: float
    xm: float
    rr: float
    xr: float
    h_m: float
    mva_scale: float = 1.0   # machine base / system base

    @property
    def x_p(self) -> float:
        return self.xs + self.xm * self.xr / (self.xm + self.xr)

    @property
    def x_0(self) -> float:
        return self.xs + self.xm

    def t0_p(self, omega_s: float) -> float:
        return (self.xr + self.xm) / (omega_s * self.rr)


class InductionMotor:
    """Third-order motor: state [re E', im E', slip].

    Mechanical torque is ``tm0 * ((1 - s) / (1 - s0))**2`` so the machine
    produces its rated torque at the initialisation slip and can start
    from standstill against a small load torque.
    """

    N_STATES = 3

    def __init__(self, params: InductionMotorParams, omega_s: float):
        self.p = params
        self.omega_s = omega_s
        self.tm0 = 0.0
        self.s0 = 0.0

    # -- electrical interface (machine base internally) -----------------

    def _stator_current(self, e_p: complex, v: complex) -> complex:
        return (v - e_p) / complex(self.p.rs, self.p.x_p)

    def terminal_power(self, x: np.ndarray, v: complex) -> complex:
        """Consumed P + jQ on the *system* base."""
        e_p = complex(x[0], x[1])
        i = self._stator_current(e_p, v)
        return v * np.conj(i) * self.p.mva_scale

    def electrical_torque(self, x: np.ndarray, v: complex) -> float:
        e_p = complex(x[0], x[1])
        i = self._stator_current(e_p, v)
        return (e_p * np.conj(i)).real

    def mech_torque(self, slip: float) -> float:
        speed = 1.0 - slip
        ref = 1.0 - self.s0
        return self.tm0 * (speed / ref) ** 2

    def derivatives(self, x: np.ndarray, v: complex) -> np.ndarray:
        p = self.p
        t0 = p.t0_p(self.omega_s)
        e_p = complex(x[0], x[1])
        slip = x[2]
        i = self._stator_current(e_p, v)
        de = (-1j * slip * self.omega_s * e_p
              - (e_p - 1j * (p.x_0 - p.x_p) * i) / t0)
        te = (e_p * np.conj(i)).real
        ds = (self.mech_torque(slip) - te) / (2.0 * p.h_m)
        return np.array([de.real, de.imag, ds])

    # -- initialisation --------------------------------------------------

    def _steady_emf(self, slip: float, v: complex) -> complex:
        p = self.p
        t0 = p.t0_p(self.omega_s)
        zs = complex(p.rs, p.x_p)
        num = 1j * (p.x_0 - p.x_p) * v / (t0 * zs)
        den = 1j * slip * self.omega_s + 1.0 / t0 + 1j * (p.x_0 - p.x_p) / (t0 * zs)
        return num / den

    def steady_torque(self, slip: float, v: complex) -> float:
        e_p = self._steady_emf(slip, v)
        i = self._stator_current(e_p, v)
        return (e_p * np.conj(i)).real

    def initialize(self, v: complex, p_target: float) -> np.ndarray:
        """Solve the running equilibrium drawing ``p_target`` (system base).

        Finds the stable (low) slip at which the machine consumes the
        requested active power at terminal voltage ``v``, then fixes the
        load torque to balance there.
        """
        p_mach = p_target / self.p.mva_scale

        def active(slip):
            e_p = self._steady_emf(slip, v)
            i = self._stator_current(e_p, v)
            return (v * np.conj(i)).real - p_mach

        # stable branch lies below the pull-out slip; bracket from zero
        s_hi = 0.5
        while active(s_hi) < 0.0 and s_hi > 1e-4:
            s_hi *= 0.5
        slip = brentq(active, 1e-9, s_hi, xtol=1e-14)

        self.s0 = slip
        self.tm0 = self.steady_torque(slip, v)
        e_p = self._steady_emf(slip, v)
        return np.array([e_p.real, e_p.imag, slip])

    def standstill_state(self) -> np.ndarray:
        """Flux-free at slip one, for switch-in events."""
        return np.array([0.0, 0.0, 1.0])
