"""Radial distribution feeders and the distribution-side sub-system.

A feeder is a radial tree of series branches fed from a substation node.
Node components are static ZIP loads and induction motors.  The feeder
power flow is a backward/forward sweep: node currents are accumulated
toward the substation, then voltages are propagated outward, iterating
because load currents depend on node voltage.

The ``DistributionSubSystem`` wraps one or more feeders hanging off a
single transmission interface bus.  Its macro step is: solve the feeder
power flow at the new substation voltage, advance every motor with its
terminal voltage frozen, then solve the power flow again so the reported
source power is consistent with the post-step states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cosim import CosimError, SubSystem
from .integrators import rk_component_step
from .loads import InductionMotor, ZipLoadParams, zip_power

__all__ = ["FeederBranch", "MotorUnit", "DistributionFeeder",
           "DistributionSubSystem", "FeederError"]


class FeederError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeederBranch:
    parent: int
    child: int
    r: float
    x: float

    @property
    def z(self) -> complex:
        return complex(self.r, self.x)


@dataclass
class MotorUnit:
    """One motor instance attached to a feeder node."""

    name: str
    node: int
    motor: InductionMotor
    p_target: float          # consumed active power at initialisation
    state: np.ndarray = field(default_factory=lambda: np.zeros(3))
    active: bool = True


class DistributionFeeder:
    """Radial tree with node 0 as the substation."""

    def __init__(self, branches: list[FeederBranch],
                 zip_loads: dict[int, ZipLoadParams] | None = None,
                 motors: list[MotorUnit] | None = None,
                 active: bool = True):
        self.branches = list(branches)
        self.zip_loads = dict(zip_loads or {})
        self.motors = list(motors or [])
        self.active = active

        nodes = {0}
        for br in self.branches:
            if br.parent not in nodes:
                raise FeederError("branches must be listed parent-first")
            if br.child in nodes:
                raise FeederError(f"node {br.child} has two parents")
            nodes.add(br.child)
        self.n_nodes = len(nodes)
        self.v = np.ones(self.n_nodes, dtype=complex)

    # -- power flow -------------------------------------------------------

    def node_currents(self) -> np.ndarray:
        """Current drawn at each node by its components (system base)."""
        i = np.zeros(self.n_nodes, dtype=complex)
        for node, zl in self.zip_loads.items():
            s = zip_power(zl, abs(self.v[node]))
            i[node] += np.conj(s / self.v[node])
        for mu in self.motors:
            if not mu.active:
                continue
            s = mu.motor.terminal_power(mu.state, self.v[mu.node])
            i[mu.node] += np.conj(s / self.v[mu.node])
        return i

    def sweep(self, v_sub: complex, tol: float = 1e-8,
              max_iter: int = 100) -> complex:
        """Backward/forward sweep; returns the substation source current."""
        self.v[0] = v_sub
        i_src = 0.0 + 0.0j
        for _ in range(max_iter):
            inode = self.node_currents()
            # backward: accumulate branch currents toward the root
            ibr = np.zeros(len(self.branches), dtype=complex)
            acc = inode.copy()
            for k in range(len(self.branches) - 1, -1, -1):
                br = self.branches[k]
                ibr[k] = acc[br.child]
                acc[br.parent] += ibr[k]
            # forward: push voltages out from the substation
            v_new = self.v.copy()
            v_new[0] = v_sub
            for k, br in enumerate(self.branches):
                v_new[br.child] = v_new[br.parent] - br.z * ibr[k]
            delta = np.max(np.abs(v_new - self.v))
            self.v = v_new
            i_src = acc[0]
            if delta < tol:
                return i_src
        raise FeederError("feeder sweep did not converge")

    def source_power(self, v_sub: complex) -> complex:
        return v_sub * np.conj(self.sweep(v_sub))

    # -- dynamics -----------------------------------------------------------

    def step_motors(self, h: float, tol: float = 1e-6) -> None:
        for mu in self.motors:
            if not mu.active:
                continue
            v_node = complex(self.v[mu.node])
            mu.state = rk_component_step(
                lambda x, _u, v=v_node, m=mu.motor: m.derivatives(x, v),
                mu.state, None, h, tol=tol)

    def initialize(self, v_sub: complex, max_iter: int = 50) -> None:
        """Fixed point of sweep + motor equilibrium at node voltages."""
        self.v[:] = v_sub
        for _ in range(max_iter):
            v_old = self.v.copy()
            for mu in self.motors:
                if mu.active:
                    mu.state = mu.motor.initialize(
                        complex(self.v[mu.node]), mu.p_target)
            self.sweep(v_sub)
            if np.max(np.abs(self.v - v_old)) < 1e-12:
                return
        raise FeederError("feeder initialisation did not converge")


class DistributionSubSystem(SubSystem):
    """Feeders at one interface bus.  Input [e, f]; output consumed [P, Q]."""

    def __init__(self, name: str, feeders: list[DistributionFeeder],
                 rk_tol: float = 1e-6):
        self.name = name
        self.feeders = list(feeders)
        self.rk_tol = rk_tol
        self.current_input = np.array([1.0, 0.0])
        self._output = np.zeros(2)

    def _v_sub(self) -> complex:
        return complex(self.current_input[0], self.current_input[1])

    def _total_power(self) -> complex:
        v = self._v_sub()
        s = 0.0 + 0.0j
        for fd in self.feeders:
            if fd.active:
                s += fd.source_power(v)
        return s

    def initialize(self, inputs: np.ndarray) -> None:
        self.current_input = np.asarray(inputs, dtype=float).copy()
        v = self._v_sub()
        for fd in self.feeders:
            if fd.active:
                fd.initialize(v)
        s = self._total_power()
        self._output = np.array([s.real, s.imag])

    def set_input(self, u: np.ndarray) -> None:
        self.current_input = np.asarray(u, dtype=float).copy()

    def advance(self, h: float) -> None:
        v = self._v_sub()
        for fd in self.feeders:
            if fd.active:
                fd.sweep(v)
                fd.step_motors(h, tol=self.rk_tol)
        s = self._total_power()
        if not np.isfinite(s.real) or not np.isfinite(s.imag):
            raise OverflowError("distribution state is non-finite")
        self._output = np.array([s.real, s.imag])

    def output(self) -> np.ndarray:
        return self._output.copy()

    def snapshot(self):
        out = {}
        for k, fd in enumerate(self.feeders):
            for mu in fd.motors:
                out[f"{mu.name}.slip"] = float(mu.state[2])
            for node in range(fd.n_nodes):
                out[f"f{k}.v{node}"] = float(abs(fd.v[node]))
        return out

    def apply_event(self, action: str, params) -> None:
        if action == "connect_motor":
            mu = self._find_motor(params["name"])
            mu.state = mu.motor.standstill_state()
            # load torque referenced to rated consumption at nominal volts
            mu.motor.initialize(1.0 + 0.0j, mu.p_target)
            mu.state = mu.motor.standstill_state()
            mu.active = True
        elif action == "disconnect_motor":
            self._find_motor(params["name"]).active = False
        elif action == "connect_feeder":
            fd = self.feeders[int(params["index"])]
            fd.active = True
            fd.initialize(self._v_sub())
        elif action == "disconnect_feeder":
            self.feeders[int(params["index"])].active = False
        else:
            raise CosimError(f"unknown distribution event {action!r}")
        # the interface sees topology changes immediately
        s = self._total_power()
        self._output = np.array([s.real, s.imag])

    def _find_motor(self, name: str) -> MotorUnit:
        for fd in self.feeders:
            for mu in fd.motors:
                if mu.name == name:
                    return mu
        raise CosimError(f"no motor named {name!r}")
