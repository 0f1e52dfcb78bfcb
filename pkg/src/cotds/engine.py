"""Scenario semantics: wiring power models into the co-simulation core.

A scenario names a transmission dataset, attaches distribution feeders to
interface buses, and selects a coupling method and macro step.  Besides
the two coupling schedules there is a monolithic reference mode that
stacks every equation into one DAE and integrates it with a single
trapezoidal solver; it shares the model objects with the co-simulation
path so any disagreement between the two is coupling error, not modeling
error.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .cosim import (CosimError, CouplingLink, CouplingMethod,
                    CouplingSchedule, Event, TimeSeriesLog, run_cosimulation)
from .feeder import (DistributionFeeder, DistributionSubSystem, FeederBranch,
                     MotorUnit)
from .integrators import DaeSystem, NewtonConfig, trapezoidal_dae_step
from .loads import (InductionMotor, InductionMotorParams, ZipLoadParams,
                    zip_power)
from .machines import GeneratorBank
from .power_network import load_network
from .transmission import TransmissionDae, TransmissionSubSystem

__all__ = [
    "RunMethod", "MotorSpec", "FeederSpec", "Scenario", "RunResult",
    "Verdict", "build_subsystems", "iterative_td_powerflow_init",
    "run_scenario", "detect_convergence", "compare_runs", "EngineError",
]


class EngineError(RuntimeError):
    pass


class RunMethod(enum.Enum):
    PARALLEL = "parallel"
    SERIES = "series"
    MONOLITHIC = "monolithic"


class Verdict(enum.Enum):
    CONVERGED = "Converged"
    OSCILLATORY = "Oscillatory"
    DIVERGED = "Diverged"


@dataclass(frozen=True)
class MotorSpec:
    """One induction motor: ``share`` of the feeder's total motor power."""

    name: str
    node: int
    share: float
    machine: InductionMotorParams
    active: bool = True


@dataclass(frozen=True)
class FeederSpec:
    bus: int
    branches: tuple[FeederBranch, ...]
    loads: tuple[tuple[int, float, float], ...]  # (node, p, q)
    static_fraction: float
    zip_fractions: tuple[float, float, float]  # (z, i, p)
    motors: tuple[MotorSpec, ...]
    active: bool = True

    def __post_init__(self):
        if not (0.0 <= self.static_fraction <= 1.0):
            raise ValueError("static_fraction must be in [0, 1]")
        if abs(sum(self.zip_fractions) - 1.0) > 1e-9:
            raise ValueError("zip fractions must sum to 1")
        if self.motors:
            total = sum(m.share for m in self.motors)
            if abs(total - 1.0) > 1e-9:
                raise ValueError("motor shares must sum to 1")

    @property
    def p_total(self) -> float:
        return sum(p for _, p, _ in self.loads)


@dataclass
class Scenario:
    name: str
    transmission: str
    feeders: list[FeederSpec]
    events: list[Event] = field(default_factory=list)
    method: RunMethod = RunMethod.SERIES
    h_macro: float = 0.006
    n_micro: int = 1
    t_end: float = 10.0
    rk_tol: float = 1e-6
    channels: list[str] = field(default_factory=list)

    def __post_init__(self):
        net = load_network(self.transmission)
        for fs in self.feeders:
            if fs.bus not in net.bus_ids:
                raise EngineError(f"feeder bound to unknown bus {fs.bus}")

    def without_events(self) -> "Scenario":
        s = Scenario.__new__(Scenario)
        s.__dict__.update(self.__dict__)
        s.events = []
        return s


@dataclass
class RunResult:
    scenario: str
    method: RunMethod
    h_macro: float
    log: TimeSeriesLog
    verdict: Verdict
    wall_time: float


# -- construction -----------------------------------------------------------


def _build_feeder(fs: FeederSpec, omega_s: float) -> DistributionFeeder:
    motor_budget = (1.0 - fs.static_fraction) * fs.p_total
    zips = {}
    for node, p, q in fs.loads:
        zp, zi, zc = fs.zip_fractions
        zips[node] = ZipLoadParams(p0=fs.static_fraction * p,
                                   q0=fs.static_fraction * q,
                                   z_frac=zp, i_frac=zi, p_frac=zc)
    motors = []
    for ms in fs.motors:
        motor = InductionMotor(ms.machine, omega_s)
        motors.append(MotorUnit(name=ms.name, node=ms.node, motor=motor,
                                p_target=ms.share * motor_budget,
                                active=ms.active))
    return DistributionFeeder(list(fs.branches), zips, motors,
                              active=fs.active)


def build_subsystems(scenario: Scenario):
    """Returns (subsystems dict, links, interface bus order)."""
    net = load_network(scenario.transmission)
    bank = GeneratorBank.from_params(net.gen_params, net.omega_s)

    by_bus: dict[int, list[DistributionFeeder]] = {}
    for fs in scenario.feeders:
        by_bus.setdefault(fs.bus, []).append(_build_feeder(fs, net.omega_s))
    interface_buses = sorted(by_bus)

    # nominal loads at feeder buses are replaced by the feeders themselves;
    # any remaining transmission load stays as constant-power ZIP
    static = {bus: ZipLoadParams(p0=s.real, q0=s.imag)
              for bus, s in net.loads.items() if bus not in by_bus}

    dae = TransmissionDae(net, bank, static, interface_buses)
    tsub = TransmissionSubSystem("T", dae)
    subsystems = {"T": tsub}
    links = []
    for k, bus in enumerate(interface_buses):
        name = f"D{bus}"
        subsystems[name] = DistributionSubSystem(
            name, by_bus[bus], rk_tol=scenario.rk_tol)
        links.append(CouplingLink("T", (2 * k, 2 * k + 2), name, (0, 2)))
        links.append(CouplingLink(name, (0, 2), "T", (2 * k, 2 * k + 2)))
    return subsystems, links, interface_buses


def iterative_td_powerflow_init(tsub: TransmissionSubSystem,
                                dsubs: dict[str, DistributionSubSystem],
                                interface_buses: list[int],
                                tol: float = 1e-8,
                                max_outer: int = 50) -> None:
    """Alternate transmission and feeder power flows to a fixed point.

    On return every sub-system's output is consistent with every other's
    input, and all internal states are at equilibrium.
    """
    u_t = np.zeros(2 * len(interface_buses))
    for k, bus in enumerate(interface_buses):
        d = dsubs[f"D{bus}"]
        s = sum(complex(p, q) for fd in d.feeders if fd.active
                for _, p, q in _feeder_nominal(fd))
        u_t[2 * k], u_t[2 * k + 1] = s.real, s.imag

    for _ in range(max_outer):
        tsub.initialize(u_t)
        v_if = tsub.output()
        u_new = np.empty_like(u_t)
        for k, bus in enumerate(interface_buses):
            d = dsubs[f"D{bus}"]
            d.initialize(v_if[2 * k:2 * k + 2])
            u_new[2 * k:2 * k + 2] = d.output()
        if np.max(np.abs(u_new - u_t)) <= tol:
            tsub.set_input(u_new)
            tsub.initialize(u_new)
            v_if = tsub.output()
            for k, bus in enumerate(interface_buses):
                dsubs[f"D{bus}"].initialize(v_if[2 * k:2 * k + 2])
            return
        u_t = u_new
    raise EngineError("T-D power flow initialisation did not converge")


def _feeder_nominal(fd: DistributionFeeder):
    out = []
    for node, zl in fd.zip_loads.items():
        out.append((node, zl.p0, zl.q0))
    for mu in fd.motors:
        if mu.active:
            # reactive guess: rated power factor ~0.9 lagging
            out.append((mu.node, mu.p_target, 0.48 * mu.p_target))
    return out


# -- convergence detector and comparison ------------------------------------


def detect_convergence(log: TimeSeriesLog,
                       window: tuple[float, float] | None = None,
                       channel: str | None = None) -> Verdict:
    """Classify a run as Converged / Oscillatory / Diverged.

    Diverged: the log was truncated by a solver failure or contains
    non-finite samples.  Oscillatory: on the dominant channel (largest
    variation in the window, unless given), successive differences
    alternate sign in more than 80% of the window while the amplitude
    envelope is non-decreasing (least-squares slope of |diff| >= 0).
    Otherwise Converged.
    """
    arr = log.as_array()
    if log.diverged or not np.all(np.isfinite(arr)):
        return Verdict.DIVERGED
    t = np.asarray(log.times)
    lo, hi = (t[0], t[-1]) if window is None else window
    mask = (t >= lo) & (t <= hi)
    if np.count_nonzero(mask) < 4:
        return Verdict.CONVERGED
    if channel is not None:
        cols = [log.columns.index(channel)]
    else:
        cols = list(range(len(log.columns)))
    sub = arr[mask]
    spans = sub.max(axis=0) - sub.min(axis=0)
    # channels with no meaningful variation carry only float jitter
    cols = [c for c in cols if spans[c] > 1e-8]
    for c in sorted(cols, key=lambda c: -spans[c]):
        if _oscillatory(sub[:, c]):
            return Verdict.OSCILLATORY
    return Verdict.CONVERGED


def _oscillatory(x: np.ndarray) -> bool:
    d = np.diff(x)
    nz = d[np.abs(d) > 0]
    if nz.size < 3:
        return False
    flips = np.count_nonzero(np.sign(nz[1:]) != np.sign(nz[:-1]))
    alternation = flips / (nz.size - 1)
    amp = np.abs(nz)
    slope = np.polyfit(np.arange(amp.size), amp, 1)[0]
    return alternation > 0.8 and slope >= 0.0


@dataclass
class DeviationReport:
    channels: list[str]
    max_abs: dict[str, float]
    rms: dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.max_abs.values()) if self.max_abs else 0.0


def compare_runs(a: RunResult, b: RunResult,
                 channels: list[str] | None = None) -> DeviationReport:
    """Per-channel max-abs and RMS deviation, b resampled onto a's grid."""
    if channels is None:
        channels = sorted(set(a.log.columns) & set(b.log.columns))
    if not channels:
        raise EngineError("runs share no channels")
    missing = [c for c in channels
               if c not in a.log.columns or c not in b.log.columns]
    if missing:
        raise EngineError(f"channels missing from a run: {missing}")
    ta, tb = np.asarray(a.log.times), np.asarray(b.log.times)
    max_abs, rms = {}, {}
    for c in channels:
        xa = a.log.channel(c)
        xb = np.interp(ta, tb, b.log.channel(c))
        d = xa - xb
        max_abs[c] = float(np.max(np.abs(d)))
        rms[c] = float(np.sqrt(np.mean(d * d)))
    return DeviationReport(list(channels), max_abs, rms)


# -- monolithic reference ----------------------------------------------------


class MonolithicDae(DaeSystem):
    """All generators, motors, and both networks in one DAE.

    Differential states: generator blocks then three per motor (inactive
    motors are frozen at zero derivative).  Algebraic unknowns: real and
    imaginary transmission bus voltages followed by feeder node voltages
    for nodes 1..N of every feeder (node 0 is identified with the
    interface bus).  Inactive feeders pin their node voltages to the
    substation value.
    """

    def __init__(self, tdae: TransmissionDae,
                 dsubs: dict[str, DistributionSubSystem],
                 interface_buses: list[int]):
        self.tdae = tdae
        self.net = tdae.net
        self.bank = tdae.bank
        self.interface_buses = list(interface_buses)
        self.feeders = []
        self.feeder_bus = []
        for bus in interface_buses:
            for fd in dsubs[f"D{bus}"].feeders:
                self.feeders.append(fd)
                self.feeder_bus.append(bus)
        self.motors = [mu for fd in self.feeders for mu in fd.motors]
        self._ngen_x = tdae.n_x
        self._nbus = self.net.n_bus
        # per-feeder slice of y (child-node voltages, real then imag)
        self._fslices = []
        off = 2 * self._nbus
        for fd in self.feeders:
            m = fd.n_nodes - 1
            self._fslices.append((off, m))
            off += 2 * m
        self._ny = off

    @property
    def n_x(self) -> int:
        return self._ngen_x + 3 * len(self.motors)

    @property
    def n_y(self) -> int:
        return self._ny

    # -- unpacking helpers

    def motor_state(self, x, k):
        o = self._ngen_x + 3 * k
        return x[o:o + 3]

    def feeder_voltages(self, y, k, v_sub):
        off, m = self._fslices[k]
        v = np.empty(m + 1, dtype=complex)
        v[0] = v_sub
        v[1:] = y[off:off + m] + 1j * y[off + m:off + 2 * m]
        return v

    def bus_voltages(self, y):
        n = self._nbus
        return y[:n] + 1j * y[n:2 * n]

    def f(self, x, y, u):
        v = self.bus_voltages(y)
        out = np.empty(self.n_x)
        out[:self._ngen_x] = self.bank.derivatives(
            x[:self._ngen_x], v[self.tdae._gen_idx])
        mk = 0
        for k, fd in enumerate(self.feeders):
            bus_i = self.net.idx(self.feeder_bus[k])
            vf = self.feeder_voltages(y, k, v[bus_i])
            for mu in fd.motors:
                st = self.motor_state(x, mk)
                if fd.active and mu.active:
                    out[self._ngen_x + 3 * mk:self._ngen_x + 3 * mk + 3] = \
                        mu.motor.derivatives(st, complex(vf[mu.node]))
                else:
                    out[self._ngen_x + 3 * mk:self._ngen_x + 3 * mk + 3] = 0.0
                mk += 1
        return out

    def g(self, x, y, u):
        v = self.bus_voltages(y)
        i_inj = np.zeros(self._nbus, dtype=complex)
        i_inj[self.tdae._gen_idx] += self.bank.injected_current(
            x[:self._ngen_x], v[self.tdae._gen_idx])
        for bus, zl in self.tdae.static_loads.items():
            i = self.net.idx(bus)
            s = zip_power(zl, abs(v[i]))
            i_inj[i] -= np.conj(s / v[i])

        res_f = []
        mk = 0
        for k, fd in enumerate(self.feeders):
            bus_i = self.net.idx(self.feeder_bus[k])
            v_sub = v[bus_i]
            vf = self.feeder_voltages(y, k, v_sub)
            if not fd.active:
                mk += len(fd.motors)
                r = vf[1:] - v_sub  # pin dead nodes to the substation
                res_f.append(np.concatenate([r.real, r.imag]))
                continue
            idraw = np.zeros(fd.n_nodes, dtype=complex)
            for node, zl in fd.zip_loads.items():
                s = zip_power(zl, abs(vf[node]))
                idraw[node] += np.conj(s / vf[node])
            for mu in fd.motors:
                st = self.motor_state(x, mk)
                mk += 1
                if mu.active:
                    s = mu.motor.terminal_power(st, complex(vf[mu.node]))
                    idraw[mu.node] += np.conj(s / vf[mu.node])
            # KCL at every feeder node; branch currents from voltage drops
            bal = -idraw.astype(complex)
            for br in fd.branches:
                ibr = (vf[br.parent] - vf[br.child]) / br.z
                bal[br.parent] -= ibr
                bal[br.child] += ibr
            # -bal[0] is the total current the feeder pulls from its bus
            i_inj[bus_i] += bal[0]
            r = bal[1:]
            res_f.append(np.concatenate([r.real, r.imag]))

        mis = self.net.ybus @ v - i_inj
        return np.concatenate([mis.real, mis.imag] + res_f)

    # -- state assembly from initialized sub-systems

    def assemble(self, tsub: TransmissionSubSystem):
        x = np.zeros(self.n_x)
        x[:self._ngen_x] = tsub.x
        y = np.zeros(self.n_y)
        y[:2 * self._nbus] = tsub.y
        v = self.bus_voltages(y)
        mk = 0
        for k, fd in enumerate(self.feeders):
            off, m = self._fslices[k]
            if fd.active:
                vf = fd.v
            else:
                vf = np.full(fd.n_nodes, v[self.net.idx(self.feeder_bus[k])],
                             dtype=complex)
            y[off:off + m] = vf[1:].real
            y[off + m:off + 2 * m] = vf[1:].imag
            for mu in fd.motors:
                x[self._ngen_x + 3 * mk:self._ngen_x + 3 * mk + 3] = mu.state
                mk += 1
        return x, y

    def source_power(self, x, y, bus: int) -> complex:
        """Total complex power flowing from ``bus`` into its feeders."""
        v = self.bus_voltages(y)
        v_sub = v[self.net.idx(bus)]
        s = 0j
        mk = 0
        for k, fd in enumerate(self.feeders):
            nmot = len(fd.motors)
            if self.feeder_bus[k] != bus or not fd.active:
                mk += nmot
                continue
            vf = self.feeder_voltages(y, k, v_sub)
            i_src = 0j
            for br in fd.branches:
                if br.parent == 0:
                    i_src += (vf[0] - vf[br.child]) / br.z
            # plus anything drawn at the substation node itself
            if 0 in fd.zip_loads:
                s0 = zip_power(fd.zip_loads[0], abs(v_sub))
                i_src += np.conj(s0 / v_sub)
            for mu in fd.motors:
                st = self.motor_state(x, mk)
                mk += 1
                if mu.active and mu.node == 0:
                    sm = mu.motor.terminal_power(st, complex(v_sub))
                    i_src += np.conj(sm / v_sub)
            s += v_sub * np.conj(i_src)
        return s


# -- run orchestration --------------------------------------------------------


def _post_event_window(scenario: Scenario) -> tuple[float, float]:
    if scenario.events:
        t0 = max(ev.time for ev in scenario.events)
    else:
        t0 = 0.0
    return (t0, scenario.t_end)


def run_scenario(scenario: Scenario) -> RunResult:
    t_start = time.perf_counter()
    if scenario.method is RunMethod.MONOLITHIC:
        log = _run_monolithic(scenario)
    else:
        subsystems, links, interface_buses = build_subsystems(scenario)
        tsub = subsystems["T"]
        dsubs = {k: v for k, v in subsystems.items() if k != "T"}
        iterative_td_powerflow_init(tsub, dsubs, interface_buses)
        method = (CouplingMethod.PARALLEL
                  if scenario.method is RunMethod.PARALLEL
                  else CouplingMethod.SERIES)
        schedule = CouplingSchedule(
            method=method, h_macro=scenario.h_macro, t_end=scenario.t_end,
            series_order=["T"] + sorted(dsubs),
            events=tuple(scenario.events))
        snaps = {name: sorted(sub.snapshot())
                 for name, sub in subsystems.items()}
        log = run_cosimulation(schedule, subsystems, links,
                               snapshot_channels=snaps)
    verdict = detect_convergence(log, _post_event_window(scenario))
    return RunResult(scenario=scenario.name, method=scenario.method,
                     h_macro=scenario.h_macro, log=log,
                     verdict=verdict, wall_time=time.perf_counter() - t_start)


def _run_monolithic(scenario: Scenario) -> TimeSeriesLog:
    subsystems, _, interface_buses = build_subsystems(scenario)
    tsub = subsystems["T"]
    dsubs = {k: v for k, v in subsystems.items() if k != "T"}
    iterative_td_powerflow_init(tsub, dsubs, interface_buses)
    mono = MonolithicDae(tsub.dae, dsubs, interface_buses)
    x, y = mono.assemble(tsub)

    columns = ["T.out[%d]" % i for i in range(2 * len(interface_buses))]
    for bus in interface_buses:
        columns += [f"D{bus}.out[0]", f"D{bus}.out[1]"]
    snap_keys = sorted(tsub.snapshot())
    columns += [f"T.{k}" for k in snap_keys]
    motor_cols = []
    for k, fd in enumerate(mono.feeders):
        bus = mono.feeder_bus[k]
        for mu in fd.motors:
            motor_cols.append((f"D{bus}.{mu.name}.slip", k, mu))
    columns += [c for c, _, _ in motor_cols]

    events = sorted(scenario.events, key=lambda e: e.time)
    pending = list(events)
    newton = NewtonConfig()
    h = scenario.h_macro
    n_steps = int(round(scenario.t_end / h))
    times, rows = [], []
    diverged = False
    failure = None

    def record(t, x, y):
        v = mono.bus_voltages(y)
        row = []
        for bus in interface_buses:
            vb = v[mono.net.idx(bus)]
            row += [vb.real, vb.imag]
        for bus in interface_buses:
            s = mono.source_power(x, y, bus)
            row += [s.real, s.imag]
        tsub.x = x[:mono._ngen_x]
        tsub.y = y[:2 * mono._nbus]
        snap = tsub.snapshot()
        row += [snap[k] for k in snap_keys]
        for _, k, mu in motor_cols:
            mk = mono.motors.index(mu)
            row.append(float(mono.motor_state(x, mk)[2]))
        times.append(t)
        rows.append(row)

    t = 0.0
    record(t, x, y)
    for i in range(n_steps):
        while pending and pending[0].time <= t + 1e-12:
            ev = pending.pop(0)
            x, y = _apply_monolithic_event(mono, ev, x, y)
        try:
            x, y = trapezoidal_dae_step(mono, x, y, None, h, newton)
        except (OverflowError, FloatingPointError):
            diverged = True
            break
        except Exception as exc:  # solver failure: truncate and report
            failure = str(exc)
            break
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            diverged = True
            break
        t = (i + 1) * h
        record(t, x, y)
    return TimeSeriesLog(columns=columns, times=times, rows=rows,
                         diverged=diverged, failure=failure)


def _apply_monolithic_event(mono: MonolithicDae, ev: Event, x, y):
    x = x.copy()
    v = mono.bus_voltages(y)
    if ev.action == "connect_motor":
        name = ev.params["name"]
        for mk, mu in enumerate(mono.motors):
            if mu.name == name:
                mu.motor.initialize(1.0 + 0.0j, mu.p_target)
                x[mono._ngen_x + 3 * mk:mono._ngen_x + 3 * mk + 3] = \
                    mu.motor.standstill_state()
                mu.active = True
                return x, y
        raise EngineError(f"no motor named {name!r}")
    if ev.action == "disconnect_motor":
        for mu in mono.motors:
            if mu.name == ev.params["name"]:
                mu.active = False
                return x, y
        raise EngineError(f"no motor named {ev.params['name']!r}")
    if ev.action == "connect_feeder":
        # index within the named D sub-system's feeder list
        bus = int(ev.target[1:])
        idx = int(ev.params["index"])
        cand = [k for k, b in enumerate(mono.feeder_bus) if b == bus]
        k = cand[idx]
        fd = mono.feeders[k]
        fd.active = True
        v_sub = complex(v[mono.net.idx(bus)])
        fd.initialize(v_sub)
        off, m = mono._fslices[k]
        y = y.copy()
        y[off:off + m] = fd.v[1:].real
        y[off + m:off + 2 * m] = fd.v[1:].imag
        base = sum(len(f.motors) for f in mono.feeders[:k])
        for j, mu in enumerate(fd.motors):
            x[mono._ngen_x + 3 * (base + j):
              mono._ngen_x + 3 * (base + j) + 3] = mu.state
        return x, y
    raise EngineError(f"unknown event action {ev.action!r}")
