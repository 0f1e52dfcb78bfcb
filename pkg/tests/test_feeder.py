import numpy as np
import pytest

from cotds.feeder import (
    DistributionFeeder,
    DistributionSubSystem,
    FeederBranch,
    FeederError,
    MotorUnit,
)
from cotds.loads import InductionMotor, InductionMotorParams, ZipLoadParams

OMEGA_S = 2.0 * np.pi * 60.0

MP = InductionMotorParams(rs=0.013, xs=0.05, xm=6.0, rr=0.03, xr=0.12,
                          h_m=0.6, mva_scale=0.25)


def example_feeder(with_motor=True):
    branches = [
        FeederBranch(0, 1, 0.004, 0.012),
        FeederBranch(1, 2, 0.006, 0.018),
        FeederBranch(1, 3, 0.005, 0.015),
        FeederBranch(3, 4, 0.008, 0.020),
    ]
    zips = {
        2: ZipLoadParams(p0=0.30, q0=0.10, z_frac=0.4, i_frac=0.3,
                         p_frac=0.3, v0=1.0),
        4: ZipLoadParams(p0=0.25, q0=0.08, z_frac=0.2, i_frac=0.3,
                         p_frac=0.5, v0=1.0),
    }
    motors = []
    if with_motor:
        motors = [MotorUnit("m1", 3, InductionMotor(MP, OMEGA_S),
                            p_target=0.20, state=None, active=True)]
    return DistributionFeeder(branches, zips, motors)


def dense_nodal_solution(feeder, v_sub, tol=1e-13):
    """Independent oracle: full Y-matrix nodal solve with the substation
    held at v_sub, iterated on the voltage-dependent injections."""
    n = feeder.n_nodes
    y = np.zeros((n, n), dtype=complex)
    for br in feeder.branches:
        ybr = 1.0 / complex(br.r, br.x)
        y[br.parent, br.parent] += ybr
        y[br.child, br.child] += ybr
        y[br.parent, br.child] -= ybr
        y[br.child, br.parent] -= ybr
    v = np.full(n, v_sub, dtype=complex)
    for _ in range(200):
        i = np.zeros(n, dtype=complex)
        for node, zl in feeder.zip_loads.items():
            from cotds.loads import zip_power
            s = zip_power(zl, abs(v[node]))
            i[node] -= np.conj(s / v[node])
        for mu in feeder.motors:
            if mu.active:
                s = mu.motor.terminal_power(mu.state, v[mu.node])
                i[mu.node] -= np.conj(s / v[mu.node])
        # solve reduced system with node 0 eliminated
        rhs = i[1:] - y[1:, 0] * v_sub
        v_new = np.linalg.solve(y[1:, 1:], rhs)
        delta = np.max(np.abs(v_new - v[1:]))
        v[1:] = v_new
        if delta < tol:
            break
    i_src = y[0, :] @ v - i[0]
    return v, i_src


class TestSweep:
    def test_matches_dense_nodal_solve(self):
        f = example_feeder()
        f.initialize(1.0 + 0.0j)
        v_sub = 1.02 * np.exp(1j * 0.05)
        i_src = f.sweep(v_sub, tol=1e-12)
        v_ref, i_ref = dense_nodal_solution(f, v_sub)
        assert np.max(np.abs(f.v - v_ref)) < 1e-8
        assert abs(i_src - i_ref) < 1e-8

    def test_voltage_drops_downstream(self):
        f = example_feeder(with_motor=False)
        f.sweep(1.0 + 0.0j, tol=1e-12)
        assert abs(f.v[2]) < abs(f.v[1]) < abs(f.v[0])

    def test_no_load_means_flat_profile(self):
        f = DistributionFeeder([FeederBranch(0, 1, 0.01, 0.03)])
        i_src = f.sweep(1.0 + 0.0j)
        assert abs(i_src) < 1e-14
        assert np.allclose(f.v, 1.0)

    def test_source_power_covers_losses(self):
        f = example_feeder(with_motor=False)
        v_sub = 1.0 + 0.0j
        s_src = f.source_power(v_sub)
        drawn = 0.0
        from cotds.loads import zip_power
        for node, zl in f.zip_loads.items():
            drawn += zip_power(zl, abs(f.v[node])).real
        assert s_src.real > drawn  # line losses are positive
        assert s_src.real - drawn < 0.01


class TestValidation:
    def test_orphan_branch_rejected(self):
        with pytest.raises(FeederError):
            DistributionFeeder([FeederBranch(2, 3, 0.01, 0.01)])

    def test_duplicate_child_rejected(self):
        with pytest.raises(FeederError):
            DistributionFeeder([FeederBranch(0, 1, 0.01, 0.01),
                                FeederBranch(0, 1, 0.02, 0.02)])


class TestInitialize:
    def test_motor_equilibrium_consistent_with_sweep(self):
        f = example_feeder()
        f.initialize(1.01 + 0.0j)
        mu = f.motors[0]
        d = mu.motor.derivatives(mu.state, f.v[mu.node])
        assert np.max(np.abs(d)) < 1e-9
        s = mu.motor.terminal_power(mu.state, f.v[mu.node])
        assert s.real == pytest.approx(0.20, abs=1e-9)

    def test_step_motors_holds_equilibrium(self):
        f = example_feeder()
        f.initialize(1.0 + 0.0j)
        x0 = f.motors[0].state.copy()
        for _ in range(20):
            f.sweep(1.0 + 0.0j)
            f.step_motors(0.005, tol=1e-10)
        assert np.max(np.abs(f.motors[0].state - x0)) < 1e-8


class TestSubSystem:
    def make_sub(self):
        sub = DistributionSubSystem("D", [example_feeder()])
        sub.initialize(np.array([1.0, 0.0]))
        return sub

    def test_output_is_total_complex_power(self):
        sub = self.make_sub()
        p, q = sub.output()
        s = sum(f.source_power(1.0 + 0.0j) for f in sub.feeders if f.active)
        assert p == pytest.approx(s.real, abs=1e-12)
        assert q == pytest.approx(s.imag, abs=1e-12)

    def test_equilibrium_output_constant(self):
        sub = self.make_sub()
        p0, q0 = sub.output()
        for _ in range(10):
            sub.set_input(np.array([1.0, 0.0]))
            sub.advance(0.01)
        p1, q1 = sub.output()
        assert abs(p1 - p0) < 1e-8 and abs(q1 - q0) < 1e-8

    def test_disconnect_motor_drops_power(self):
        sub = self.make_sub()
        p0, _ = sub.output()
        sub.apply_event("disconnect_motor", {"name": "m1"})
        p1, _ = sub.output()
        assert p1 < p0 - 0.15

    def test_connect_motor_draws_inrush(self):
        sub = self.make_sub()
        sub.apply_event("disconnect_motor", {"name": "m1"})
        _, q_off = sub.output()
        sub.apply_event("connect_motor", {"name": "m1"})
        _, q_on = sub.output()
        assert q_on > q_off + 0.5  # locked-rotor reactive inrush

    def test_snapshot_keys(self):
        sub = self.make_sub()
        snap = sub.snapshot()
        assert "m1.slip" in snap
        assert any(k.startswith("f0.v") for k in snap)
        assert np.isfinite(list(snap.values())).all()
