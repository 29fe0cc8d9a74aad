import numpy as np
import pytest

import qot.flows as ent
from qot import linalg, lindblad
from qot.errors import PositivityError

SX = np.array([[0, 1], [1, 0]], dtype=complex)


class TestEntropy:
    def test_maximally_mixed(self):
        assert ent.entropy(np.eye(2) / 2) == pytest.approx(np.log(2), abs=1e-14)

    def test_frozen_value(self):
        s = ent.entropy(np.diag([0.75, 0.25]).astype(complex))
        assert s == pytest.approx(0.5623351446188083, abs=1e-12)
        assert s == pytest.approx(0.562335, abs=5e-7)

    def test_unitary_invariance(self, rng):
        rho = linalg.random_density(rng, 3)
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        u, _ = np.linalg.qr(g)
        assert ent.entropy(u @ rho @ u.conj().T) == pytest.approx(ent.entropy(rho))

    def test_range(self, rng):
        for n in (2, 4):
            s = ent.entropy(linalg.random_density(rng, n))
            assert 0 < s <= np.log(n) + 1e-12

    def test_rejects_non_pd(self):
        with pytest.raises(PositivityError):
            ent.entropy(np.diag([1.0, 0.0]).astype(complex))


class TestGenericStep:
    def test_uniform_is_fixed_point(self, basis_xz):
        rho = np.eye(2) / 2
        out = ent.flow_step_generic(basis_xz, rho, 1e-2, "anticomm")
        assert np.allclose(out, rho, atol=1e-14)
        out = ent.flow_step_generic(basis_xz, rho, 1e-2, "log")
        assert np.allclose(out, rho, atol=1e-14)

    def test_anticomm_handle_matches_callable(self, rng, basis_xz):
        rho = linalg.random_density(rng, 2)
        a = ent.flow_step_generic(basis_xz, rho, 1e-3, "anticomm")
        b = ent.flow_step_generic(basis_xz, rho, 1e-3, lindblad.mult_anticomm)
        assert np.allclose(a, b, atol=1e-13)

    def test_km_step_matches_heat_semigroup_locally(self, rng, basis_xz):
        # one generic Kubo-Mori step vs the exact heat exponential: O(dt^5)
        rho = linalg.random_density(rng, 2)
        errs = []
        for dt in (0.02, 0.01):
            stepped = ent.flow_step_generic(basis_xz, rho, dt, "log")
            exact = lindblad.heat_semigroup(basis_xz, rho, dt)
            errs.append(np.linalg.norm(stepped - exact))
        assert 20 <= errs[0] / errs[1] <= 50

    def test_km_step_equals_direct_heat_stepping(self, rng, basis_xz):
        from qot import kernels
        rho = linalg.random_density(rng, 2)
        generic = ent.flow_step_generic(basis_xz, rho, 1e-3, "log")
        direct = kernels.rk4_heat_step(basis_xz.mats,
                                       np.ascontiguousarray(basis_xz.l2sum()),
                                       rho, 1e-3)
        assert np.linalg.norm(generic - direct) <= 1e-10

    def test_positivity_exhaustion(self, basis_xz):
        nearly = np.diag([1 - 1e-12, 1e-12]).astype(complex)
        with pytest.raises(PositivityError):
            ent.flow_step_generic(basis_xz, nearly, 1e-3, "anticomm")

    def test_trace_preserved(self, rng, basis_xz):
        rho = linalg.random_density(rng, 2)
        out = ent.flow_step_generic(basis_xz, rho, 1e-3, "anticomm")
        assert abs(np.trace(out).real - 1.0) <= 1e-10


class TestFlows:
    def test_uniform_constant_trajectory(self, basis_xz):
        tr = ent.flow_anticomm(basis_xz, np.eye(2) / 2, 0.2, 1e-2)
        assert np.max(np.abs(tr.states - np.eye(2) / 2)) <= 1e-13
        assert np.ptp(tr.entropies) <= 1e-13

    def test_entropy_monotone_and_trace(self, rng, basis_xz):
        for flow in (ent.flow_anticomm, ent.flow_log):
            rho0 = linalg.random_density(rng, 2)
            tr = flow(basis_xz, rho0, 1.0, 1e-3, record_stride=20)
            assert np.min(np.diff(tr.entropies)) >= -1e-12
            assert np.max(tr.trace_drifts) <= 1e-9

    def test_anticomm_converges_to_uniform(self, rng, basis_xz):
        rho0 = linalg.random_density(rng, 2)
        tr = ent.flow_anticomm(basis_xz, rho0, 5.0, 1e-3, record_stride=500)
        assert np.linalg.norm(tr.states[-1] - np.eye(2) / 2) <= 1e-6

    def test_entropy_production_identity(self, rng, basis_xz):
        # dS/dt = -tr(rho' log rho) = tr(rho v*v) at v = -grad log rho
        rho = linalg.random_density(rng, 2)
        g = lindblad.grad_L(basis_xz, linalg.herm_log(rho))
        rhodot = -lindblad.div_L(basis_xz, lindblad.mult_anticomm(rho, g))
        chain = -np.trace(rhodot @ linalg.herm_log(rho)).real
        assert chain == pytest.approx(ent.entropy_production(basis_xz, rho),
                                      abs=1e-8)

    def test_log_flow_matches_semigroup(self, rng, basis_xz):
        rho0 = linalg.random_density(rng, 2)
        for t in (0.1, 0.5, 1.0):
            tr = ent.flow_log(basis_xz, rho0, t, 1e-3, record_stride=10_000)
            exact = lindblad.heat_semigroup(basis_xz, rho0, t)
            rel = np.linalg.norm(tr.states[-1] - exact) / np.linalg.norm(exact)
            assert rel <= 1e-6

    def test_log_flow_stationary_entropy(self, rng, basis_xz):
        rho0 = linalg.random_density(rng, 2)
        tr = ent.flow_log(basis_xz, rho0, 10.0, 1e-2, record_stride=100)
        assert np.linalg.norm(tr.states[-1] - np.eye(2) / 2) <= 1e-6
        assert tr.entropies[-1] == pytest.approx(np.log(2), abs=1e-9)

    def test_richardson_consistency_anticomm(self, rng, basis_xz):
        # halving dt changes the endpoint by ~dt^4 (RK4 global order)
        rho0 = linalg.random_density(rng, 2)
        ends = {}
        for dt in (0.02, 0.01, 0.005):
            tr = ent.flow_anticomm(basis_xz, rho0, 0.5, dt, record_stride=10 ** 6)
            ends[dt] = tr.states[-1]
        e1 = np.linalg.norm(ends[0.02] - ends[0.005])
        e2 = np.linalg.norm(ends[0.01] - ends[0.005])
        assert e1 / e2 > 8  # consistent with >= 4th order (ratio ~16 ideal)

    def test_dynamic_identity_along_log_flow(self, rng, basis_xz):
        # -div KM(grad log rho) equals Delta rho at every recorded state
        rho0 = linalg.random_density(rng, 2)
        tr = ent.flow_log(basis_xz, rho0, 0.3, 1e-2, record_stride=5)
        for state in tr.states:
            g = lindblad.grad_L(basis_xz, linalg.herm_log(state))
            lhs = -lindblad.div_L(basis_xz, lindblad.mult_kubo_mori(state, g))
            rhs = lindblad.laplacian_L(basis_xz, state)
            assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1e-12)

    def test_exponential_rate(self, rng, basis_xz):
        # asymptotic decay slope equals the largest nonzero Delta_L eigenvalue
        rate = lindblad.heat_equilibrium_rate(basis_xz)
        rho0 = linalg.random_density(rng, 2)
        tr = ent.flow_log(basis_xz, rho0, 4.0, 1e-3, record_stride=200)
        dist = np.linalg.norm(tr.states - np.eye(2) / 2, axis=(1, 2))
        mask = (dist < dist[0] * 1e-1) & (dist > 1e-12)
        ts, ys = tr.times[mask], np.log(dist[mask])
        slope = np.polyfit(ts, ys, 1)[0]
        assert slope == pytest.approx(rate, rel=0.05)
