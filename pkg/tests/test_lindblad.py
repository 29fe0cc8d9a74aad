import numpy as np
import pytest

from qot import linalg, lindblad
from qot.errors import PositivityError, ValidationError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


class TestBasis:
    def test_pauli_valid(self, pauli):
        assert pauli.size == 3 and pauli.dim == 2
        assert pauli.is_connected

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_gell_mann_valid(self, n):
        b = lindblad.gell_mann_basis(n)
        assert b.size == n * n - 1
        assert b.is_connected

    def test_single_sx_fails_gate(self):
        with pytest.raises(ValidationError):
            lindblad.LindbladBasis(SX[None])
        b = lindblad.LindbladBasis(SX[None], require_connected=False)
        assert not b.is_connected

    def test_size_cap(self):
        mats = np.stack([SX] * 5)
        with pytest.raises(ValidationError):
            lindblad.LindbladBasis(mats)

    def test_non_hermitian_rejected(self):
        bad = np.array([[[0, 1], [0, 0]]], dtype=complex)
        with pytest.raises(ValidationError):
            lindblad.LindbladBasis(bad, require_connected=False)

    def test_presets(self):
        assert lindblad.basis_from_name("pauli").size == 3
        assert lindblad.basis_from_name("gellmann:3").size == 8
        with pytest.raises(ValidationError):
            lindblad.basis_from_name("nope")


class TestGradDivLaplacian:
    def test_grad_identity_commutes(self, pauli):
        assert np.allclose(lindblad.grad_L(pauli, np.eye(2)), 0)

    def test_grad_single_sx_on_sz(self):
        b = lindblad.LindbladBasis(SX[None], require_connected=False)
        g = lindblad.grad_L(b, SZ)
        assert np.allclose(g[0], np.array([[0, -2], [2, 0]]))
        assert np.allclose(g[0], -2j * SY)

    def test_grad_pauli_pair(self, basis_xz):
        g = lindblad.grad_L(basis_xz, SY)
        assert np.allclose(g[0], 2j * SZ)
        assert np.allclose(g[1], -2j * SX)

    def test_div_zero_field(self, basis_xz):
        assert np.allclose(lindblad.div_L(basis_xz, np.zeros((2, 2, 2))), 0)

    def test_div_composition_consistent_with_laplacian(self):
        # div(grad sz) = -Delta sz = +4 sz for the single-sx set
        b = lindblad.LindbladBasis(SX[None], require_connected=False)
        out = lindblad.div_L(b, (-2j * SY)[None])
        assert np.allclose(out, 4 * SZ)
        assert np.allclose(lindblad.laplacian_L(b, SZ), -4 * SZ)

    def test_adjointness(self, rng):
        for n in (2, 3, 4):
            basis = lindblad.gell_mann_basis(n)
            for _ in range(25):
                x = linalg.random_hermitian(rng, n)
                y = linalg.random_skew_field(rng, basis.size, n)
                lhs = linalg.hs_inner(lindblad.grad_L(basis, x), y)
                rhs = linalg.hs_inner(x, lindblad.div_L(basis, y))
                assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_laplacian_examples(self, pauli, basis_xz):
        assert np.allclose(lindblad.laplacian_L(basis_xz, SY), -8 * SY)
        assert np.allclose(lindblad.laplacian_L(pauli, np.eye(2)), 0)

    def test_laplacian_is_minus_div_grad(self, rng):
        basis = lindblad.gell_mann_basis(3)
        x = linalg.random_hermitian(rng, 3)
        direct = lindblad.laplacian_L(basis, x)
        composed = -lindblad.div_L(basis, lindblad.grad_L(basis, x))
        assert np.allclose(direct, composed, atol=1e-12)
        assert abs(np.trace(direct)) <= 1e-12

    def test_product_rule(self, rng):
        for n in (2, 3):
            basis = lindblad.gell_mann_basis(n)
            for _ in range(25):
                x = linalg.random_hermitian(rng, n)
                y = linalg.random_hermitian(rng, n)
                lhs = lindblad.grad_L(basis, x @ y + y @ x)
                gx, gy = lindblad.grad_L(basis, x), lindblad.grad_L(basis, y)
                rhs = gx @ y + x @ gy + gy @ x + y @ gx
                assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


class TestMultiplications:
    def test_anticomm_scalar_rho(self, rng):
        v = linalg.random_skew_field(rng, 3, 2)
        assert np.allclose(lindblad.mult_anticomm(np.eye(2) / 2, v), v / 2)

    def test_anticomm_hand_example(self):
        rho = np.diag([0.75, 0.25]).astype(complex)
        out = lindblad.mult_anticomm(rho, (1j * SX)[None])
        assert np.allclose(out[0], 0.5j * SX)

    def test_anticomm_linearity_zero(self, rng):
        rho = linalg.random_density(rng, 2)
        assert np.allclose(lindblad.mult_anticomm(rho, np.zeros((3, 2, 2))), 0)

    def test_km_uniform(self, rng):
        v = linalg.random_skew_field(rng, 2, 3)
        out = lindblad.mult_kubo_mori(np.eye(3) / 3, v)
        assert np.allclose(out, v / 3)

    def test_km_logmean_factor(self):
        rho = np.diag([0.75, 0.25]).astype(complex)
        out = lindblad.mult_kubo_mori(rho, (1j * SX)[None])
        factor = 0.5 / np.log(3.0)
        assert out[0][0, 1] == pytest.approx(1j * factor)
        assert factor == pytest.approx(0.455120, abs=5e-7)

    def test_km_quadrature_oracle(self, rng):
        for _ in range(5):
            n = int(rng.integers(2, 4))
            rho = linalg.random_density(rng, n, min_eig=0.05)
            v = linalg.random_skew_field(rng, 1, n)
            exact = lindblad.mult_kubo_mori(rho, v)[0]
            quad = lindblad.kubo_mori_quadrature(rho, v[0], nodes=10_000)
            assert np.linalg.norm(exact - quad) <= 1e-8 * np.linalg.norm(exact)

    def test_logarithmic_identity(self, rng):
        # M_rho(grad log rho) = grad rho
        for n in (2, 3, 4):
            for basis in (lindblad.gell_mann_basis(n),) + (
                    (lindblad.pauli_basis(),) if n == 2 else ()):
                for _ in range(10):
                    rho = linalg.random_density(rng, n)
                    lhs = lindblad.mult_kubo_mori(
                        rho, lindblad.grad_L(basis, linalg.herm_log(rho)))
                    rhs = lindblad.grad_L(basis, rho)
                    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_km_inverse(self, rng):
        rho = np.diag([0.75, 0.25]).astype(complex)
        out = lindblad.mult_kubo_mori_inverse(rho, (1j * SX)[None])
        assert out[0][0, 1] == pytest.approx(1j * np.log(3.0) / 0.5)
        v = linalg.random_skew_field(rng, 3, 2)
        assert np.allclose(lindblad.mult_kubo_mori_inverse(np.eye(2) / 2, v), 2 * v)
        rho2 = linalg.random_density(rng, 4)
        v2 = linalg.random_skew_field(rng, 5, 4)
        back = lindblad.mult_kubo_mori_inverse(rho2, lindblad.mult_kubo_mori(rho2, v2))
        assert np.linalg.norm(back - v2) <= 1e-10 * np.linalg.norm(v2)

    def test_km_requires_pd(self, rng):
        v = linalg.random_skew_field(rng, 1, 2)
        with pytest.raises(PositivityError):
            lindblad.mult_kubo_mori(np.diag([1.0, 0.0]).astype(complex), v)


class TestSuperoperator:
    def test_annihilates_identity(self, basis_xz):
        sup = lindblad.laplacian_superoperator(basis_xz)
        vec_i = np.eye(2).flatten(order="F").astype(complex)
        assert np.allclose(sup @ vec_i, 0)

    def test_matches_pointwise_example(self):
        b = lindblad.LindbladBasis(SX[None], require_connected=False)
        sup = lindblad.laplacian_superoperator(b)
        vec_sz = SZ.flatten(order="F")
        assert np.allclose(sup @ vec_sz, -4 * vec_sz)

    def test_negative_semidefinite_and_kernel(self):
        for basis in (lindblad.pauli_basis(), lindblad.gell_mann_basis(3)):
            sup = lindblad.laplacian_superoperator(basis)
            w = np.linalg.eigvalsh(0.5 * (sup + sup.conj().T))
            assert w[-1] <= 1e-10
            assert int(np.sum(np.abs(w) < 1e-9)) == 1

    def test_agrees_with_operator(self, rng, pauli):
        sup = lindblad.laplacian_superoperator(pauli)
        for _ in range(10):
            x = linalg.random_hermitian(rng, 2)
            via_sup = (sup @ x.flatten(order="F")).reshape(2, 2, order="F")
            assert np.linalg.norm(via_sup - lindblad.laplacian_L(pauli, x)) <= 1e-10


class TestHeatSemigroup:
    def test_time_zero(self, basis_xz, rng):
        rho = linalg.random_density(rng, 2)
        assert np.allclose(lindblad.heat_semigroup(basis_xz, rho, 0.0), rho)

    def test_stationary_limit(self, basis_xz, rng):
        rho = linalg.random_density(rng, 2)
        out = lindblad.heat_semigroup(basis_xz, rho, 10.0)
        assert np.linalg.norm(out - np.eye(2) / 2) <= 1e-8

    def test_trace_preserved(self, basis_xz, rng):
        rho = linalg.random_density(rng, 2)
        for t in (0.1, 1.0, 3.0):
            out = lindblad.heat_semigroup(basis_xz, rho, t)
            assert abs(np.trace(out).real - 1.0) <= 1e-10
            assert np.linalg.eigvalsh(out)[0] > 0

    def test_negative_time_rejected(self, basis_xz, rng):
        with pytest.raises(ValidationError):
            lindblad.heat_semigroup(basis_xz, linalg.random_density(rng, 2), -0.1)


class TestLindbladStep:
    def test_unitary_purity(self, rng):
        empty = lindblad.LindbladBasis(np.zeros((0, 2, 2)), require_connected=False)
        rho = linalg.random_density(rng, 2)
        purity0 = np.trace(rho @ rho).real
        for _ in range(200):
            rho = lindblad.lindblad_step(empty, SZ, rho, 1e-2)
        assert np.trace(rho @ rho).real == pytest.approx(purity0, abs=1e-9)

    def test_stationary_limit(self, basis_xz, rng):
        rho = linalg.random_density(rng, 2)
        for _ in range(2000):
            rho = lindblad.lindblad_step(basis_xz, np.zeros((2, 2)), rho, 1e-2)
        # rho' = Delta rho / 2 converges to I/2 at half the heat-flow speed
        assert np.linalg.norm(rho - np.eye(2) / 2) <= 1e-8

    def test_rk4_local_order(self, basis_xz, rng):
        # one step of rho' = Delta rho / 2 vs exact heat flow at time dt/2
        rho = linalg.random_density(rng, 2)
        errs = []
        for dt in (0.1, 0.05):
            stepped = lindblad.lindblad_step(basis_xz, np.zeros((2, 2)), rho, dt)
            exact = lindblad.heat_semigroup(basis_xz, rho, dt / 2)
            errs.append(np.linalg.norm(stepped - exact))
        ratio = errs[0] / errs[1]
        assert 20 <= ratio <= 50  # O(dt^5) local error: halving dt gives ~32x

    def test_trace_preserved(self, basis_xz, rng):
        rho = linalg.random_density(rng, 2)
        out = lindblad.lindblad_step(basis_xz, SX, rho, 1e-3)
        assert abs(np.trace(out).real - 1.0) <= 1e-10

    def test_positivity_guard(self, basis_xz):
        nearly = np.diag([1.0 - 1e-10, 1e-10]).astype(complex)
        with pytest.raises((PositivityError, ValidationError)):
            lindblad.lindblad_step(basis_xz, 50 * SX, nearly, 5.0)


def test_heat_equilibrium_rate(basis_xz):
    # {sx, sz}: Delta eigenvalues on traceless are -4 (sx), -4 (sz), -8 (sy)
    assert lindblad.heat_equilibrium_rate(basis_xz) == pytest.approx(-4.0)
