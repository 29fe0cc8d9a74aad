import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qot import linalg
from qot.errors import PositivityError, ValidationError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


class TestHSInner:
    def test_identity(self):
        assert linalg.hs_inner(np.eye(2), np.eye(2)) == 2

    def test_orthogonal_paulis(self):
        assert abs(linalg.hs_inner(SX, SZ)) == 0

    def test_sy_squared(self):
        assert linalg.hs_inner(SY, SY) == pytest.approx(2)

    def test_dim_mismatch(self):
        with pytest.raises(ValidationError):
            linalg.hs_inner(np.eye(2), np.eye(3))

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_conjugate_symmetry_and_linearity(self, seed):
        rng = np.random.default_rng(seed)
        x = linalg.random_hermitian(rng, 3) + 1j * rng.standard_normal((3, 3))
        y = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        z = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        a = complex(rng.standard_normal(), rng.standard_normal())
        assert linalg.hs_inner(x, y) == pytest.approx(np.conj(linalg.hs_inner(y, x)))
        lhs = linalg.hs_inner(x, a * y + z)
        rhs = a * linalg.hs_inner(x, y) + linalg.hs_inner(x, z)
        assert lhs == pytest.approx(rhs)


class TestEigh:
    def test_identity(self):
        w, u = linalg.eigh_fixed(np.eye(2))
        assert np.allclose(w, [1, 1])
        assert np.allclose(u, np.eye(2))

    def test_diagonal_input(self):
        w, _ = linalg.eigh_fixed(SZ)
        assert np.allclose(w, [-1, 1])

    def test_sx_hand_diagonalization(self):
        w, u = linalg.eigh_fixed(SX)
        assert np.allclose(w, [-1, 1])
        s = 1 / np.sqrt(2)
        assert np.allclose(u[:, 0], [s, -s])
        assert np.allclose(u[:, 1], [s, s])

    def test_phase_determinism(self, rng):
        a = linalg.random_hermitian(rng, 5)
        w1, u1 = linalg.eigh_fixed(a)
        w2, u2 = linalg.eigh_fixed(a.copy())
        assert np.array_equal(u1, u2) and np.array_equal(w1, w2)

    def test_reconstruction(self, rng):
        for n in (2, 3, 8, 16):
            a = linalg.random_hermitian(rng, n)
            w, u = linalg.eigh_fixed(a)
            rel = np.linalg.norm((u * w) @ u.conj().T - a) / np.linalg.norm(a)
            assert rel <= linalg.TAU_RECON
            assert np.linalg.norm(u.conj().T @ u - np.eye(n)) <= linalg.TAU_RECON


class TestMatrixFunction:
    def test_log_identity(self):
        assert np.allclose(linalg.matrix_function(np.eye(3), np.log), 0)

    def test_diagonal_sqrt(self):
        out = linalg.matrix_function(np.diag([4.0, 1.0]), np.sqrt)
        assert np.allclose(out, np.diag([2.0, 1.0]))

    def test_exp_sx_series_oracle(self):
        # brute-force series sum as an independent route
        series = np.zeros((2, 2), dtype=complex)
        term = np.eye(2, dtype=complex)
        for k in range(1, 40):
            series += term
            term = term @ SX / k
        out = linalg.matrix_function(SX, np.exp)
        assert np.allclose(out, series, atol=1e-14)
        assert np.allclose(out, np.cosh(1) * np.eye(2) + np.sinh(1) * SX)

    def test_exp_log_roundtrip(self, rng):
        for n in (2, 4):
            rho = linalg.random_density(rng, n)
            back = linalg.matrix_function(linalg.matrix_function(rho, np.log), np.exp)
            assert np.linalg.norm(back - rho) / np.linalg.norm(rho) <= 1e-10

    def test_domain_error(self):
        with pytest.raises(ValidationError):
            linalg.matrix_function(SZ, np.log)  # negative eigenvalue

    def test_herm_log_floor(self):
        nearly = np.diag([1.0 - 1e-13, 1e-13]).astype(complex)
        with pytest.raises(PositivityError):
            linalg.herm_log(nearly)


class TestProjectTraceless:
    def test_identity_is_pure_trace(self):
        assert np.allclose(linalg.project_traceless_hermitian(np.eye(3)), 0)

    def test_already_traceless(self):
        assert np.allclose(linalg.project_traceless_hermitian(SZ), SZ)

    def test_skew_input_has_no_hermitian_part(self):
        assert np.allclose(linalg.project_traceless_hermitian(1j * SZ), 0)

    def test_exact_invariants(self, rng):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        out = linalg.project_traceless_hermitian(a)
        assert abs(np.trace(out)) <= linalg.TAU_TRACE
        assert np.allclose(out, out.conj().T)


class TestValidators:
    def test_as_hermitian_rejects(self, rng):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        with pytest.raises(ValidationError):
            linalg.as_hermitian(a)

    def test_as_hermitian_symmetrizes_small_noise(self, rng):
        h = linalg.random_hermitian(rng, 3)
        noisy = h + 1e-13 * rng.standard_normal((3, 3))
        out = linalg.as_hermitian(noisy)
        assert np.array_equal(out, out.conj().T)

    def test_as_density_rejects_trace(self):
        with pytest.raises(ValidationError):
            linalg.as_density(np.eye(2))

    def test_as_density_rejects_nonpd(self):
        with pytest.raises(PositivityError):
            linalg.as_density(np.diag([1.5, -0.5]).astype(complex))

    def test_as_tangent_rejects_trace(self):
        with pytest.raises(ValidationError):
            linalg.as_tangent(np.eye(2))

    def test_as_skew(self):
        out = linalg.as_skew_hermitian(1j * SY * 0.3)
        assert np.array_equal(out, -out.conj().T)

    def test_block_field(self, rng):
        f = linalg.random_skew_field(rng, 3, 2)
        out = linalg.as_block_field(f, n=2, skew=True)
        assert out.shape == (3, 2, 2)
        with pytest.raises(ValidationError):
            linalg.as_block_field(f, n=3)


class TestCoordinates:
    def test_traceless_basis_orthonormal(self):
        for n in (2, 3, 4):
            b = linalg.traceless_hermitian_basis(n)
            assert b.shape[0] == n * n - 1
            gram = np.real(np.einsum("aij,bij->ab", b.conj(), b))
            assert np.allclose(gram, np.eye(n * n - 1), atol=1e-14)
            assert np.allclose(np.trace(b, axis1=1, axis2=2), 0)

    def test_roundtrip(self, rng):
        b = linalg.hermitian_basis(3)
        x = linalg.random_hermitian(rng, 3)
        c = linalg.herm_to_coords(b, x)
        assert np.allclose(linalg.coords_to_herm(b, c), x, atol=1e-14)
        # isometry
        assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(x))
