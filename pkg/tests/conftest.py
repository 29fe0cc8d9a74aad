import numpy as np
import pytest

from qot import kernels, linalg, lindblad


@pytest.fixture(scope="session")
def warm_kernels():
    """Compile every hot kernel once so timed blocks measure compute, not JIT."""
    rng = np.random.default_rng(0)
    basis = lindblad.pauli_basis()
    rho = linalg.random_density(rng, 2)
    v = linalg.random_skew_field(rng, 3, 2)
    x = linalg.random_hermitian(rng, 2)
    kernels.commutator_field(basis.mats, x)
    kernels.divergence_field(basis.mats, v)
    kernels.anticommutator_field(rho, v)
    kernels.laplacian_apply(basis.mats, basis.l2sum(), x)
    w, u = np.linalg.eigh(rho)
    kernels.eigenbasis_scale(u, kernels.logmean_kernel(w), v)
    kernels.psd_project(np.stack([np.eye(4, dtype=np.complex128)]))
    kernels.rk4_entropy_step(basis.mats, rho, 1e-4, kernels.KIND_ANTICOMM, 1e-11)
    kernels.rk4_entropy_step(basis.mats, rho, 1e-4, kernels.KIND_LOG, 1e-11)
    kernels.rk4_heat_step(basis.mats, basis.l2sum(), rho, 1e-4)
    kernels.rk4_lindblad_step(basis.mats, basis.l2sum(), x, rho, 1e-4)
    from qot import geodesic, spatial
    r1 = linalg.random_density(rng, 2)
    geodesic.solve_w2_direct(basis, rho, r1, 2)
    geodesic.solve_w2a_conic(basis, rho, r1, 2)
    f0 = spatial.MatrixField(np.repeat(rho[None], 4, axis=0))
    f1 = spatial.MatrixField(np.repeat(r1[None], 4, axis=0))
    spatial.solve_spatial_geodesic(f0, f1, basis, steps=2)
    spatial.solve_spatial_geodesic_direct(f0, f1, basis, steps=2, kind="log")
    spatial.spatial_entropy_flow(f0, basis, 1.0, "anticomm", t_final=1e-3, dt=1e-3)
    spatial.spatial_entropy_flow(f0, basis, 1.0, "log", t_final=1e-3, dt=1e-3)
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def pauli():
    return lindblad.pauli_basis()


@pytest.fixture(scope="session")
def basis_xz():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return lindblad.LindbladBasis(np.stack([sx, sz]))
