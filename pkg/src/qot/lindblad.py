"""Non-commutative differential calculus built from a set of Hermitian matrices:
gradient, divergence, Laplacian, the two non-commutative multiplications
(anti-commutator and Kubo-Mori), and the associated heat semigroup.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .errors import PositivityError, SingularSystemError, ValidationError
from .linalg import EPS_PD, as_hermitian, eigh_fixed

CONNECTIVITY_GAP = 1e-8  # gate on the 2nd-smallest singular value of the stacked commutator map

_PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def _vec(x):
    """Column-major vectorization, fixed across the codebase."""
    return np.asarray(x, dtype=np.complex128).flatten(order="F")


def _unvec(v, n):
    return np.asarray(v, dtype=np.complex128).reshape(n, n, order="F")


def commutator_map_matrix(ls):
    """Stacked matrix of X -> [L_k, X] on column-major vec coordinates,
    shape (N*n^2, n^2)."""
    n = ls.shape[1]
    eye = np.eye(n, dtype=np.complex128)
    rows = [np.kron(eye, l) - np.kron(l.T, eye) for l in ls]
    return np.concatenate(rows, axis=0)


@dataclass(frozen=True, eq=False)
class LindbladBasis:
    """An ordered set of Hermitian matrices L_1..L_N defining the gradient
    operator, with a certificate that the identity spans its null space.

    The gate is the second-smallest singular value of the stacked vectorized
    commutator map; `require_connected=False` admits degenerate bases (the
    metric solves then fall back to pseudo-inverse handling).
    """

    mats: np.ndarray
    connectivity_gap: float = field(init=False)

    def __init__(self, mats, require_connected=True):
        mats = np.asarray(mats, dtype=np.complex128)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValidationError(f"basis must have shape (N, n, n), got {mats.shape}")
        n = mats.shape[1]
        if mats.shape[0] > n * n:
            raise ValidationError(f"basis size {mats.shape[0]} exceeds n^2 = {n * n}")
        if mats.shape[0] == 0:
            # empty basis: the gradient's null space is all of H, which equals
            # span{I} only in the scalar case n = 1
            gap = np.inf if n == 1 else 0.0
        else:
            mats = np.stack([as_hermitian(l, name=f"L[{k}]") for k, l in enumerate(mats)])
            sv = np.linalg.svd(commutator_map_matrix(mats), compute_uv=False)
            gap = float(sv[-2]) if sv.size >= 2 else 0.0
        if require_connected and gap <= CONNECTIVITY_GAP:
            raise ValidationError(
                f"null space of the gradient is larger than span{{I}} "
                f"(second-smallest singular value {gap:.3e} <= {CONNECTIVITY_GAP})"
            )
        object.__setattr__(self, "mats", mats)
        object.__setattr__(self, "connectivity_gap", gap)

    @property
    def dim(self):
        return self.mats.shape[1]

    @property
    def size(self):
        return self.mats.shape[0]

    @property
    def is_connected(self):
        return self.connectivity_gap > CONNECTIVITY_GAP

    def l2sum(self):
        return np.einsum("kij,kjl->il", self.mats, self.mats)


def pauli_basis():
    """The Pauli set {sigma_x, sigma_y, sigma_z} for n = 2."""
    return LindbladBasis(np.stack([_PAULI_X, _PAULI_Y, _PAULI_Z]))


def gell_mann_basis(n):
    """Orthonormal generalized Gell-Mann basis of the traceless Hermitian
    matrices (the full Hermitian basis with the identity dropped), size n^2-1."""
    from .linalg import traceless_hermitian_basis

    return LindbladBasis(traceless_hermitian_basis(n))


def basis_from_name(name):
    """Named presets: "pauli" (n=2) and "gellmann:<n>"."""
    if name == "pauli":
        return pauli_basis()
    if name.startswith("gellmann:"):
        n = int(name.split(":", 1)[1])
        if n < 2:
            raise ValidationError(f"gellmann basis needs n >= 2, got {n}")
        return gell_mann_basis(n)
    raise ValidationError(f"unknown basis preset {name!r} (use pauli or gellmann:<n>)")


def _check_dims(basis, x, name="argument"):
    x = np.asarray(x, dtype=np.complex128)
    if x.shape[-1] != basis.dim or x.shape[-2] != basis.dim:
        raise ValidationError(f"{name} dim {x.shape} does not match basis dim {basis.dim}")
    return x


def grad_L(basis, x):
    """Gradient blocks [L_k, X]; skew-Hermitian for Hermitian X."""
    x = _check_dims(basis, x, "X")
    return kernels.commutator_field(basis.mats, np.ascontiguousarray(x))


def div_L(basis, y):
    """Divergence sum_k [L_k, Y_k]; the adjoint of grad_L."""
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != basis.mats.shape:
        raise ValidationError(f"field shape {y.shape} does not match basis {basis.mats.shape}")
    return kernels.divergence_field(basis.mats, np.ascontiguousarray(y))


def laplacian_L(basis, x):
    """Delta_L X = -div_L(grad_L X) = sum_k 2 L_k X L_k - X L_k^2 - L_k^2 X."""
    x = _check_dims(basis, x, "X")
    return kernels.laplacian_apply(basis.mats, basis.l2sum(), np.ascontiguousarray(x))


def mult_anticomm(rho, v):
    """Anti-commutator multiplication M_rho(v) = (rho v + v rho) / 2, blockwise."""
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    v = np.ascontiguousarray(v, dtype=np.complex128)
    if v.shape[-1] != rho.shape[0]:
        raise ValidationError("dimension mismatch between rho and the field")
    return kernels.anticommutator_field(rho, v)


def _log_eigs(rho):
    w, u = eigh_fixed(rho)
    if w[0] <= EPS_PD:
        raise PositivityError(f"rho must be strictly PD (min eig {w[0]:.3e})",
                              min_eig=float(w[0]))
    return w, u


def mult_kubo_mori(rho, v):
    """Kubo-Mori multiplication: entrywise logarithmic-mean scaling in the
    eigenbasis of rho (closed form of the integral of rho^s v rho^(1-s))."""
    v = np.ascontiguousarray(v, dtype=np.complex128)
    w, u = _log_eigs(np.asarray(rho, dtype=np.complex128))
    lam = kernels.logmean_kernel(w)
    return kernels.eigenbasis_scale(u, lam, v)


def mult_kubo_mori_inverse(rho, v):
    """Inverse of `mult_kubo_mori`: entrywise division by the logarithmic mean."""
    v = np.ascontiguousarray(v, dtype=np.complex128)
    w, u = _log_eigs(np.asarray(rho, dtype=np.complex128))
    lam = kernels.logmean_kernel(w)
    return kernels.eigenbasis_scale(u, 1.0 / lam, v)


def kubo_mori_quadrature(rho, v, nodes=10_000):
    """Midpoint-rule evaluation of the integral of rho^s v rho^(1-s) ds.

    Test oracle for `mult_kubo_mori`; kept deliberately independent of the
    logarithmic-mean kernel.
    """
    v = np.asarray(v, dtype=np.complex128)
    w, u = _log_eigs(np.asarray(rho, dtype=np.complex128))
    s = (np.arange(nodes) + 0.5) / nodes
    vt = u.conj().T @ v @ u
    pw_l = np.power(w[None, :], s[:, None])          # (S, n): p_i^s
    pw_r = np.power(w[None, :], 1.0 - s[:, None])    # (S, n): p_j^(1-s)
    weights = np.einsum("si,sj->ij", pw_l, pw_r) / nodes
    return u @ (weights * vt) @ u.conj().T


def laplacian_superoperator(basis):
    """The n^2 x n^2 matrix of Delta_L on column-major vec coordinates."""
    n = basis.dim
    eye = np.eye(n, dtype=np.complex128)
    out = np.zeros((n * n, n * n), dtype=np.complex128)
    for l in basis.mats:
        l2 = l @ l
        out += 2.0 * np.kron(l.T, l) - np.kron(eye, l2) - np.kron(l2.T, eye)
    return out


def heat_semigroup(basis, rho0, t):
    """Exact solution of rho' = Delta_L rho at time t (superoperator exponential)."""
    if t < 0:
        raise ValidationError(f"t must be nonnegative, got {t}")
    rho0 = _check_dims(basis, rho0, "rho0")
    sup = laplacian_superoperator(basis)
    out = _unvec(scipy.linalg.expm(t * sup) @ _vec(rho0), basis.dim)
    return 0.5 * (out + out.conj().T)


def lindblad_step(basis, ham, rho, dt):
    """One RK4 step of rho' = -i[H, rho] + (1/2) Delta_L rho.

    Raises PositivityError when the step destroys strict positivity, which
    signals that dt is too large.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    ham = as_hermitian(ham, name="H")
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    out = kernels.rk4_lindblad_step(basis.mats, basis.l2sum(),
                                    np.ascontiguousarray(ham), rho, dt)
    w = np.linalg.eigvalsh(out)
    if w[0] < EPS_PD:
        raise PositivityError(
            f"positivity lost in lindblad_step (min eig {w[0]:.3e}); reduce dt",
            min_eig=float(w[0]),
        )
    return out


def heat_equilibrium_rate(basis):
    """Largest nonzero eigenvalue of Delta_L restricted to traceless Hermitians
    (the asymptotic decay rate of the heat flow)."""
    sup = laplacian_superoperator(basis)
    w = np.linalg.eigvalsh(0.5 * (sup + sup.conj().T))
    w = np.sort(w)
    nonzero = w[np.abs(w) > 1e-9]
    if nonzero.size == 0:
        raise SingularSystemError("Laplacian has no nonzero spectrum")
    return float(nonzero[-1])
