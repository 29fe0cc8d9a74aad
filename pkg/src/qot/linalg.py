"""Dense complex Hermitian linear algebra: validated constructors, deterministic
eigendecompositions, matrix functions, and real coordinates on Hermitian spaces.

Matrices are plain complex128 ndarrays throughout; the validating constructors
(`as_hermitian`, `as_skew_hermitian`, `as_density`, `as_tangent`, `as_block_field`)
return exactly (anti-)symmetrized copies and reject inputs that violate their
invariant by more than the stated tolerance instead of silently repairing them.
"""

from __future__ import annotations

import numpy as np

from .errors import PositivityError, ValidationError

# Tolerances for double precision at n <= 16.
TAU_HERM = 1e-10    # relative Hermiticity defect accepted by constructors
TAU_TRACE = 1e-9    # absolute trace defect (density: |tr-1|, tangent: |tr|)
EPS_PD = 1e-12      # strict positive-definiteness floor
TAU_RECON = 1e-10   # relative eigendecomposition reconstruction error
DEGEN_TOL = 1e-12   # relative eigenvalue-collision threshold for divided differences


def _as_complex_square(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    return a


def as_hermitian(a, tol=TAU_HERM, name="matrix"):
    """Validate and exactly symmetrize a Hermitian matrix."""
    a = _as_complex_square(a, name)
    h = 0.5 * (a + a.conj().T)
    defect = np.linalg.norm(a - h)
    if defect > tol * max(1.0, np.linalg.norm(a)):
        raise ValidationError(f"{name} is not Hermitian (defect {defect:.3e})")
    return h


def as_skew_hermitian(a, tol=TAU_HERM, name="matrix"):
    """Validate and exactly anti-symmetrize a skew-Hermitian matrix."""
    a = _as_complex_square(a, name)
    s = 0.5 * (a - a.conj().T)
    defect = np.linalg.norm(a - s)
    if defect > tol * max(1.0, np.linalg.norm(a)):
        raise ValidationError(f"{name} is not skew-Hermitian (defect {defect:.3e})")
    return s


def as_density(a, tol=TAU_HERM, name="density"):
    """Validate a strictly positive-definite, unit-trace Hermitian matrix."""
    h = as_hermitian(a, tol, name)
    tr = np.trace(h).real
    if abs(tr - 1.0) > TAU_TRACE:
        raise ValidationError(f"{name} trace is {tr!r}, not 1 within {TAU_TRACE}")
    w = np.linalg.eigvalsh(h)
    if w[0] <= EPS_PD:
        raise PositivityError(
            f"{name} is not strictly positive-definite (min eig {w[0]:.3e})",
            min_eig=float(w[0]),
        )
    return h


def as_tangent(a, tol=TAU_HERM, name="tangent"):
    """Validate a traceless Hermitian matrix (tangent vector at a density)."""
    h = as_hermitian(a, tol, name)
    tr = np.trace(h).real
    if abs(tr) > TAU_TRACE:
        raise ValidationError(f"{name} trace is {tr!r}, not 0 within {TAU_TRACE}")
    return h


def as_block_field(blocks, n=None, skew=True, tol=TAU_HERM, name="field"):
    """Validate a block field: an (N, n, n) stack of skew-Hermitian (or Hermitian) blocks."""
    b = np.asarray(blocks, dtype=np.complex128)
    if b.ndim != 3 or b.shape[1] != b.shape[2]:
        raise ValidationError(f"{name} must have shape (N, n, n), got {b.shape}")
    if n is not None and b.shape[1] != n:
        raise ValidationError(f"{name} block dim {b.shape[1]} != expected {n}")
    fix = as_skew_hermitian if skew else as_hermitian
    return np.stack([fix(blk, tol, f"{name}[{k}]") for k, blk in enumerate(b)])


def hs_inner(x, y):
    """Hilbert-Schmidt inner product tr(X* Y); supports (n,n) and block (N,n,n) arguments."""
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return complex(np.vdot(x, y))


def eigh_fixed(a):
    """Hermitian eigendecomposition with a deterministic eigenvector phase.

    Eigenvalues ascending; each eigenvector is rotated so its largest-magnitude
    component is real-positive (ties broken by lowest row index, which is what
    argmax returns).
    """
    a = _as_complex_square(a)
    w, u = np.linalg.eigh(a)
    idx = np.argmax(np.abs(u), axis=0)
    lead = u[idx, np.arange(u.shape[1])]
    phase = lead / np.abs(lead)
    u = u * phase.conj()[None, :]
    return w, u


def matrix_function(a, f, name="matrix"):
    """Apply a real scalar function to a Hermitian matrix through its spectrum."""
    a = as_hermitian(a, name=name)
    w, u = eigh_fixed(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        fw = np.asarray(f(w), dtype=np.float64)
    if not np.all(np.isfinite(fw)):
        raise ValidationError(f"eigenvalue outside the domain of f: spectrum {w}")
    out = (u * fw) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def herm_log(a, floor=10 * EPS_PD, name="matrix"):
    """Matrix logarithm of a positive-definite Hermitian matrix.

    States within `floor` of singularity abort with a diagnostic instead of
    being regularized silently.
    """
    a = as_hermitian(a, name=name)
    w, u = eigh_fixed(a)
    if w[0] < floor:
        raise PositivityError(
            f"{name} too close to singular for log (min eig {w[0]:.3e} < {floor:.1e})",
            min_eig=float(w[0]),
        )
    out = (u * np.log(w)) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def herm_exp(a):
    """Matrix exponential of a Hermitian matrix."""
    return matrix_function(a, np.exp)


def project_traceless_hermitian(a):
    """Project any complex matrix onto traceless Hermitian: (A+A*)/2 - (tr/n) I."""
    a = _as_complex_square(a)
    h = 0.5 * (a + a.conj().T)
    n = h.shape[0]
    return h - (np.trace(h).real / n) * np.eye(n)


# ---------------------------------------------------------------------------
# Real orthonormal coordinates on Hermitian matrix spaces.
# ---------------------------------------------------------------------------

def traceless_hermitian_basis(n):
    """Orthonormal basis of the traceless Hermitian matrices (generalized
    Gell-Mann construction), shape (n*n-1, n, n).

    Ordering: symmetric off-diagonal pairs, antisymmetric(-imaginary) pairs,
    then diagonal matrices; <B_i, B_j> = delta_ij.
    """
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = m[j, i] = 1.0 / np.sqrt(2.0)
            mats.append(m)
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j] = -1j / np.sqrt(2.0)
            m[j, i] = 1j / np.sqrt(2.0)
            mats.append(m)
    for l in range(1, n):
        m = np.zeros((n, n), dtype=np.complex128)
        m[:l, :l] = np.eye(l)
        m[l, l] = -l
        mats.append(m / np.sqrt(l * (l + 1)))
    if not mats:  # n = 1: the traceless space is trivial
        return np.zeros((0, 1, 1), dtype=np.complex128)
    return np.stack(mats)


def hermitian_basis(n):
    """Orthonormal basis of all Hermitian matrices: I/sqrt(n) first, then the
    traceless basis. Shape (n*n, n, n)."""
    eye = np.eye(n, dtype=np.complex128) / np.sqrt(n)
    return np.concatenate([eye[None], traceless_hermitian_basis(n)])


def herm_to_coords(basis, x):
    """Real coordinates of Hermitian X (or a stack of them) in an orthonormal basis."""
    x = np.asarray(x, dtype=np.complex128)
    return np.real(np.tensordot(x, basis.conj(), axes=[(-2, -1), (-2, -1)]))


def coords_to_herm(basis, c):
    """Inverse of `herm_to_coords`."""
    c = np.asarray(c, dtype=np.float64)
    return np.tensordot(c, basis, axes=[(-1,), (0,)])


# ---------------------------------------------------------------------------
# Random test matrices.
# ---------------------------------------------------------------------------

def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_tangent(rng, n, scale=1.0):
    return project_traceless_hermitian(random_hermitian(rng, n, scale))


def random_density(rng, n, min_eig=0.02):
    """Random density matrix bounded away from the boundary of the PD cone."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    rho = (1.0 - n * min_eig) * rho + min_eig * np.eye(n)
    return as_density(rho)


def random_skew_field(rng, num_blocks, n, scale=1.0):
    a = rng.standard_normal((num_blocks, n, n)) + 1j * rng.standard_normal((num_blocks, n, n))
    return scale * 0.5 * (a - np.conj(np.swapaxes(a, 1, 2)))
