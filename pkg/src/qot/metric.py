"""Riemannian structure on density matrices: weighted Poisson solves that
identify tangent vectors with potentials, the induced inner products for the
anti-commutator and logarithmic geometries, and minimum-norm velocities.

The operator literally defined by the tangent/potential correspondence,
A_rho(lam) = -1/2 div_L(rho grad lam + grad lam rho), is negative-definite;
all linear algebra here works with its SPD negation K_rho (the metric
operator), so delta = A_rho(lam) becomes lam = -K_rho^{-1} delta.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import SingularSystemError, ValidationError
from .lindblad import (div_L, grad_L, laplacian_superoperator, mult_anticomm,
                       mult_kubo_mori, _vec, _unvec)
from .linalg import (as_density, as_tangent, herm_to_coords, coords_to_herm,
                     traceless_hermitian_basis)


class MetricKind(enum.Enum):
    """The two non-commutative multiplications and their geometries."""

    ANTICOMM = "anticomm"
    LOG = "log"

    @classmethod
    def coerce(cls, kind):
        if isinstance(kind, cls):
            return kind
        return cls(str(kind).lower())


@dataclass(frozen=True)
class Potential:
    """Traceless-gauge representative of a potential lambda (unique up to alpha*I)."""

    mat: np.ndarray
    gauge: str = "traceless"


def apply_metric_operator(basis, rho, lam, kind):
    """K_rho(lam): 1/2 div_L(rho grad lam + grad lam rho) for the anti-commutator
    kind, div_L(M_rho(grad lam)) for the logarithmic kind. SPD on traceless
    Hermitians whenever the basis passes the connectivity gate."""
    kind = MetricKind.coerce(kind)
    g = grad_L(basis, lam)
    if kind is MetricKind.ANTICOMM:
        return div_L(basis, mult_anticomm(rho, g))
    return div_L(basis, mult_kubo_mori(rho, g))


class MetricWorkspace:
    """Per-basis cache of the traceless coordinate basis and its gradients.

    Reusable across densities; all methods are pure given the inputs.
    """

    def __init__(self, basis):
        self.basis = basis
        self.n = basis.dim
        self.tb = traceless_hermitian_basis(self.n)
        self.dim = self.tb.shape[0]
        # gradients of the coordinate basis, shape (d, N, n, n)
        self.gtb = np.stack([grad_L(basis, b) for b in self.tb])

    def metric_matrix(self, rho, kind):
        """Real (n^2-1)^2 matrix of K_rho on the traceless coordinates."""
        kind = MetricKind.coerce(kind)
        if kind is MetricKind.ANTICOMM:
            mg = np.stack([mult_anticomm(rho, g) for g in self.gtb])
        else:
            mg = np.stack([mult_kubo_mori(rho, g) for g in self.gtb])
        k = np.real(np.einsum("akij,bkij->ab", self.gtb.conj(), mg))
        return 0.5 * (k + k.T)

    def solve(self, rho, delta_coords, kind):
        """Solve K_rho x = delta_coords; Cholesky for connected bases, spectral
        pseudo-inverse (with residual policing by the caller) otherwise."""
        k = self.metric_matrix(rho, kind)
        if self.basis.is_connected:
            try:
                cf = scipy.linalg.cho_factor(k)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(
                    f"metric operator not positive-definite: {exc}") from exc
            return scipy.linalg.cho_solve(cf, delta_coords)
        w, q = np.linalg.eigh(k)
        cut = 1e-12 * max(w[-1], 1.0)
        comp = q.T @ delta_coords
        inv = np.where(w > cut, comp / np.where(w > cut, w, 1.0), 0.0)
        return q @ inv


def poisson_solve(basis, rho, delta, kind=MetricKind.ANTICOMM, workspace=None,
                  residual_tol=1e-10):
    """Potential lambda (traceless gauge) with delta = -K_rho(lambda).

    The residual ||delta - A_rho(lambda)|| <= residual_tol * ||delta|| is
    verified; failure raises SingularSystemError (an invalid-basis signal,
    e.g. a tangent outside the reachable range of a degenerate basis).
    """
    rho = as_density(rho)
    delta = as_tangent(delta)
    ws = workspace or MetricWorkspace(basis)
    dnorm = np.linalg.norm(delta)
    if dnorm == 0.0:
        return Potential(np.zeros_like(delta))
    dc = herm_to_coords(ws.tb, delta)
    lam = coords_to_herm(ws.tb, -ws.solve(rho, dc, kind))
    residual = np.linalg.norm(delta + apply_metric_operator(basis, rho, lam, kind))
    if residual > residual_tol * dnorm:
        raise SingularSystemError(
            f"Poisson solve residual {residual:.3e} exceeds {residual_tol:.1e} * ||delta||; "
            "the basis cannot reach this tangent")
    return Potential(lam)


def inner_product(basis, rho, delta1, delta2, kind=MetricKind.ANTICOMM,
                  workspace=None):
    """Riemannian inner product <delta1, delta2>_rho = -tr(lambda1 delta2)."""
    rho = as_density(rho)
    d1 = as_tangent(delta1, name="delta1")
    d2 = as_tangent(delta2, name="delta2")
    ws = workspace or MetricWorkspace(basis)
    if np.linalg.norm(d1) == 0.0 or np.linalg.norm(d2) == 0.0:
        return 0.0
    c1 = herm_to_coords(ws.tb, d1)
    c2 = herm_to_coords(ws.tb, d2)
    return float(np.dot(c1, ws.solve(rho, c2, kind)))


def min_norm_velocity(basis, rho, delta, kind=MetricKind.ANTICOMM, workspace=None):
    """The velocity v = -grad_L(lambda) of minimal action tr(rho v* v) among all
    fields satisfying the continuity constraint for delta."""
    lam = poisson_solve(basis, rho, delta, kind, workspace)
    return -grad_L(basis, lam.mat)


def velocity_action(basis, rho, v, kind=MetricKind.ANTICOMM):
    """Kinetic action of a velocity field: tr(rho v* v) for the anti-commutator
    kind, <v, M_rho(v)> for the logarithmic kind (they agree on gradients)."""
    kind = MetricKind.coerce(kind)
    if kind is MetricKind.ANTICOMM:
        m = mult_anticomm(rho, v)
    else:
        m = mult_kubo_mori(rho, v)
    return float(np.real(np.vdot(v, m)))


def continuity_image(basis, rho, v, kind=MetricKind.ANTICOMM):
    """The tangent delta produced by a velocity field: delta = div_L M_rho(v)."""
    kind = MetricKind.coerce(kind)
    if kind is MetricKind.ANTICOMM:
        return div_L(basis, mult_anticomm(rho, v))
    return div_L(basis, mult_kubo_mori(rho, v))


def lyapunov_crosscheck(basis, rho, delta):
    """Cross-check of the Poisson solve against the Lyapunov-equation route:
    h = Delta_L^+ delta, then rho G_k + G_k rho = 2 (grad_L h)_k per block.

    Returns the reconstruction residual ||delta + 1/2 div_L(rho G + G rho)||
    (assertable) and the discrepancy ||G - grad_L lambda|| (reported only; the
    range condition behind G = grad_L lambda is not proven in this setting).
    """
    rho = as_density(rho)
    delta = as_tangent(delta)
    n = basis.dim
    sup = laplacian_superoperator(basis)
    h = _unvec(np.linalg.pinv(sup, rcond=1e-10) @ _vec(delta), n)
    h = 0.5 * (h + h.conj().T)
    gh = grad_L(basis, h)
    w, u = np.linalg.eigh(rho)
    denom = w[:, None] + w[None, :]
    g = np.stack([u @ ((u.conj().T @ (2.0 * blk) @ u) / denom) @ u.conj().T
                  for blk in gh])
    recon = -div_L(basis, mult_anticomm(rho, g))
    lam = poisson_solve(basis, rho, delta, MetricKind.ANTICOMM)
    glam = grad_L(basis, lam.mat)
    return {
        "reconstruction_residual": float(np.linalg.norm(delta - recon)),
        "lyapunov_vs_gradient": float(np.linalg.norm(g - glam)),
        "gradient_norm": float(np.linalg.norm(glam)),
    }
