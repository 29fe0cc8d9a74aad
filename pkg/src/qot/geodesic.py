"""Wasserstein distances and geodesics between density matrices.

Two independent backends compute the anti-commutator distance: the convex
conic (momentum) formulation solved by operator splitting, and direct
minimization of the discrete geodesic energy. The logarithmic distance has no
convex reformulation and is computed by the direct backend only.

`verify_optimality` evaluates the discrete residuals of the sufficient
optimality conditions (the Hamilton-Jacobi-type equation for the potential
and the continuity equation) along a solved path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .linalg import EPS_PD, as_density, project_traceless_hermitian
from .metric import (MetricKind, MetricWorkspace, apply_metric_operator,
                     min_norm_velocity, poisson_solve)
from .lindblad import grad_L, mult_anticomm, mult_kubo_mori
from .transport import ConicTransport, DirectTransport, SolveReport, SolverOptions

__all__ = [
    "DiscretePath", "SolveReport", "SolverOptions", "solve_w2a_conic",
    "solve_w2_direct", "verify_optimality", "hj_rhs", "log_hj_coefficient",
    "log_hj_coefficient_quadrature",
]


@dataclass(frozen=True)
class DiscretePath:
    """A time-staggered transport path: T+1 densities at the nodes j/T and T
    skew-Hermitian momentum fields at the midpoints, with
    rho_{j+1} - rho_j = dt * div_L(m_j) up to the solver tolerance."""

    densities: np.ndarray   # (T+1, n, n)
    momenta: np.ndarray     # (T, N, n, n)
    kind: MetricKind

    @property
    def steps(self):
        return self.densities.shape[0] - 1

    @property
    def times(self):
        return np.linspace(0.0, 1.0, self.steps + 1)

    def continuity_residuals(self, basis):
        """Per-step Frobenius residual of the discrete continuity equation."""
        dt = 1.0 / self.steps
        out = np.empty(self.steps)
        for j in range(self.steps):
            div = kernels.divergence_field(basis.mats,
                                           np.ascontiguousarray(self.momenta[j]))
            out[j] = np.linalg.norm(self.densities[j + 1] - self.densities[j] - dt * div)
        return out

    def validate(self, rho0, rho1, basis, tol=1e-6):
        """Check endpoint, interior-density, and continuity invariants."""
        if np.linalg.norm(self.densities[0] - rho0) > 1e-12 or \
           np.linalg.norm(self.densities[-1] - rho1) > 1e-12:
            raise ValidationError("path endpoints do not match the marginals")
        for j in range(1, self.steps):
            w = np.linalg.eigvalsh(self.densities[j])
            if w[0] <= 0.0:
                raise ValidationError(f"interior density {j} not PD (min eig {w[0]:.2e})")
            if abs(np.trace(self.densities[j]).real - 1.0) > 1e-9:
                raise ValidationError(f"interior density {j} trace off by > 1e-9")
        res = self.continuity_residuals(basis)
        if np.max(res) > tol:
            raise ValidationError(f"continuity residual {np.max(res):.2e} exceeds {tol:.1e}")
        return self


def _momenta_from_nodes(basis, nodes, kind, ws=None):
    """Recover the minimum-norm midpoint momenta M_rhobar(v_j) from a node path."""
    kind = MetricKind.coerce(kind)
    ws = ws or MetricWorkspace(basis)
    steps = nodes.shape[0] - 1
    dt = 1.0 / steps
    momenta = np.empty((steps, basis.size, basis.dim, basis.dim), dtype=np.complex128)
    for j in range(steps):
        rhobar = as_density(0.5 * (nodes[j] + nodes[j + 1]))
        delta = project_traceless_hermitian((nodes[j + 1] - nodes[j]) / dt)
        v = min_norm_velocity(basis, rhobar, delta, kind, workspace=ws)
        if kind is MetricKind.ANTICOMM:
            momenta[j] = mult_anticomm(rhobar, v)
        else:
            momenta[j] = mult_kubo_mori(rhobar, v)
    return momenta


def solve_w2a_conic(basis, rho0, rho1, steps, opts=None):
    """Anti-commutator Wasserstein distance via the convex conic formulation.

    Returns (DiscretePath, SolveReport); the path momenta are the skew parts
    of the optimal momentum variables, so the discrete continuity equation
    holds to machine precision.
    """
    rho0 = as_density(rho0, name="rho0")
    rho1 = as_density(rho1, name="rho1")
    solver = ConicTransport(basis, rho0[None], rho1[None], steps, opts=opts)
    nodes, _q, u, report = solver.solve()
    momenta = 0.5 * (u[:, 0] - np.conj(np.swapaxes(u[:, 0], -1, -2)))
    path = DiscretePath(densities=nodes[:, 0], momenta=momenta,
                        kind=MetricKind.ANTICOMM)
    return path, report


def solve_w2_direct(basis, rho0, rho1, steps, kind=MetricKind.ANTICOMM, opts=None):
    """Wasserstein distance (either geometry) by discrete geodesic-energy
    minimization over interior nodes; the distance is sqrt(min energy)."""
    kind = MetricKind.coerce(kind)
    rho0 = as_density(rho0, name="rho0")
    rho1 = as_density(rho1, name="rho1")
    solver = DirectTransport(basis, rho0[None], rho1[None], steps, kind=kind, opts=opts)
    nodes, report = solver.solve()
    momenta = _momenta_from_nodes(basis, nodes[:, 0], kind)
    path = DiscretePath(densities=nodes[:, 0], momenta=momenta, kind=kind)
    return path, report


def hj_rhs(basis, rho, lam, kind=MetricKind.ANTICOMM):
    """Right-hand side of the Hamilton-Jacobi-type equation for the potential.

    Anti-commutator: (1/2) (grad lam)*(grad lam).
    Logarithmic: the triple-integral expression, reduced in the eigenbasis of
    rho to closed-form scalar coefficients per eigenvalue triple.
    """
    kind = MetricKind.coerce(kind)
    g = grad_L(basis, lam)
    if kind is MetricKind.ANTICOMM:
        out = 0.5 * np.einsum("kij,kil->jl", g.conj(), g)
        return 0.5 * (out + out.conj().T)
    w, u = np.linalg.eigh(rho)
    gt = np.einsum("ia,kij,jb->kab", u.conj(), g, u)
    hmat = np.einsum("kmi,kmj->mij", gt.conj(), gt)   # H^(m)_{ij}
    n = rho.shape[0]
    coeff = np.empty((n, n, n))
    for i in range(n):
        for j in range(n):
            for m in range(n):
                coeff[i, j, m] = log_hj_coefficient(w[i], w[j], w[m])
    out = u @ np.einsum("mij,ijm->ij", hmat, coeff) @ u.conj().T
    return 0.5 * (out + out.conj().T)


def _logmean(a, b):
    if abs(a - b) < 1e-12 * max(a, b):
        return 0.5 * (a + b)
    return (a - b) / (np.log(a) - np.log(b))


def _j_equal(a, c):
    """J(a, a, c) = a (L - 1 + e^-L) / L^2 with L = log(a/c)."""
    ell = np.log(a / c)
    if abs(ell) < 1e-3:
        return a * (0.5 - ell / 6.0 + ell ** 2 / 24.0 - ell ** 3 / 120.0)
    return a * (ell - 1.0 + np.exp(-ell)) / ell ** 2


def log_hj_coefficient(a, b, c):
    """Closed form of the scalar kernel of the logarithmic HJ equation:

    T(a,b,c) = int_0^1 ds int_0^1 da' int_0^a' db'
               a^(a'-b') c^(1-a') b^(b') / [((1-s)+sa)((1-s)+sb)]
             = J(a,b,c) / Lambda(a,b),
    with J(a,b,c) = (Lambda(b,c) - Lambda(a,c)) / (log b - log a).
    """
    d = np.log(b) - np.log(a)
    if abs(d) < 1e-5:
        j = _j_equal(np.sqrt(a * b), c)
    else:
        j = (_logmean(b, c) - _logmean(a, c)) / d
    return j / _logmean(a, b)


def log_hj_coefficient_quadrature(a, b, c, nodes=50):
    """Midpoint-rule 3-D quadrature oracle for `log_hj_coefficient`."""
    s = (np.arange(nodes) + 0.5) / nodes
    al = (np.arange(nodes) + 0.5) / nodes
    tt = (np.arange(nodes) + 0.5) / nodes   # beta = alpha * t
    sker = 1.0 / (((1.0 - s) + s * a) * ((1.0 - s) + s * b))
    sint = np.sum(sker) / nodes
    be = al[:, None] * tt[None, :]
    vals = (a ** (al[:, None] - be)) * (b ** be) * (c ** (1.0 - al[:, None]))
    abint = np.sum(vals * al[:, None]) / nodes ** 2
    return sint * abint


def verify_optimality(basis, path, kind=None, workspace=None):
    """Discrete residuals of the optimality system along a path.

    Per midpoint j the potential lambda_{j+1/2} is recovered from a Poisson
    solve at the midpoint density. The Hamilton-Jacobi residual at interior
    node i compares (lambda_{i+1/2}-lambda_{i-1/2})/dt with the geometry's HJ
    right-hand side; since per-time potentials are only defined up to alpha*I,
    the residual is evaluated on the traceless projection (the trace component
    of the HJ equation is pure gauge). The continuity residual compares the
    centered time derivative of the density with the metric operator applied
    to the node potential. Residuals are reported, not asserted: Theorem-level
    conditions are sufficient only.
    """
    kind = MetricKind.coerce(kind or path.kind)
    ws = workspace or MetricWorkspace(basis)
    nodes = path.densities
    steps = path.steps
    dt = 1.0 / steps
    lams = []
    for j in range(steps):
        rhobar = as_density(0.5 * (nodes[j] + nodes[j + 1]))
        delta = project_traceless_hermitian((nodes[j + 1] - nodes[j]) / dt)
        lams.append(poisson_solve(basis, rhobar, delta, kind, workspace=ws).mat)
    hj = np.zeros(max(steps - 1, 0))
    cont = np.zeros(max(steps - 1, 0))
    lam_scale = max(float(np.max(np.abs(lams))) if lams else 0.0, 1e-30)
    for i in range(1, steps):
        lam_node = 0.5 * (lams[i - 1] + lams[i])
        rho_node = nodes[i]
        ldot = (lams[i] - lams[i - 1]) / dt
        rhs = hj_rhs(basis, rho_node, lam_node, kind)
        hj[i - 1] = np.linalg.norm(project_traceless_hermitian(ldot - rhs))
        rdot = (nodes[i + 1] - nodes[i - 1]) / (2.0 * dt)
        cont[i - 1] = np.linalg.norm(
            rdot + apply_metric_operator(basis, as_density(rho_node), lam_node, kind))
    return {
        "hj_residuals": hj,
        "continuity_residuals": cont,
        "max_hj_residual": float(np.max(hj)) if hj.size else 0.0,
        "max_continuity_residual": float(np.max(cont)) if cont.size else 0.0,
        "potential_scale": lam_scale,
    }
