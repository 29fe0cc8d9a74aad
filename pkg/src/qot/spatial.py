"""Matrix-valued densities on a 1-D spatial grid: combined spatial and
non-commutative continuity equation, the weighted transport problem, and
spatial entropy flows.

The domain is E = [0, 1] with a cell-centered uniform grid of G points
(spacing h = 1/G) and zero-flux boundaries: the grid divergence is defined as
minus the transpose of the grid gradient (summation by parts), which makes
total mass conservation exact for any flux.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import kernels
from .errors import PositivityError, ValidationError
from .lindblad import laplacian_superoperator, _vec
from .linalg import EPS_PD, TAU_TRACE, as_hermitian
from .metric import MetricKind
from .transport import ConicTransport, DirectTransport, SolveReport, SolverOptions
from .flows import FlowTrace

_LOG_FLOOR = 10 * EPS_PD
_KIND_FLAG = {MetricKind.ANTICOMM: kernels.KIND_ANTICOMM, MetricKind.LOG: kernels.KIND_LOG}


@lru_cache(maxsize=32)
def _grid_gradient(g, h):
    """Dense (G, G) gradient matrix: centered differences inside, one-sided at
    the boundary rows; exact on affine functions and zero on constants."""
    if g < 3:
        raise ValidationError(f"grid too small for differences: G = {g} < 3")
    d = np.zeros((g, g))
    for i in range(1, g - 1):
        d[i, i - 1] = -0.5 / h
        d[i, i + 1] = 0.5 / h
    d[0, 0], d[0, 1] = -1.0 / h, 1.0 / h
    d[-1, -2], d[-1, -1] = -1.0 / h, 1.0 / h
    return d


def grid_gradient_matrix(g, h=None):
    return _grid_gradient(g, h if h is not None else 1.0 / g)


def grid_divergence_matrix(g, h=None):
    """The discrete divergence -D_grad^T; column sums vanish, so any flux
    conserves total mass exactly."""
    return -grid_gradient_matrix(g, h).T


@dataclass(frozen=True)
class MatrixField:
    """A family of Hermitian matrices on the grid; for density fields every
    value is positive-definite and h * sum_x tr(rho(x)) = 1."""

    values: np.ndarray

    def __init__(self, values):
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise ValidationError(f"field values must be (G, n, n), got {values.shape}")
        values = np.stack([as_hermitian(v, name=f"field[{x}]")
                           for x, v in enumerate(values)])
        object.__setattr__(self, "values", values)

    @property
    def grid_size(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def h(self):
        return 1.0 / self.grid_size

    @property
    def xs(self):
        g = self.grid_size
        return (np.arange(g) + 0.5) / g

    def mass(self):
        return float(self.h * np.sum(np.trace(self.values, axis1=1, axis2=2).real))

    def require_density(self):
        if abs(self.mass() - 1.0) > TAU_TRACE:
            raise ValidationError(f"field mass {self.mass()!r} is not 1 within {TAU_TRACE}")
        for x, v in enumerate(self.values):
            w = np.linalg.eigvalsh(v)
            if w[0] <= EPS_PD:
                raise PositivityError(
                    f"field value at grid point {x} is not PD (min eig {w[0]:.2e})",
                    min_eig=float(w[0]))
        return self

    def entropy(self):
        w = np.linalg.eigvalsh(self.values)
        w = np.maximum(w, EPS_PD)
        return float(-self.h * np.sum(w * np.log(w)))


def grad_x(field):
    """Grid gradient of a matrix field, applied entrywise along the grid."""
    vals = field.values if isinstance(field, MatrixField) else np.asarray(field)
    g = vals.shape[0]
    d = grid_gradient_matrix(g)
    return np.einsum("xy,yab->xab", d, vals)


def div_x(field):
    """Grid divergence (the negative adjoint of `grad_x`)."""
    vals = field.values if isinstance(field, MatrixField) else np.asarray(field)
    g = vals.shape[0]
    d = grid_divergence_matrix(g)
    return np.einsum("xy,yab->xab", d, vals)


def continuity_residual(rhos, w, v, basis, kind=MetricKind.ANTICOMM, dt=None):
    """Pointwise residual of the discretized continuity equation
    drho/dt + div_x M_rho(w) - div_L M_rho(v) = 0.

    `rhos` holds J+1 time slices of the field, `w` Hermitian spatial
    velocities and `v` skew velocity fields at the J staggered midpoints
    (shapes (J, G, n, n) and (J, G, N, n, n)); returns a (J, G, n, n) residual.
    """
    kind = MetricKind.coerce(kind)
    rhos = np.asarray(rhos, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)
    jsteps = rhos.shape[0] - 1
    dt = dt if dt is not None else 1.0 / jsteps
    g = rhos.shape[1]
    ddiv = grid_divergence_matrix(g)
    out = np.empty((jsteps,) + rhos.shape[1:], dtype=np.complex128)
    for j in range(jsteps):
        rbar = 0.5 * (rhos[j] + rhos[j + 1])
        dr = (rhos[j + 1] - rhos[j]) / dt
        flux = _mult_pointwise(rbar, w[j][:, None], kind)[:, 0]
        quantum = np.stack([
            kernels.divergence_field(basis.mats, np.ascontiguousarray(m))
            for m in _mult_pointwise(rbar, v[j], kind)])
        out[j] = dr + np.einsum("xy,yab->xab", ddiv, flux) - quantum
    return out


def _mult_pointwise(rbar, blocks, kind):
    """Apply M_rho(.) at every grid point; blocks has shape (G, C, n, n)."""
    from .lindblad import mult_anticomm, mult_kubo_mori

    out = np.empty_like(blocks)
    for x in range(rbar.shape[0]):
        if kind is MetricKind.ANTICOMM:
            out[x] = mult_anticomm(rbar[x], blocks[x])
        else:
            out[x] = mult_kubo_mori(rbar[x], blocks[x])
    return out


@dataclass(frozen=True)
class SpatialPath:
    """Transport path of matrix fields: T+1 field snapshots plus the optimal
    momentum variables of the conic solve (spatial q and Lindblad u)."""

    fields: np.ndarray        # (T+1, G, n, n)
    spatial_momenta: np.ndarray | None   # (T, G, n, n) complex, q = rho w
    lindblad_momenta: np.ndarray | None  # (T, G, N, n, n) complex

    @property
    def steps(self):
        return self.fields.shape[0] - 1


def solve_spatial_geodesic(rho0, rho1, basis, gamma=1.0, steps=16, opts=None):
    """Weighted matrix-valued optimal transport (anti-commutator geometry) on
    the grid, solved by the conic splitting backend with per-grid-point
    epigraph blocks. Returns (SpatialPath, SolveReport)."""
    rho0 = rho0 if isinstance(rho0, MatrixField) else MatrixField(rho0)
    rho1 = rho1 if isinstance(rho1, MatrixField) else MatrixField(rho1)
    rho0.require_density()
    rho1.require_density()
    if rho0.grid_size != rho1.grid_size or rho0.dim != rho1.dim:
        raise ValidationError("marginal fields must share grid size and dim")
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    g = rho0.grid_size
    solver = ConicTransport(basis, rho0.values, rho1.values, steps, gamma=gamma,
                            h=rho0.h, dgrad=grid_gradient_matrix(g), opts=opts)
    nodes, q, u, report = solver.solve()
    return SpatialPath(fields=nodes, spatial_momenta=q, lindblad_momenta=u), report


def solve_spatial_geodesic_direct(rho0, rho1, basis, gamma=1.0, steps=8,
                                  kind=MetricKind.LOG, opts=None):
    """Spatial geodesic by the direct field-path optimizer. This is the only
    route for the logarithmic field geometry (no convex form exists); it also
    serves as an independent small-scale oracle for the anti-commutator case."""
    rho0 = rho0 if isinstance(rho0, MatrixField) else MatrixField(rho0)
    rho1 = rho1 if isinstance(rho1, MatrixField) else MatrixField(rho1)
    rho0.require_density()
    rho1.require_density()
    g = rho0.grid_size
    solver = DirectTransport(basis, rho0.values, rho1.values, steps,
                             kind=kind, gamma=gamma, h=rho0.h,
                             dgrad=grid_gradient_matrix(g), opts=opts)
    nodes, report = solver.solve()
    return SpatialPath(fields=nodes, spatial_momenta=None, lindblad_momenta=None), report


def spatial_heat_superoperator(basis, g, gamma=1.0):
    """Exact generator of the spatial logarithmic flow on vec coordinates:
    (1/gamma) Delta_L + Delta_x as a (G n^2) x (G n^2) matrix."""
    n = basis.dim
    dgrad = grid_gradient_matrix(g)
    dlap = -dgrad.T @ dgrad
    supl = laplacian_superoperator(basis)
    return (np.kron(np.eye(g), supl) / gamma
            + np.kron(dlap, np.eye(n * n, dtype=np.complex128)))


def spatial_heat_exact(basis, field, t, gamma=1.0):
    """Exact solution of the spatial logarithmic flow at time t (oracle)."""
    field = field if isinstance(field, MatrixField) else MatrixField(field)
    g, n = field.grid_size, field.dim
    sup = spatial_heat_superoperator(basis, g, gamma)
    v = np.concatenate([_vec(field.values[x]) for x in range(g)])
    out = scipy.linalg.expm(t * sup) @ v
    vals = np.stack([out[x * n * n:(x + 1) * n * n].reshape(n, n, order="F")
                     for x in range(g)])
    return MatrixField(0.5 * (vals + np.conj(np.swapaxes(vals, 1, 2))))


def spatial_entropy_flow(rho0, basis, gamma=1.0, kind=MetricKind.ANTICOMM,
                         t_final=1.0, dt=1e-3, record_stride=1):
    """Entropy gradient flow of a density field.

    Anti-commutator: rho' = 1/2 div_x({rho, grad_x log rho})
                            - 1/(2 gamma) div_L({rho, grad_L log rho}).
    Logarithmic:     rho' = (1/gamma) Delta_L rho + Delta_x rho.

    RK4 with the positivity guard of the matrix-only flows; total mass is
    conserved exactly by the summation-by-parts construction.
    """
    kind = MetricKind.coerce(kind)
    field = rho0 if isinstance(rho0, MatrixField) else MatrixField(rho0)
    field.require_density()
    g = field.grid_size
    h = field.h
    dgrad = np.ascontiguousarray(grid_gradient_matrix(g).astype(np.complex128))
    mats = basis.mats
    l2 = np.ascontiguousarray(basis.l2sum())
    dlap = np.ascontiguousarray((-grid_gradient_matrix(g).T @ grid_gradient_matrix(g))
                                .astype(np.complex128))

    def step(vals, step_dt, depth=0):
        if depth > 20:
            raise PositivityError("positivity lost after 20 halvings of dt", step=depth)
        if kind is MetricKind.LOG:
            out = kernels.rk4_spatial_heat_step(mats, l2, dlap, vals, step_dt, gamma)
            ok = np.min(np.linalg.eigvalsh(out)) > _LOG_FLOOR
        else:
            out, ok = kernels.rk4_spatial_entropy_step(mats, dgrad, vals, step_dt,
                                                       gamma, _KIND_FLAG[kind],
                                                       _LOG_FLOOR)
        if not ok:
            half = step(vals, 0.5 * step_dt, depth + 1)
            return step(half, 0.5 * step_dt, depth + 1)
        return out

    vals = np.ascontiguousarray(field.values)
    nsteps = int(np.ceil(t_final / dt - 1e-12))
    times, states = [0.0], [vals.copy()]
    t = 0.0
    for k in range(nsteps):
        step_dt = min(dt, t_final - t)
        try:
            vals = step(vals, step_dt)
        except PositivityError as exc:
            raise PositivityError(
                f"positivity lost at flow step {k} (t = {t:.6g}): {exc}",
                step=k) from exc
        t += step_dt
        if (k + 1) % record_stride == 0 or k == nsteps - 1:
            times.append(t)
            states.append(vals.copy())
    states = np.stack(states)
    eigs = np.linalg.eigvalsh(states)
    safe = np.maximum(eigs, EPS_PD)
    entropies = -h * np.sum(safe * np.log(safe), axis=(1, 2))
    masses = h * np.sum(np.trace(states, axis1=2, axis2=3).real, axis=1)
    return FlowTrace(
        times=np.asarray(times),
        states=states,
        entropies=entropies,
        min_eigs=np.min(eigs, axis=(1, 2)),
        trace_drifts=np.abs(masses - 1.0),
    )
