"""Shared machinery for the transport solvers.

Both the matrix-only and the spatial geodesic problems are instances of one
discrete template: densities on T+1 time nodes (each node a field of G
Hermitian matrices, G=1 for the matrix-only case), momenta on T staggered
midpoints, kinetic cost weighted by the arithmetic midpoint density.

Two backends:

* `ConicTransport` -- the convex momentum formulation solved by operator
  splitting (ADMM): alternate (a) projection onto the affine set (continuity
  + boundary + trace, via a pre-factorized KKT Schur complement) and (b)
  projection onto the product of PSD epigraph cones, with over-relaxation.
* `DirectTransport` -- minimization of the discrete geodesic energy over
  interior nodes parametrized as normalized matrix exponentials
  (positivity-free coordinates), quasi-Newton with central finite-difference
  gradients evaluated by the hot kernels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import kernels
from .errors import ConvergenceError, SingularSystemError, ValidationError
from .linalg import hermitian_basis, herm_log, herm_to_coords, traceless_hermitian_basis
from .metric import MetricKind

_KIND_FLAG = {MetricKind.ANTICOMM: kernels.KIND_ANTICOMM, MetricKind.LOG: kernels.KIND_LOG}


@dataclass
class SolverOptions:
    """Knobs shared by both backends; defaults follow the design targets
    (residuals < 1e-6 or 50k iterations for the splitting scheme)."""

    max_iter: int = 50_000
    tol: float = 1e-6
    over_relaxation: float = 1.6
    sigma: float = 1.0
    adaptive_penalty: bool = True
    gtol: float = 1e-8
    max_iter_direct: int = 4000
    fd_step: float = 1e-5
    null_penalty: float = 1e12
    raise_on_failure: bool = False


@dataclass
class SolveReport:
    """Outcome of a transport solve; distance = sqrt(action) by construction."""

    distance: float
    action: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    wall_time: float
    backend: str
    kind: str
    steps: int
    per_step_energy: list = dataclass_field(default_factory=list)
    epigraph_gap: float = float("nan")
    optimality: dict | None = None

    def as_dict(self):
        # wall_time is intentionally omitted: serialized reports must be
        # bit-reproducible for identical seeds and configs
        out = {
            "distance": self.distance,
            "action": self.action,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "converged": self.converged,
            "backend": self.backend,
            "kind": self.kind,
            "steps": self.steps,
            "per_step_energy": list(self.per_step_energy),
        }
        if np.isfinite(self.epigraph_gap):
            out["epigraph_gap"] = self.epigraph_gap
        if self.optimality is not None:
            out["optimality"] = self.optimality
        return out


def _herm(x):
    return 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))


def _skew(x):
    return 0.5 * (x - np.conj(np.swapaxes(x, -1, -2)))


class ConicTransport:
    """Operator-splitting solver for the convex transport problem.

    Fields `rho0`, `rho1` have shape (G, n, n); `dgrad` is the (G, G) grid
    gradient for the spatial channel (None for the matrix-only case). The
    kinetic weight of the Lindblad channel is `gamma`; grid quadrature weight
    is `h`.
    """

    def __init__(self, basis, rho0, rho1, steps, gamma=1.0, h=1.0, dgrad=None,
                 opts=None):
        if steps < 2:
            raise ValidationError(f"need at least 2 time steps, got {steps}")
        self.basis = basis
        self.opts = opts or SolverOptions()
        self.rho0 = np.asarray(rho0, dtype=np.complex128)
        self.rho1 = np.asarray(rho1, dtype=np.complex128)
        if self.rho0.shape != self.rho1.shape or self.rho0.ndim != 3:
            raise ValidationError("marginal fields must share shape (G, n, n)")
        self.G, self.n = self.rho0.shape[0], self.rho0.shape[1]
        if self.n != basis.dim:
            raise ValidationError("marginal dim does not match basis dim")
        self.N = basis.size
        self.T = steps
        self.dt = 1.0 / steps
        self.gamma = float(gamma)
        self.h = float(h)
        self.spatial = dgrad is not None and self.G > 1
        self.dgrad = np.asarray(dgrad, dtype=np.float64) if self.spatial else None
        self.nb = self.N + (1 if self.spatial else 0)
        self.hb = hermitian_basis(self.n)
        self._setup_schur()

    # -- affine-projection factorization ------------------------------------

    def _setup_schur(self):
        T, G, n, N = self.T, self.G, self.n, self.N
        n2 = n * n
        tri = (np.diag(2.0 * np.ones(T - 1)) + np.diag(np.ones(T - 2), 1)
               + np.diag(np.ones(T - 2), -1))
        self.minv = np.linalg.inv(tri)
        emat = np.zeros((T, T - 1))
        for j in range(T):
            if j <= T - 2:
                emat[j, j] = 1.0
            if j >= 1:
                emat[j, j - 1] = -1.0
        w1 = emat @ self.minv @ emat.T
        kd = np.zeros((n2, n2))
        for l in self.basis.mats:
            gl = np.stack([l @ b - b @ l for b in self.hb])
            kd += np.real(np.einsum("aij,bij->ab", gl.conj(), gl))
        base = (4.0 / self.nb) * np.kron(w1, np.eye(G * n2))
        base += 0.5 * self.dt ** 2 * np.kron(np.eye(T * G), kd)
        if self.spatial:
            dtd = self.dgrad.T @ self.dgrad
            base += 0.5 * self.dt ** 2 * np.kron(np.eye(T), np.kron(dtd, np.eye(n2)))
        sw, sv = np.linalg.eigh(0.5 * (base + base.T))
        rel = sw / sw[-1]
        n_null = int(np.sum(rel < 1e-12))
        if n_null != 1:
            raise SingularSystemError(
                f"affine KKT system has a {n_null}-dimensional null space "
                "(expected 1: the global trace); the basis or grid is degenerate")
        self.schur_w = sw
        self.schur_v = sv
        self.schur_cut = 1e-12 * sw[-1]

    def _schur_pinv(self, rhs_coords, sigma):
        z = self.schur_v.T @ rhs_coords
        z = np.where(self.schur_w > self.schur_cut, z / self.schur_w, 0.0)
        return sigma * (self.schur_v @ z)

    # -- linear maps ---------------------------------------------------------

    def _apply_a(self, r, q, u):
        """Continuity rows A(x), shape (T, G, n, n)."""
        T, G, n = self.T, self.G, self.n
        rpad = np.zeros((T + 1, G, n, n), dtype=np.complex128)
        rpad[1:T] = r
        out = rpad[1:] - rpad[:-1]
        out -= self.dt * np.sum(self.basis.mats @ _skew(u) - _skew(u) @ self.basis.mats,
                                axis=2)
        if self.spatial:
            # continuity carries div_x = -Dgrad^T acting on the Hermitian flux
            out -= self.dt * np.einsum("yx,tyab->txab", self.dgrad, _herm(q))
        return out

    def _apply_at(self, y):
        """Adjoint of `_apply_a`: returns (r', q', u')."""
        rt = y[:-1] - y[1:]
        ut = -self.dt * (self.basis.mats @ y[:, :, None] - y[:, :, None] @ self.basis.mats)
        qt = None
        if self.spatial:
            qt = -self.dt * np.einsum("xy,tyab->txab", self.dgrad, y)
        return rt, qt, ut

    def _apply_hinv(self, rt, qt, ut, sigma):
        r = (4.0 / (sigma * self.nb)) * np.tensordot(self.minv, rt, axes=[1, 0])
        q = qt / (2.0 * sigma) if qt is not None else None
        u = ut / (2.0 * sigma)
        return r, q, u

    def _coords(self, y):
        return herm_to_coords(self.hb, y).ravel()

    def _uncoords(self, c):
        c = c.reshape(self.T, self.G, self.n * self.n)
        return np.tensordot(c, self.hb, axes=[2, 0])

    # -- block packing --------------------------------------------------------

    def _pack(self, rbar, q, u, sq, su):
        T, G, n, N = self.T, self.G, self.n, self.N
        c = self.nb
        blocks = np.zeros((T, G, c, 2 * n, 2 * n), dtype=np.complex128)
        blocks[:, :, :, :n, :n] = rbar[:, :, None]
        blocks[:, :, :N, :n, n:] = u
        blocks[:, :, :N, n:, :n] = np.conj(np.swapaxes(u, -1, -2))
        blocks[:, :, :N, n:, n:] = su
        if self.spatial:
            blocks[:, :, N, :n, n:] = q
            blocks[:, :, N, n:, :n] = np.conj(np.swapaxes(q, -1, -2))
            blocks[:, :, N, n:, n:] = sq
        return blocks

    def _unpack(self, blocks):
        n, N = self.n, self.N
        rparts = _herm(blocks[:, :, :, :n, :n])
        u = blocks[:, :, :N, :n, n:]
        su = _herm(blocks[:, :, :N, n:, n:])
        q = blocks[:, :, N, :n, n:] if self.spatial else None
        sq = _herm(blocks[:, :, N, n:, n:]) if self.spatial else None
        return rparts, q, u, sq, su

    def _bt(self, blocks):
        """Adjoint of the x -> blocks map, as a flat vector (for dual residuals)."""
        rparts, q, u, sq, su = self._unpack(blocks)
        ybar = np.sum(rparts, axis=2)
        # interior node i sits in steps i-1 and i
        rt = 0.5 * (ybar[:-1] + ybar[1:])
        parts = [rt.ravel(), (2.0 * u).ravel(), su.ravel()]
        if self.spatial:
            parts += [(2.0 * q).ravel(), sq.ravel()]
        return np.concatenate([np.concatenate([p.real, p.imag]) for p in parts])

    # -- main loop -------------------------------------------------------------

    def solve(self):
        opts = self.opts
        T, G, n, N = self.T, self.G, self.n, self.N
        t0 = time.perf_counter()
        # penalty on the natural scale of the cost coefficients h*dt
        sigma = float(opts.sigma) * self.h * self.dt
        alpha = float(opts.over_relaxation)

        tgrid = np.linspace(0.0, 1.0, T + 1)
        nodes = ((1.0 - tgrid)[:, None, None, None] * self.rho0[None]
                 + tgrid[:, None, None, None] * self.rho1[None])
        r = nodes[1:T].copy()
        u = np.zeros((T, G, N, n, n), dtype=np.complex128)
        q = np.zeros((T, G, n, n), dtype=np.complex128) if self.spatial else None
        su = np.zeros((T, G, N, n, n), dtype=np.complex128)
        sq = np.zeros((T, G, n, n), dtype=np.complex128) if self.spatial else None

        bmat = np.zeros((T, G, n, n), dtype=np.complex128)
        bmat[0] = self.rho0
        bmat[T - 1] = -self.rho1

        rbar = 0.5 * (np.concatenate([self.rho0[None], r]) +
                      np.concatenate([r, self.rho1[None]]))
        z = self._pack(rbar, q, u, sq, su)
        w = np.zeros_like(z)

        nblocks = T * G * self.nb
        m2 = 2 * n
        pri = dual = np.inf
        it = 0
        converged = False
        cost_u = self.h * self.dt * self.gamma
        cost_q = self.h * self.dt

        for it in range(1, opts.max_iter + 1):
            zeta = z - w
            zr, zq, zu, zsq, zsu = self._unpack(zeta)
            zbar = np.mean(zr, axis=2)
            su = zsu - (cost_u / sigma) * np.eye(n)
            if self.spatial:
                sq = zsq - (cost_q / sigma) * np.eye(n)

            g_r = 0.5 * sigma * self.nb * (zbar[:T - 1] + zbar[1:T])
            g_r[0] -= 0.25 * sigma * self.nb * self.rho0
            g_r[-1] -= 0.25 * sigma * self.nb * self.rho1
            r_unc = (4.0 / (sigma * self.nb)) * np.tensordot(self.minv, g_r, axes=[1, 0])
            u_unc = zu
            q_unc = zq if self.spatial else None
            rhs = bmat - self._apply_a(r_unc, q_unc, u_unc)
            nu = self._uncoords(self._schur_pinv(self._coords(rhs), sigma))
            rt, qt, ut = self._apply_at(nu)
            dr, dq, du = self._apply_hinv(rt, qt, ut, sigma)
            r = r_unc + dr
            u = u_unc + du
            if self.spatial:
                q = q_unc + dq

            rbar = 0.5 * (np.concatenate([self.rho0[None], r]) +
                          np.concatenate([r, self.rho1[None]]))
            p = self._pack(rbar, q, u, sq, su)
            p_relaxed = alpha * p + (1.0 - alpha) * z
            z_old = z
            stacked = np.ascontiguousarray((p_relaxed + w).reshape(nblocks, m2, m2))
            z = kernels.psd_project(stacked).reshape(p.shape)
            w = w + p_relaxed - z

            pri = float(np.linalg.norm(p - z))
            dual = float(sigma * np.linalg.norm(self._bt(z - z_old)))
            scale = max(1.0, float(np.linalg.norm(p)), float(np.linalg.norm(z)))
            if pri <= opts.tol * scale and dual <= opts.tol * scale:
                converged = True
                break
            if opts.adaptive_penalty and it % 25 == 0:
                if pri > 10.0 * dual:
                    sigma *= 2.0
                    w *= 0.5
                elif dual > 10.0 * pri:
                    sigma *= 0.5
                    w *= 2.0

        action = float(np.sum(np.trace(su, axis1=-2, axis2=-1).real) * cost_u)
        if self.spatial:
            action += float(np.sum(np.trace(sq, axis1=-2, axis2=-1).real) * cost_q)
        gap = self._epigraph_gap(rbar, q, u, sq, su)
        report = SolveReport(
            distance=float(np.sqrt(max(action, 0.0))),
            action=action,
            iterations=it,
            primal_residual=pri,
            dual_residual=dual,
            converged=converged,
            wall_time=time.perf_counter() - t0,
            backend="conic",
            kind=MetricKind.ANTICOMM.value,
            steps=T,
            epigraph_gap=gap,
        )
        if not converged and opts.raise_on_failure:
            raise ConvergenceError(
                f"splitting solver stopped at residuals ({pri:.2e}, {dual:.2e}) "
                f"after {it} iterations")
        nodes = np.concatenate([self.rho0[None], _herm(r), self.rho1[None]])
        return nodes, q, u, report

    def _epigraph_gap(self, rbar, q, u, sq, su):
        """max over blocks of tr(S) - tr(u* rbar^+ u) (Schur tightness at optimum)."""
        try:
            gap = 0.0
            for j in range(self.T):
                for x in range(self.G):
                    rb = rbar[j, x]
                    wv, uv = np.linalg.eigh(rb)
                    if wv[0] <= 1e-12:
                        return float("nan")
                    rinv = (uv / wv) @ uv.conj().T
                    for k in range(self.N):
                        kin = np.real(np.trace(u[j, x, k].conj().T @ rinv @ u[j, x, k]))
                        gap = max(gap, abs(np.trace(su[j, x, k]).real - kin))
                    if self.spatial:
                        kin = np.real(np.trace(q[j, x].conj().T @ rinv @ q[j, x]))
                        gap = max(gap, abs(np.trace(sq[j, x]).real - kin))
            return float(gap)
        except np.linalg.LinAlgError:  # pragma: no cover
            return float("nan")


class DirectTransport:
    """Discrete geodesic-energy minimizer over positivity-free node coordinates."""

    def __init__(self, basis, rho0, rho1, steps, kind=MetricKind.ANTICOMM,
                 gamma=1.0, h=1.0, dgrad=None, opts=None):
        if steps < 2:
            raise ValidationError(f"need at least 2 time steps, got {steps}")
        self.basis = basis
        self.kind = MetricKind.coerce(kind)
        self.opts = opts or SolverOptions()
        self.rho0 = np.ascontiguousarray(rho0, dtype=np.complex128)
        self.rho1 = np.ascontiguousarray(rho1, dtype=np.complex128)
        if self.rho0.shape != self.rho1.shape or self.rho0.ndim != 3:
            raise ValidationError("marginal fields must share shape (G, n, n)")
        self.G, self.n = self.rho0.shape[0], self.rho0.shape[1]
        self.N = basis.size
        self.T = steps
        self.gamma = float(gamma)
        self.h = float(h)
        self.spatial = dgrad is not None and self.G > 1
        self.dgrad = np.asarray(dgrad, dtype=np.float64) if self.spatial else None
        self.hb = np.ascontiguousarray(hermitian_basis(self.n))
        self.tb = self._tangent_basis()
        self.gtb = np.ascontiguousarray(np.stack([
            np.stack([basis.mats @ b[x] - b[x] @ basis.mats for x in range(self.G)])
            for b in self.tb]))
        if self.spatial:
            self.dgtb = np.ascontiguousarray(
                np.einsum("xy,dyab->dxab", self.dgrad, self.tb))
        else:
            self.dgtb = np.zeros_like(self.tb)

    def _tangent_basis(self):
        """Orthonormal basis of zero-total-mass Hermitian fields, (D, G, n, n)."""
        g, n = self.G, self.n
        tl = traceless_hermitian_basis(n)
        elems = []
        for x in range(g):
            for b in tl:
                e = np.zeros((g, n, n), dtype=np.complex128)
                e[x] = b
                elems.append(e)
        if g > 1:
            combos = scipy.linalg.null_space(np.ones((1, g)))  # (g, g-1), orthonormal
            eye = np.eye(n, dtype=np.complex128) / np.sqrt(n)
            for c in combos.T:
                elems.append(c[:, None, None] * eye[None])
        return np.ascontiguousarray(np.stack(elems))

    def _init_coords(self):
        tgrid = np.linspace(0.0, 1.0, self.T + 1)[1:-1]
        coords = np.empty((self.T - 1, self.G * self.n * self.n))
        for i, t in enumerate(tgrid):
            lin = (1.0 - t) * self.rho0 + t * self.rho1
            logs = np.stack([herm_log(lin[x]) for x in range(self.G)])
            coords[i] = herm_to_coords(self.hb, logs).ravel()
        return coords

    def _kernel_args(self):
        robust = 0 if self.basis.is_connected else 1
        return (self.rho0, self.rho1, self.hb, self.tb, self.gtb, self.dgtb,
                self.h, self.gamma, _KIND_FLAG[self.kind],
                1 if self.spatial else 0, robust, self.opts.null_penalty)

    def solve(self):
        t0 = time.perf_counter()
        opts = self.opts
        args = self._kernel_args()
        shape = (self.T - 1, self.G * self.n * self.n)

        def fun(x):
            e, _ = kernels.path_energy(np.ascontiguousarray(x.reshape(shape)), *args)
            return e

        def jac(x):
            _, g = kernels.path_energy_grad(
                np.ascontiguousarray(x.reshape(shape)), *args, opts.fd_step)
            return g

        x0 = self._init_coords().ravel()
        res = scipy.optimize.minimize(
            fun, x0, jac=jac, method="L-BFGS-B",
            options=dict(maxiter=opts.max_iter_direct, maxfun=10 * opts.max_iter_direct,
                         ftol=1e-16, gtol=opts.gtol, maxcor=30, maxls=60),
        )
        energy, esteps = kernels.path_energy(
            np.ascontiguousarray(res.x.reshape(shape)), *args)
        gradnorm = float(np.max(np.abs(jac(res.x)))) if res.x.size else 0.0
        converged = bool(res.success or gradnorm <= 10.0 * opts.gtol)
        if not converged and opts.raise_on_failure:
            raise ConvergenceError(f"direct solver failed: {res.message}")

        g, n = self.G, self.n
        nodes = np.empty((self.T + 1, g, n, n), dtype=np.complex128)
        nodes[0] = self.rho0
        nodes[-1] = self.rho1
        acoords = res.x.reshape(shape)
        for i in range(1, self.T):
            nodes[i] = kernels.nodes_from_coords(
                np.ascontiguousarray(acoords[i - 1]), self.hb, g, n, self.h)
        report = SolveReport(
            distance=float(np.sqrt(max(energy, 0.0))),
            action=float(energy),
            iterations=int(res.nit),
            primal_residual=0.0,
            dual_residual=gradnorm,
            converged=converged,
            wall_time=time.perf_counter() - t0,
            backend="direct",
            kind=self.kind.value,
            steps=self.T,
            per_step_energy=[float(e) for e in esteps],
        )
        return nodes, report
