"""Hot numeric kernels.

Every kernel here is written as an explicit-loop function over small dense
complex matrices and compiled with numba's @njit by default. Setting the
environment variable QOT_NUMBA=0 (before import) selects the pure-numpy
fallback path: the batched operations switch to vectorized numpy
implementations and the loop kernels run as plain Python. Results agree to
machine precision either way (see tests/test_kernels.py); only speed differs
(see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("QOT_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _flag not in ("0", "false", "off", "no")

if NUMBA_REQUESTED:
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(f):
        return numba.njit(cache=True, fastmath=False)(f)
else:
    def _jit(f):
        return f

DEGEN_TOL = 1e-12

KIND_ANTICOMM = 0
KIND_LOG = 1


def py_func(kernel):
    """The uncompiled Python function behind a kernel (the kernel itself when
    numba is disabled)."""
    return getattr(kernel, "py_func", kernel)


# ---------------------------------------------------------------------------
# Elementary block-field operations (loop kernels).
# ---------------------------------------------------------------------------

@_jit
def _dagger(a):
    n, m = a.shape
    out = np.empty((m, n), dtype=np.complex128)
    for i in range(n):
        for j in range(m):
            out[j, i] = np.conj(a[i, j])
    return out


@_jit
def _retrace(a):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i, i].real
    return s


@_jit
def _revdot(a, b):
    """Re tr(a† b) for same-shape complex matrices."""
    s = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            s += (np.conj(a[i, j]) * b[i, j]).real
    return s


@_jit
def commutator_field(ls, x):
    """Blocks L_k X - X L_k (skew-Hermitian when X Hermitian)."""
    nblk, n = ls.shape[0], ls.shape[1]
    out = np.empty((nblk, n, n), dtype=np.complex128)
    for k in range(nblk):
        out[k] = ls[k] @ x - x @ ls[k]
    return out


@_jit
def divergence_field(ls, y):
    """Sum_k L_k Y_k - Y_k L_k (Hermitian when the Y_k are skew)."""
    n = ls.shape[1]
    out = np.zeros((n, n), dtype=np.complex128)
    for k in range(ls.shape[0]):
        out += ls[k] @ y[k] - y[k] @ ls[k]
    return out


@_jit
def anticommutator_field(rho, v):
    """Blocks (rho V_k + V_k rho) / 2."""
    nblk, n = v.shape[0], v.shape[1]
    out = np.empty((nblk, n, n), dtype=np.complex128)
    for k in range(nblk):
        out[k] = 0.5 * (rho @ v[k] + v[k] @ rho)
    return out


@_jit
def laplacian_apply(ls, l2sum, x):
    """Delta_L X = sum_k 2 L_k X L_k - X L_k^2 - L_k^2 X, with l2sum = sum L_k^2."""
    n = x.shape[0]
    out = np.zeros((n, n), dtype=np.complex128)
    for k in range(ls.shape[0]):
        out += 2.0 * (ls[k] @ x @ ls[k])
    out -= l2sum @ x
    out -= x @ l2sum
    return out


@_jit
def logmean_kernel(p):
    """Matrix of logarithmic means Lambda(p_i, p_j), with the diagonal-limit
    value (p_i+p_j)/2 when |p_i - p_j| < DEGEN_TOL * max(p_i, p_j)."""
    n = p.shape[0]
    lam = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(n):
            a, b = p[i], p[j]
            m = a if a > b else b
            if abs(a - b) < DEGEN_TOL * m:
                lam[i, j] = 0.5 * (a + b)
            else:
                lam[i, j] = (a - b) / (np.log(a) - np.log(b))
    return lam


@_jit
def eigenbasis_scale(u, scale, v):
    """Blocks U (scale ∘ (U† V_k U)) U† for a real entrywise kernel `scale`."""
    nblk, n = v.shape[0], v.shape[1]
    ud = _dagger(u)
    sc = scale.astype(np.complex128)
    out = np.empty((nblk, n, n), dtype=np.complex128)
    for k in range(nblk):
        out[k] = u @ (sc * (ud @ v[k] @ u)) @ ud
    return out


@_jit
def psd_project(blocks):
    """Project a stack of Hermitian matrices onto the PSD cone (eigenvalue clamp)."""
    nblk, m = blocks.shape[0], blocks.shape[1]
    out = np.empty_like(blocks)
    for b in range(nblk):
        w, q = np.linalg.eigh(blocks[b])
        wc = np.maximum(w, 0.0).astype(np.complex128)
        out[b] = (q * wc) @ _dagger(q)
    return out


@_jit
def expm_herm_unit(a, total):
    """exp(A)/total for Hermitian A (spectral form, shift-stabilized when total<=0
    is requested by passing total=-1: then returns exp(A - max eig) unnormalized)."""
    w, u = np.linalg.eigh(a)
    ew = np.exp(w - w[-1]).astype(np.complex128)
    m = (u * ew) @ _dagger(u)
    if total > 0.0:
        return m * (np.exp(w[-1]) / total)
    return m * np.exp(w[-1])


# ---------------------------------------------------------------------------
# Vectorized numpy twins for the batched elementary kernels.
# ---------------------------------------------------------------------------

def commutator_field_np(ls, x):
    return ls @ x - x @ ls


def divergence_field_np(ls, y):
    return np.sum(ls @ y - y @ ls, axis=0)


def anticommutator_field_np(rho, v):
    return 0.5 * (rho @ v + v @ rho)


def laplacian_apply_np(ls, l2sum, x):
    return 2.0 * np.sum(ls @ x @ ls, axis=0) - l2sum @ x - x @ l2sum


def logmean_kernel_np(p):
    a, b = p[:, None], p[None, :]
    m = np.maximum(a, b)
    near = np.abs(a - b) < DEGEN_TOL * m
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = (a - b) / (np.log(a) - np.log(b))
    return np.where(near, 0.5 * (a + b), lam)


def eigenbasis_scale_np(u, scale, v):
    ud = u.conj().T
    return u @ (scale * (ud @ v @ u)) @ ud


def psd_project_np(blocks):
    w, q = np.linalg.eigh(blocks)
    wc = np.maximum(w, 0.0)
    return (q * wc[..., None, :]) @ np.conj(np.swapaxes(q, -1, -2))


if not NUMBA_ENABLED:
    commutator_field = commutator_field_np
    divergence_field = divergence_field_np
    anticommutator_field = anticommutator_field_np
    laplacian_apply = laplacian_apply_np
    logmean_kernel = logmean_kernel_np
    eigenbasis_scale = eigenbasis_scale_np
    psd_project = psd_project_np


# ---------------------------------------------------------------------------
# Flow right-hand sides and RK4 steps.
# ---------------------------------------------------------------------------

@_jit
def _mult_field(rho, p, u, v, kind):
    """Apply the non-commutative multiplication M_rho to a block field, reusing
    an eigendecomposition (p, u) of rho for the logarithmic kind."""
    if kind == KIND_ANTICOMM:
        return anticommutator_field(rho, v)
    return eigenbasis_scale(u, logmean_kernel(p), v)


@_jit
def entropy_flow_rhs(ls, rho, kind, floor):
    """-div_L M_rho(grad_L log rho); returns (rhs, ok) with ok=False when the
    state is within `floor` of singularity."""
    n = rho.shape[0]
    p, u = np.linalg.eigh(rho)
    if p[0] < floor:
        return np.zeros((n, n), dtype=np.complex128), False
    logrho = (u * np.log(p).astype(np.complex128)) @ _dagger(u)
    g = commutator_field(ls, logrho)
    m = _mult_field(rho, p, u, g, kind)
    return -divergence_field(ls, m), True


@_jit
def rk4_entropy_step(ls, rho, dt, kind, floor):
    k1, ok = entropy_flow_rhs(ls, rho, kind, floor)
    if not ok:
        return rho, False
    k2, ok = entropy_flow_rhs(ls, rho + 0.5 * dt * k1, kind, floor)
    if not ok:
        return rho, False
    k3, ok = entropy_flow_rhs(ls, rho + 0.5 * dt * k2, kind, floor)
    if not ok:
        return rho, False
    k4, ok = entropy_flow_rhs(ls, rho + dt * k3, kind, floor)
    if not ok:
        return rho, False
    out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = 0.5 * (out + _dagger(out))
    w = np.linalg.eigvalsh(out)
    return out, w[0] > floor


@_jit
def rk4_heat_step(ls, l2sum, rho, dt):
    """One RK4 step of the linear heat flow rho' = Delta_L rho."""
    k1 = laplacian_apply(ls, l2sum, rho)
    k2 = laplacian_apply(ls, l2sum, rho + 0.5 * dt * k1)
    k3 = laplacian_apply(ls, l2sum, rho + 0.5 * dt * k2)
    k4 = laplacian_apply(ls, l2sum, rho + dt * k3)
    out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (out + _dagger(out))


@_jit
def _lindblad_rhs(ls, l2sum, ham, rho):
    return -1j * (ham @ rho - rho @ ham) + 0.5 * laplacian_apply(ls, l2sum, rho)


@_jit
def rk4_lindblad_step(ls, l2sum, ham, rho, dt):
    k1 = _lindblad_rhs(ls, l2sum, ham, rho)
    k2 = _lindblad_rhs(ls, l2sum, ham, rho + 0.5 * dt * k1)
    k3 = _lindblad_rhs(ls, l2sum, ham, rho + 0.5 * dt * k2)
    k4 = _lindblad_rhs(ls, l2sum, ham, rho + dt * k3)
    out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (out + _dagger(out))


# ---------------------------------------------------------------------------
# Spatial (grid) flows. Fields have shape (G, n, n); grid operators are dense
# (G, G) matrices passed in as complex arrays.
# ---------------------------------------------------------------------------

@_jit
def grid_apply(op, field):
    """Apply a (G, G) grid operator along the grid axis of a (G, n, n) field."""
    g, n = field.shape[0], field.shape[1]
    flat = field.copy().reshape(g, n * n)
    return (op @ flat).reshape(g, n, n)


@_jit
def spatial_entropy_rhs(ls, dgrad, field, gamma, kind, floor):
    """RHS of the spatial entropy gradient flow; dgrad is the grid gradient.

    rho' = div_x M_rho(grad_x log rho) - (1/gamma) * div_L M_rho(grad_L log rho),
    with div_x = -dgrad^T (summation by parts).
    """
    g, n = field.shape[0], field.shape[1]
    rhs = np.empty_like(field)
    logf = np.empty_like(field)
    ps = np.empty((g, n), dtype=np.float64)
    us = np.empty((g, n, n), dtype=np.complex128)
    for x in range(g):
        p, u = np.linalg.eigh(field[x])
        if p[0] < floor:
            return rhs, False
        ps[x] = p
        us[x] = u
        logf[x] = (u * np.log(p).astype(np.complex128)) @ _dagger(u)
    # quantum channel, pointwise
    for x in range(g):
        gq = commutator_field(ls, logf[x])
        mq = _mult_field(field[x], ps[x], us[x], gq, kind)
        rhs[x] = -(1.0 / gamma) * divergence_field(ls, mq)
    # spatial channel: flux = M_rho(grad_x log rho), term = -dgrad^T flux
    gx = grid_apply(dgrad, logf)
    flux = np.empty_like(field)
    for x in range(g):
        one = gx[x:x + 1]
        flux[x] = _mult_field(field[x], ps[x], us[x], one, kind)[0]
    rhs -= grid_apply(_dagger(dgrad), flux)
    return rhs, True


@_jit
def rk4_spatial_entropy_step(ls, dgrad, field, dt, gamma, kind, floor):
    k1, ok = spatial_entropy_rhs(ls, dgrad, field, gamma, kind, floor)
    if not ok:
        return field, False
    k2, ok = spatial_entropy_rhs(ls, dgrad, field + 0.5 * dt * k1, gamma, kind, floor)
    if not ok:
        return field, False
    k3, ok = spatial_entropy_rhs(ls, dgrad, field + 0.5 * dt * k2, gamma, kind, floor)
    if not ok:
        return field, False
    k4, ok = spatial_entropy_rhs(ls, dgrad, field + dt * k3, gamma, kind, floor)
    if not ok:
        return field, False
    out = field + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    for x in range(field.shape[0]):
        out[x] = 0.5 * (out[x] + _dagger(out[x]))
        w = np.linalg.eigvalsh(out[x])
        if w[0] <= floor:
            return field, False
    return out, True


@_jit
def spatial_heat_rhs(ls, l2sum, dlap, field, gamma):
    """(1/gamma) Delta_L rho + Delta_x rho with dlap the grid Laplacian."""
    g = field.shape[0]
    rhs = grid_apply(dlap, field)
    for x in range(g):
        rhs[x] += (1.0 / gamma) * laplacian_apply(ls, l2sum, field[x])
    return rhs


@_jit
def rk4_spatial_heat_step(ls, l2sum, dlap, field, dt, gamma):
    k1 = spatial_heat_rhs(ls, l2sum, dlap, field, gamma)
    k2 = spatial_heat_rhs(ls, l2sum, dlap, field + 0.5 * dt * k1, gamma)
    k3 = spatial_heat_rhs(ls, l2sum, dlap, field + 0.5 * dt * k2, gamma)
    k4 = spatial_heat_rhs(ls, l2sum, dlap, field + dt * k3, gamma)
    out = field + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    for x in range(field.shape[0]):
        out[x] = 0.5 * (out[x] + _dagger(out[x]))
    return out


# ---------------------------------------------------------------------------
# Discrete geodesic energy (direct backend), unified over matrix-only (G=1)
# and spatial fields. Interior nodes are parametrized by real coordinates in
# the full orthonormal Hermitian basis per grid point; the node density is
# exp(A_x) / (h * sum_y tr exp(A_y)).
# ---------------------------------------------------------------------------

@_jit
def nodes_from_coords(avec, hbasis, g, n, h):
    """Map one node's coordinates (g*n^2,) to a normalized PD field (g, n, n).

    Shift-stabilized: the normalization by h * sum_y tr exp(A_y) cancels a
    global spectral shift, so only exponential differences are ever formed.
    """
    n2 = n * n
    field = np.empty((g, n, n), dtype=np.complex128)
    shifts = np.empty(g, dtype=np.float64)
    for x in range(g):
        a = np.zeros((n, n), dtype=np.complex128)
        for c in range(n2):
            a += avec[x * n2 + c] * hbasis[c]
        w, u = np.linalg.eigh(a)
        shifts[x] = w[-1]
        ew = np.exp(w - w[-1]).astype(np.complex128)
        field[x] = (u * ew) @ _dagger(u)
    smax = np.max(shifts)
    total = 0.0
    for x in range(g):
        field[x] *= np.exp(shifts[x] - smax)
        total += _retrace(field[x])
    field *= 1.0 / (h * total)
    return field


@_jit
def _step_metric_matrix(rhobar, gtb, dgtb, gamma, kind, has_spatial):
    """Metric operator matrix K[a,b] on the tangent-basis coordinates at the
    midpoint field rhobar. gtb: (D,G,N,n,n) Lindblad gradients of the basis;
    dgtb: (D,G,n,n) grid gradients (ignored unless has_spatial)."""
    d, g, nl, n = gtb.shape[0], gtb.shape[1], gtb.shape[2], gtb.shape[3]
    ps = np.empty((g, n), dtype=np.float64)
    us = np.empty((g, n, n), dtype=np.complex128)
    if kind == KIND_LOG:
        for x in range(g):
            p, u = np.linalg.eigh(rhobar[x])
            ps[x] = p
            us[x] = u
    mg = np.empty((d, g, nl, n, n), dtype=np.complex128)
    for b in range(d):
        for x in range(g):
            mg[b, x] = _mult_field(rhobar[x], ps[x], us[x], gtb[b, x], kind)
    if has_spatial:
        mdg = np.empty((d, g, n, n), dtype=np.complex128)
        for b in range(d):
            for x in range(g):
                one = dgtb[b, x:x + 1]
                mdg[b, x] = _mult_field(rhobar[x], ps[x], us[x], one, kind)[0]
    kmat = np.empty((d, d), dtype=np.float64)
    for a in range(d):
        for b in range(a, d):
            s = 0.0
            for x in range(g):
                for k in range(nl):
                    s += _revdot(gtb[a, x, k], mg[b, x, k])
            s /= gamma
            if has_spatial:
                for x in range(g):
                    s += _revdot(dgtb[a, x], mdg[b, x])
            kmat[a, b] = s
            kmat[b, a] = s
    return kmat


@_jit
def _tangent_coords(tb, delta):
    d = tb.shape[0]
    out = np.empty(d, dtype=np.float64)
    for a in range(d):
        s = 0.0
        for x in range(delta.shape[0]):
            s += _revdot(tb[a, x], delta[x])
        out[a] = s
    return out


@_jit
def _step_energy(rho_a, rho_b, tb, gtb, dgtb, h, gamma, kind, has_spatial,
                 robust, penalty):
    """Squared Riemannian step length <delta, delta>_rhobar for delta = rho_b - rho_a."""
    rhobar = 0.5 * (rho_a + rho_b)
    kmat = _step_metric_matrix(rhobar, gtb, dgtb, gamma, kind, has_spatial)
    dc = _tangent_coords(tb, rho_b - rho_a)
    if robust:
        w, q = np.linalg.eigh(kmat)
        cut = 1e-12 * w[-1]
        e = 0.0
        for i in range(w.shape[0]):
            comp = 0.0
            for a in range(w.shape[0]):
                comp += q[a, i] * dc[a]
            if w[i] > cut:
                e += comp * comp / w[i]
            else:
                e += comp * comp * penalty
        return h * e
    y = np.linalg.solve(kmat, dc)
    return h * np.dot(dc, y)


@_jit
def path_energy(acoords, rho0, rho1, hbasis, tb, gtb, dgtb, h, gamma, kind,
                has_spatial, robust, penalty):
    """Discrete geodesic energy E = T * sum_j e_j and the per-step energies."""
    tsteps = acoords.shape[0] + 1
    g, n = rho0.shape[0], rho0.shape[1]
    nodes = np.empty((tsteps + 1, g, n, n), dtype=np.complex128)
    nodes[0] = rho0
    nodes[tsteps] = rho1
    for i in range(1, tsteps):
        nodes[i] = nodes_from_coords(acoords[i - 1], hbasis, g, n, h)
    esteps = np.empty(tsteps, dtype=np.float64)
    for j in range(tsteps):
        esteps[j] = _step_energy(nodes[j], nodes[j + 1], tb, gtb, dgtb, h,
                                 gamma, kind, has_spatial, robust, penalty)
    return tsteps * np.sum(esteps), esteps


@_jit
def path_energy_grad(acoords, rho0, rho1, hbasis, tb, gtb, dgtb, h, gamma,
                     kind, has_spatial, robust, penalty, fd_step):
    """Energy and its central finite-difference gradient.

    Perturbing node i only changes steps i-1 and i, so each coordinate costs
    two node rebuilds and four step energies instead of a full path sweep.
    """
    tsteps = acoords.shape[0] + 1
    g, n = rho0.shape[0], rho0.shape[1]
    ncoord = acoords.shape[1]
    nodes = np.empty((tsteps + 1, g, n, n), dtype=np.complex128)
    nodes[0] = rho0
    nodes[tsteps] = rho1
    for i in range(1, tsteps):
        nodes[i] = nodes_from_coords(acoords[i - 1], hbasis, g, n, h)
    esteps = np.empty(tsteps, dtype=np.float64)
    for j in range(tsteps):
        esteps[j] = _step_energy(nodes[j], nodes[j + 1], tb, gtb, dgtb, h,
                                 gamma, kind, has_spatial, robust, penalty)
    energy = tsteps * np.sum(esteps)
    grad = np.empty((tsteps - 1, ncoord), dtype=np.float64)
    avec = np.empty(ncoord, dtype=np.float64)
    for i in range(1, tsteps):
        for c in range(ncoord):
            avec[:] = acoords[i - 1]
            avec[c] += fd_step
            node_p = nodes_from_coords(avec, hbasis, g, n, h)
            ep = (_step_energy(nodes[i - 1], node_p, tb, gtb, dgtb, h, gamma,
                               kind, has_spatial, robust, penalty)
                  + _step_energy(node_p, nodes[i + 1], tb, gtb, dgtb, h, gamma,
                                 kind, has_spatial, robust, penalty))
            avec[c] -= 2.0 * fd_step
            node_m = nodes_from_coords(avec, hbasis, g, n, h)
            em = (_step_energy(nodes[i - 1], node_m, tb, gtb, dgtb, h, gamma,
                               kind, has_spatial, robust, penalty)
                  + _step_energy(node_m, nodes[i + 1], tb, gtb, dgtb, h, gamma,
                                 kind, has_spatial, robust, penalty))
            grad[i - 1, c] = tsteps * (ep - em) / (2.0 * fd_step)
    return energy, grad.reshape((tsteps - 1) * ncoord)
