"""Seeded property suites behind the `qot check` command.

Each suite re-verifies one family of invariants at desk scale and returns a
machine-readable record; `run_checks` executes all of them (or a named
subset) deterministically for a given seed.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from . import flows as entropy_mod
from . import geodesic, lindblad, metric, spatial
from .io import matrix_to_record, record_to_matrix
from .linalg import (herm_log, hs_inner, random_density, random_hermitian,
                     random_skew_field, random_tangent)


def _bases(n):
    out = []
    if n == 2:
        out.append(("pauli", lindblad.pauli_basis()))
    out.append((f"gellmann:{n}", lindblad.gell_mann_basis(n)))
    return out


def check_adjointness(seed, trials=100):
    """<grad X, Y> = <X, div Y> over random pairs, all bases, n in 2..4."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4):
        for _, basis in _bases(n):
            for _ in range(trials // 2):
                x = random_hermitian(rng, n)
                y = random_skew_field(rng, basis.size, n)
                lhs = hs_inner(lindblad.grad_L(basis, x), y)
                rhs = hs_inner(x, lindblad.div_L(basis, y))
                worst = max(worst, abs(lhs - rhs))
    return {"name": "adjointness", "passed": worst <= 1e-12, "worst": worst,
            "tolerance": 1e-12}


def check_product_rule(seed, trials=100):
    """grad(XY+YX) = (grad X)Y + X(grad Y) + (grad Y)X + Y(grad X)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4):
        for _, basis in _bases(n):
            for _ in range(trials // 2):
                x = random_hermitian(rng, n)
                y = random_hermitian(rng, n)
                lhs = lindblad.grad_L(basis, x @ y + y @ x)
                gx = lindblad.grad_L(basis, x)
                gy = lindblad.grad_L(basis, y)
                rhs = gx @ y + x @ gy + gy @ x + y @ gx
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return {"name": "product-rule", "passed": worst <= 1e-12, "worst": worst,
            "tolerance": 1e-12}


def check_identity28(seed, trials=100):
    """M_rho(grad log rho) = grad rho (the logarithmic-mean identity)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 5))
        basis = lindblad.gell_mann_basis(n)
        rho = random_density(rng, n)
        lhs = lindblad.mult_kubo_mori(rho, lindblad.grad_L(basis, herm_log(rho)))
        rhs = lindblad.grad_L(basis, rho)
        denom = max(np.linalg.norm(rhs), 1e-30)
        worst = max(worst, float(np.linalg.norm(lhs - rhs) / denom))
    return {"name": "identity28", "passed": worst <= 1e-10, "worst": worst,
            "tolerance": 1e-10}


def check_quadrature(seed, trials=5):
    """Closed-form Kubo-Mori kernel vs 1e4-node midpoint quadrature."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        rho = random_density(rng, n, min_eig=0.05)
        v = random_skew_field(rng, 1, n)
        exact = lindblad.mult_kubo_mori(rho, v)[0]
        quad = lindblad.kubo_mori_quadrature(rho, v[0], nodes=10_000)
        worst = max(worst, float(np.linalg.norm(exact - quad) / np.linalg.norm(exact)))
    return {"name": "quadrature", "passed": worst <= 1e-8, "worst": worst,
            "tolerance": 1e-8}


def check_laplacian_psd(seed):
    """Delta_L is negative semidefinite with kernel exactly span{vec(I)}."""
    rng = np.random.default_rng(seed)
    ok = True
    worst = -np.inf
    for n in (2, 3):
        for _, basis in _bases(n):
            sup = lindblad.laplacian_superoperator(basis)
            w = np.linalg.eigvalsh(0.5 * (sup + sup.conj().T))
            worst = max(worst, float(w[-1]))
            nzero = int(np.sum(np.abs(w) < 1e-9))
            ok = ok and w[-1] <= 1e-10 and nzero == 1
    return {"name": "laplacian-psd", "passed": ok, "worst": worst, "tolerance": 1e-10}


def check_heat_oracle(seed):
    """RK4 heat flow matches the superoperator exponential to 1e-6."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3):
        basis = lindblad.gell_mann_basis(n)
        rho0 = random_density(rng, n)
        tr = entropy_mod.flow_log(basis, rho0, 0.5, 1e-3, record_stride=500)
        exact = lindblad.heat_semigroup(basis, rho0, 0.5)
        worst = max(worst, float(np.linalg.norm(tr.states[-1] - exact)
                                 / np.linalg.norm(exact)))
    return {"name": "heat-oracle", "passed": worst <= 1e-6, "worst": worst,
            "tolerance": 1e-6}


def check_entropy_monotone(seed, trials=6):
    """Entropy is non-decreasing and trace conserved along both flows."""
    rng = np.random.default_rng(seed)
    worst_ds = np.inf
    worst_tr = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        basis = lindblad.gell_mann_basis(n)
        rho0 = random_density(rng, n)
        for flow in (entropy_mod.flow_anticomm, entropy_mod.flow_log):
            tr = flow(basis, rho0, 0.5, 1e-3, record_stride=25)
            worst_ds = min(worst_ds, float(np.min(np.diff(tr.entropies))))
            worst_tr = max(worst_tr, float(np.max(tr.trace_drifts)))
    passed = worst_ds >= -1e-12 and worst_tr <= 1e-9
    return {"name": "entropy-monotone", "passed": passed,
            "worst": worst_ds, "tolerance": -1e-12}


def check_metric_spd(seed, trials=20):
    """Metric operator matrix is symmetric positive-definite; inner products
    match -tr(lambda delta); gauge invariance of the gradient."""
    rng = np.random.default_rng(seed)
    ok = True
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 4))
        basis = lindblad.gell_mann_basis(n)
        ws = metric.MetricWorkspace(basis)
        rho = random_density(rng, n)
        for kind in metric.MetricKind:
            k = ws.metric_matrix(rho, kind)
            sym = float(np.max(np.abs(k - k.T)))
            wmin = float(np.linalg.eigvalsh(k)[0])
            ok = ok and sym <= 1e-12 and wmin > 0
            delta = random_tangent(rng, n)
            lam = metric.poisson_solve(basis, rho, delta, kind, workspace=ws)
            ip = metric.inner_product(basis, rho, delta, delta, kind, workspace=ws)
            alt = -np.trace(lam.mat @ delta).real
            worst = max(worst, abs(ip - alt) / max(ip, 1e-30))
            gauge = lindblad.grad_L(basis, lam.mat + 0.7 * np.eye(n))
            worst = max(worst, float(np.max(np.abs(gauge - lindblad.grad_L(basis, lam.mat)))))
    return {"name": "metric-spd", "passed": ok and worst <= 1e-10, "worst": worst,
            "tolerance": 1e-10}


def check_sbp(seed, trials=50):
    """Discrete summation by parts: <grad f, g> = <f, -div g> exactly."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        g = int(rng.integers(3, 40))
        dg = spatial.grid_gradient_matrix(g)
        dd = spatial.grid_divergence_matrix(g)
        f, v = rng.standard_normal(g), rng.standard_normal(g)
        worst = max(worst, abs(np.dot(dg @ f, v) + np.dot(f, dd @ v)))
    return {"name": "sbp", "passed": worst <= 1e-12, "worst": worst,
            "tolerance": 1e-12}


def check_mass_conservation(seed, trials=20):
    """Any velocities inserted into the discrete continuity update preserve
    h * sum tr(rho) exactly."""
    rng = np.random.default_rng(seed)
    basis = lindblad.pauli_basis()
    worst = 0.0
    for _ in range(trials):
        g = int(rng.integers(4, 16))
        h = 1.0 / g
        vals = np.stack([random_density(rng, 2) for _ in range(g)])
        vals = vals / (h * np.sum(np.trace(vals, axis1=1, axis2=2).real))
        w = np.stack([random_hermitian(rng, 2) for _ in range(g)])
        v = np.stack([random_skew_field(rng, 3, 2) for _ in range(g)])
        dd = spatial.grid_divergence_matrix(g)
        flux = 0.5 * (vals @ w + w @ vals)
        quantum = np.stack([
            lindblad.div_L(basis, lindblad.mult_anticomm(vals[x], v[x]))
            for x in range(g)])
        update = -np.einsum("xy,yab->xab", dd, flux) + quantum
        new = vals + 1e-2 * update
        drift = abs(h * np.sum(np.trace(new, axis1=1, axis2=2).real) - 1.0)
        worst = max(worst, float(drift))
    return {"name": "mass-conservation", "passed": worst <= 1e-10, "worst": worst,
            "tolerance": 1e-10}


def check_roundtrip(seed, trials=50):
    """Matrix records survive write-then-read bit-exactly."""
    import json

    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        rec = json.loads(json.dumps(matrix_to_record(m)))
        back = record_to_matrix(rec)
        ok = ok and bool(np.all(back == m))
    return {"name": "roundtrip", "passed": ok, "worst": 0.0 if ok else 1.0,
            "tolerance": 0.0}


def check_geodesic_mini(seed):
    """Small backend-agreement smoke test (T=8, one random 2x2 pair)."""
    rng = np.random.default_rng(seed)
    basis = lindblad.pauli_basis()
    r0 = random_density(rng, 2)
    r1 = random_density(rng, 2)
    _, rep_c = geodesic.solve_w2a_conic(basis, r0, r1, 8)
    _, rep_d = geodesic.solve_w2_direct(basis, r0, r1, 8)
    rel = abs(rep_c.distance - rep_d.distance) / max(rep_d.distance, 1e-30)
    return {"name": "geodesic-mini", "passed": rel <= 0.02 and rep_c.converged,
            "worst": rel, "tolerance": 0.02}


ALL_CHECKS = (
    check_adjointness,
    check_product_rule,
    check_identity28,
    check_quadrature,
    check_laplacian_psd,
    check_heat_oracle,
    check_entropy_monotone,
    check_metric_spd,
    check_sbp,
    check_mass_conservation,
    check_roundtrip,
    check_geodesic_mini,
)

SUITE_NAMES = tuple(f.__name__.removeprefix("check_").replace("_", "-")
                    for f in ALL_CHECKS)


def run_checks(seed=0, only=None):
    """Run the invariant suites; returns a list of result records."""
    results = []
    for fn in ALL_CHECKS:
        name = fn.__name__.removeprefix("check_").replace("_", "-")
        if only is not None and name != only:
            continue
        results.append(fn(seed))
    if not results:
        raise ValidationError(f"no suite named {only!r}; known: {', '.join(SUITE_NAMES)}")
    return results
