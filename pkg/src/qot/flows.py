"""Von Neumann entropy and its gradient flows with respect to the two
Wasserstein geometries.

Both flows are instances of rho' = -div_L M_rho(grad_L log rho) with a
pluggable multiplication: the anti-commutator gives the nonlinear flow, the
Kubo-Mori multiplication collapses to the linear heat equation
rho' = Delta_L rho through the logarithmic-mean identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PositivityError, ValidationError
from .linalg import EPS_PD, as_density
from .metric import MetricKind

_LOG_FLOOR = 10 * EPS_PD
_MAX_HALVINGS = 20


def entropy(rho):
    """S(rho) = -tr(rho log rho); in (0, log n], equal to log n iff rho = I/n."""
    rho = as_density(rho)
    w = np.linalg.eigvalsh(rho)
    return float(-np.sum(w * np.log(w)))


@dataclass(frozen=True)
class FlowTrace:
    """Recorded trajectory of a flow: states at sampled times with diagnostics."""

    times: np.ndarray
    states: np.ndarray
    entropies: np.ndarray
    min_eigs: np.ndarray
    trace_drifts: np.ndarray

    def __post_init__(self):
        m = len(self.times)
        if not (len(self.states) == len(self.entropies) == len(self.min_eigs)
                == len(self.trace_drifts) == m):
            raise ValidationError("flow trace columns must have equal length")


def _mult_handle(mult):
    """Normalize a multiplication handle to a kernel flag, or keep a callable."""
    if callable(mult):
        return mult
    kind = MetricKind.coerce(mult)
    return kernels.KIND_ANTICOMM if kind is MetricKind.ANTICOMM else kernels.KIND_LOG


def flow_step_generic(basis, rho, dt, mult):
    """One RK4 step of rho' = -div_L M_rho(grad_L log rho).

    `mult` is a multiplication handle: a MetricKind / its string value, or a
    callable (rho, field) -> field for experimenting with other
    multiplications. Positivity loss triggers adaptive halving of dt (the two
    half-steps recurse); after 20 halvings a PositivityError is raised.
    """
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    rho = np.ascontiguousarray(rho, dtype=np.complex128)
    handle = _mult_handle(mult)
    return _step_adaptive(basis, rho, dt, handle, 0)


def _rhs_callable(basis, rho, handle):
    from .linalg import herm_log
    from .lindblad import div_L, grad_L

    g = grad_L(basis, herm_log(rho, floor=_LOG_FLOOR))
    return -div_L(basis, handle(rho, g))


def _step_adaptive(basis, rho, dt, handle, depth):
    if depth > _MAX_HALVINGS:
        raise PositivityError(
            f"positivity could not be preserved after {_MAX_HALVINGS} halvings of dt",
            step=depth,
        )
    if callable(handle):
        k1 = _rhs_callable(basis, rho, handle)
        k2 = _rhs_callable(basis, rho + 0.5 * dt * k1, handle)
        k3 = _rhs_callable(basis, rho + 0.5 * dt * k2, handle)
        k4 = _rhs_callable(basis, rho + dt * k3, handle)
        out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = 0.5 * (out + out.conj().T)
        ok = np.linalg.eigvalsh(out)[0] > _LOG_FLOOR
    else:
        out, ok = kernels.rk4_entropy_step(basis.mats, rho, dt, handle, _LOG_FLOOR)
    if not ok:
        half = _step_adaptive(basis, rho, 0.5 * dt, handle, depth + 1)
        return _step_adaptive(basis, half, 0.5 * dt, handle, depth + 1)
    return out


def _run_flow(basis, rho0, t_final, dt, stepper, record_stride):
    rho = as_density(rho0)
    n = rho.shape[0]
    nsteps = int(np.ceil(t_final / dt - 1e-12))
    times, states = [0.0], [rho.copy()]
    t = 0.0
    for k in range(nsteps):
        step_dt = min(dt, t_final - t)
        try:
            rho = stepper(rho, step_dt)
        except PositivityError as exc:
            raise PositivityError(
                f"positivity lost at flow step {k} (t = {t:.6g}): {exc}",
                step=k, min_eig=exc.min_eig) from exc
        t += step_dt
        if (k + 1) % record_stride == 0 or k == nsteps - 1:
            times.append(t)
            states.append(rho.copy())
    states = np.stack(states)
    eigs = np.linalg.eigvalsh(states)
    entropies = -np.sum(eigs * np.log(np.maximum(eigs, EPS_PD)), axis=1)
    return FlowTrace(
        times=np.asarray(times),
        states=states,
        entropies=entropies,
        min_eigs=eigs[:, 0],
        trace_drifts=np.abs(np.trace(states, axis1=1, axis2=2).real - 1.0),
    )


def flow_anticomm(basis, rho0, t_final, dt, record_stride=1):
    """Entropy gradient flow for the anti-commutator geometry:
    rho' = -1/2 div_L({rho, grad_L log rho}). Nonlinear; entropy is
    non-decreasing along the trajectory and the flow converges to I/n."""
    def stepper(rho, step_dt):
        return _step_adaptive(basis, np.ascontiguousarray(rho), step_dt,
                              kernels.KIND_ANTICOMM, 0)

    return _run_flow(basis, rho0, t_final, dt, stepper, record_stride)


def flow_log(basis, rho0, t_final, dt, record_stride=1):
    """Entropy gradient flow for the logarithmic geometry: the linear heat
    equation rho' = Delta_L rho, integrated by RK4 on the Laplacian directly."""
    mats = basis.mats
    l2 = np.ascontiguousarray(basis.l2sum())

    def stepper(rho, step_dt):
        out = kernels.rk4_heat_step(mats, l2, np.ascontiguousarray(rho), step_dt)
        w0 = np.linalg.eigvalsh(out)[0]
        if w0 <= EPS_PD:
            raise PositivityError(
                f"heat-flow step lost positivity (min eig {w0:.2e}); reduce dt",
                min_eig=float(w0))
        return out

    return _run_flow(basis, rho0, t_final, dt, stepper, record_stride)


def entropy_production(basis, rho, kind=MetricKind.ANTICOMM):
    """dS/dt along the gradient flow: the squared metric norm of the ascent
    direction, tr(rho v* v) (resp. <v, M_rho v>) for v = -grad_L log rho."""
    from .linalg import herm_log
    from .lindblad import grad_L
    from .metric import velocity_action

    rho = as_density(rho)
    v = -grad_L(basis, herm_log(rho, floor=_LOG_FLOOR))
    return velocity_action(basis, rho, v, kind)
