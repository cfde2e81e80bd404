"""Generalized Ricci flow on invariant data.

The flow ``d/dt G+ = -2 Ric+`` is written in a fixed splitting for the
variables ``(g, b, a)`` of :class:`~ggflow.gconn.GeneralizedMetric`.  The
variation of ``G`` pairs ``V-`` with ``V+`` as

``<dG Y-, Z+> = (dg - db)(Y, Z) + c(a Y, da Z) - c(da Y, a Z)``
``<dG t-, Z+> = 2 c(da(Z), t)``

so the flow is a linear solve against ``Ric+``.  In the exact case this is
``dg - db = -2 B+``.  The gauge potential of the adapted splitting is
``A - a``, hence ``d/dt theta = -da``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .courant import CourantAlgebroid
from .gconn import build_generalized_metric, divergence_operator
from .ricci import RicciResult, ricci_closed_form, ricci_trace

log = logging.getLogger(__name__)


class FlowError(RuntimeError):
    """Raised when a trajectory leaves the space of generalized metrics."""


@dataclass(frozen=True)
class FlowState:
    g: np.ndarray
    b: np.ndarray
    a: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None
    t: float = 0.0

    def metric(self, E: CourantAlgebroid):
        return build_generalized_metric(E, self.g, self.b, self.a)

    def offset(self, E: CourantAlgebroid) -> np.ndarray:
        return np.zeros(E.rank) if self.eps is None else np.asarray(self.eps, dtype=float)

    def vector(self) -> np.ndarray:
        parts = [self.g.ravel(), self.b.ravel()]
        if self.a is not None:
            parts.append(self.a.ravel())
        return np.concatenate(parts)


@dataclass(frozen=True)
class FlowRHS:
    dg: np.ndarray
    db: np.ndarray
    da: Optional[np.ndarray] = None

    @property
    def dtheta(self) -> Optional[np.ndarray]:
        return None if self.da is None else -self.da


def _ricci(E: CourantAlgebroid, state: FlowState, route: str) -> RicciResult:
    metric = state.metric(E)
    div = divergence_operator(E, state.offset(E))
    if route == "closed":
        return ricci_closed_form(E, metric, div)
    if route == "trace":
        return ricci_trace(E, metric, div=div)
    raise ValueError(f"unknown Ricci route {route!r}")


def rhs_from_ricci(E: CourantAlgebroid, state: FlowState, ric: RicciResult,
                   chirality: int = 1) -> FlowRHS:
    """Solve ``dG+ = -2 Ric+`` (or the ``V-`` equation in the exact case)."""
    n = E.n
    if chirality == -1:
        if E.fiber is not None:
            raise ValueError("the V- equation is provided for exact algebroids")
        Bm = ric.base_minus
        return FlowRHS(-(Bm + Bm.T), -(Bm - Bm.T))
    if E.fiber is None:
        Bp = ric.base_plus
        return FlowRHS(-(Bp + Bp.T), Bp - Bp.T)
    c = E.fiber.c
    a = np.zeros((n, E.fiber_dim)) if state.a is None else state.a
    da = -np.linalg.solve(c, ric.fiber_plus).T
    cross = np.einsum("ya,ab,zb->yz", a, c, da) - np.einsum("ya,ab,zb->yz", da, c, a)
    M = -2.0 * ric.base_plus - cross
    return FlowRHS(0.5 * (M + M.T), -0.5 * (M - M.T), da)


def flow_rhs(E: CourantAlgebroid, state: FlowState, route: str = "closed",
             chirality: int = 1) -> FlowRHS:
    ric = _ricci(E, state, route)
    return rhs_from_ricci(E, state, ric, chirality)


def stationarity_residual(E: CourantAlgebroid, state: FlowState, route: str = "closed") -> float:
    """Sup-norm of ``Ric+`` of the state."""
    ric = _ricci(E, state, route)
    return float(np.max(np.abs(ric.plus), initial=0.0))


def _advance(state: FlowState, rhs: FlowRHS, h: float) -> FlowState:
    a = None if state.a is None else state.a + h * rhs.da
    return replace(state, g=state.g + h * rhs.dg, b=state.b + h * rhs.db, a=a, t=state.t + h)


def _combine(rhs_list, weights) -> FlowRHS:
    dg = sum(w * r.dg for w, r in zip(weights, rhs_list))
    db = sum(w * r.db for w, r in zip(weights, rhs_list))
    da = None
    if rhs_list[0].da is not None:
        da = sum(w * r.da for w, r in zip(weights, rhs_list))
    return FlowRHS(dg, db, da)


def _check_state(state: FlowState, cap: float) -> None:
    if not np.all(np.isfinite(state.vector())) or np.max(np.abs(state.vector())) > cap:
        raise FlowError(f"blow-up detected at t={state.t:.6g}")
    g = 0.5 * (state.g + state.g.T)
    if np.linalg.eigvalsh(g).min() <= 0.0:
        raise FlowError(f"metric lost positivity at t={state.t:.6g}")


def integrate_flow(E: CourantAlgebroid, state0: FlowState, t_end: float, dt: float,
                   scheme: str = "rk4", route: str = "closed", cap: float = 1e8,
                   eps_schedule: Optional[Callable[[float], np.ndarray]] = None,
                   symmetry_tol: float = 1e-9) -> list[FlowState]:
    """Fixed-step integration; returns states at every step boundary.

    ``eps_schedule(t)`` optionally prescribes the divergence offset; by
    default it is held fixed.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if scheme not in ("euler", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    steps = int(round(t_end / dt))
    if steps < 0 or abs(steps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end must be a non-negative multiple of dt")

    def rhs(s: FlowState) -> FlowRHS:
        if eps_schedule is not None:
            s = replace(s, eps=np.asarray(eps_schedule(s.t), dtype=float))
        out = flow_rhs(E, s, route)
        if (np.max(np.abs(out.dg - out.dg.T), initial=0.0) > symmetry_tol
                or np.max(np.abs(out.db + out.db.T), initial=0.0) > symmetry_tol):
            raise FlowError(f"symmetry class violated at t={s.t:.6g}")
        return out

    state = state0
    _check_state(state, cap)
    traj = [state]
    for _ in range(steps):
        if scheme == "euler":
            state = _advance(state, rhs(state), dt)
        else:
            k1 = rhs(state)
            k2 = rhs(_advance(state, k1, dt / 2))
            k3 = rhs(_advance(state, k2, dt / 2))
            k4 = rhs(_advance(state, k3, dt))
            incr = _combine([k1, k2, k3, k4], [1 / 6, 1 / 3, 1 / 3, 1 / 6])
            state = _advance(state, incr, dt)
        # keep the symmetry classes exact against round-off
        state = replace(state, g=0.5 * (state.g + state.g.T), b=0.5 * (state.b - state.b.T))
        _check_state(state, cap)
        traj.append(state)
    if eps_schedule is not None:
        log.debug("divergence offset followed a schedule")
    return traj


def t3_flux_radius(f0: float, k: float, t: float) -> float:
    """Exact solution ``f(t) = (f0^3 + 3 k^2 t)^(1/3)`` for ``g = f I`` on the flux torus."""
    return float(np.cbrt(f0 ** 3 + 3.0 * k ** 2 * t))
