"""T-duality along a central circle direction.

Invariant model: a Lie algebra with a central basis vector ``Z`` (the
fiber), so ``[X_i, X_j] = c^k_ij X_k + F_ij Z`` on the base block and
``H = H_3 + H_2 ^ zeta`` with ``H_2 = iota_Z H``.  The dual algebra
exchanges the roles ``F_hat = H_2`` and ``iota_Zhat H_hat = F``.  The map
``psi`` swaps ``Z <-> zeta_hat`` and ``zeta <-> Z_hat``; it is an isometry
and bracket isomorphism between the invariant (reduced) frames, and the
dual generalized metric is ``psi(V+)`` read back as a graph ``g_hat - b_hat``.

Grid model: fields on a periodic coordinate ``x`` of ``(x, y, z)`` with
``z`` the fiber; generalized Ricci tensors from coordinate Christoffel
symbols and centered finite differences.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .courant import CourantAlgebroid, FrameData
from .flow import FlowState, integrate_flow
from .gconn import GeneralizedMetric, build_generalized_metric, divergence_operator
from .lie import KForm, LieAlgebra
from .ricci import ricci_closed_form


def thread_cap() -> int:
    """Parallelism cap from ``GGFLOW_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("GGFLOW_THREADS", "1")))
    except ValueError:
        return 1


# ----------------------------------------------------------------------------
# Invariant data


@dataclass(frozen=True)
class TorusBundleData:
    """Exact invariant data on a total algebra with central fiber ``fiber``."""

    algebra: LieAlgebra
    fiber: int
    H: KForm
    g: np.ndarray
    b: np.ndarray
    eps: Optional[np.ndarray] = None

    def __post_init__(self):
        N = self.algebra.dim
        z = self.fiber
        if not 0 <= z < N:
            raise ValueError(f"fiber index {z} out of range")
        c = self.algebra.structure_constants
        if np.max(np.abs(c[z]), initial=0.0) > 1e-12:
            raise ValueError(f"direction {z + 1} is not central")
        g = np.asarray(self.g, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if g[z, z] <= 0:
            raise ValueError("fiber metric h must be positive")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "b", b)
        if self.eps is not None:
            object.__setattr__(self, "eps", np.asarray(self.eps, dtype=float))

    @property
    def dim(self) -> int:
        return self.algebra.dim

    @property
    def base_indices(self) -> list[int]:
        return [i for i in range(self.dim) if i != self.fiber]

    @property
    def h(self) -> float:
        return float(self.g[self.fiber, self.fiber])

    @property
    def nu(self) -> float:
        """Fiber density ``sqrt|h|`` entering the dilaton shift."""
        return float(np.sqrt(abs(self.h)))

    @property
    def connection(self) -> np.ndarray:
        """Components ``A_i`` of ``theta = zeta + A_i e^i`` (g-orthogonal coframe)."""
        return self.g[self.fiber, self.base_indices] / self.h

    @property
    def gbar(self) -> np.ndarray:
        idx = self.base_indices
        A = self.connection
        return self.g[np.ix_(idx, idx)] - self.h * np.outer(A, A)

    def reassembled_metric(self) -> np.ndarray:
        """``gbar + h theta (x) theta`` back on the total frame."""
        N, z, idx = self.dim, self.fiber, self.base_indices
        theta = np.zeros(N)
        theta[z] = 1.0
        theta[idx] = self.connection
        out = self.h * np.outer(theta, theta)
        out[np.ix_(idx, idx)] += self.gbar
        return out

    def base_algebra(self) -> LieAlgebra:
        idx = self.base_indices
        c = self.algebra.structure_constants[np.ix_(idx, idx, idx)]
        return LieAlgebra(len(idx), c, name=f"{self.algebra.name}/Z")

    def curvature(self) -> np.ndarray:
        """``F_ij = c^z_ij`` on the base frame."""
        idx = self.base_indices
        return self.algebra.structure_constants[np.ix_(idx, idx)][:, :, self.fiber]

    def flux_components(self) -> tuple[np.ndarray, np.ndarray]:
        """``(H_3, H_2)`` on the base frame with ``H_2 = iota_Z H``."""
        idx = self.base_indices
        Hf = self.H.full()
        return Hf[np.ix_(idx, idx, idx)], Hf[self.fiber][np.ix_(idx, idx)]

    def algebroid(self) -> CourantAlgebroid:
        return CourantAlgebroid.exact(self.algebra, self.H)

    def metric(self) -> GeneralizedMetric:
        return build_generalized_metric(self.algebroid(), self.g, self.b)

    def offset(self) -> np.ndarray:
        return np.zeros(2 * self.dim) if self.eps is None else self.eps


@dataclass(frozen=True)
class ReducedAlgebroid:
    """Invariant frame of ``E/T`` ordered ``(X_base, Z, zeta, xi_base)``."""

    base: LieAlgebra
    frame: FrameData
    order: np.ndarray

    def residuals(self) -> dict[str, float]:
        from .courant import axioms_residual

        return axioms_residual(self.frame)


def _reduced_order(N: int, z: int) -> np.ndarray:
    idx = [i for i in range(N) if i != z]
    return np.array(idx + [z, N + z] + [N + i for i in idx])


def reduce_invariant(E: CourantAlgebroid, data: TorusBundleData) -> ReducedAlgebroid:
    if E.fiber is not None:
        raise ValueError("reduction is provided for exact algebroids")
    N, z = data.dim, data.fiber
    if np.max(np.abs(E.base.structure_constants[z]), initial=0.0) > 1e-12:
        raise ValueError("fiber direction is not central")
    order = _reduced_order(N, z)
    perm = np.eye(2 * N)[:, order]
    fr = E.frame.transform(perm)
    anchor = fr.anchor[data.base_indices]
    base = data.base_algebra()
    return ReducedAlgebroid(base, FrameData(base, fr.pairing, anchor, fr.bracket), order)


def duality_map(N: int, z: int) -> np.ndarray:
    """Matrix of ``psi`` between the standard frames of ``E`` and ``E_hat``."""
    Psi = np.eye(2 * N)
    Psi[:, [z, N + z]] = Psi[:, [N + z, z]]
    return Psi


def dual_algebra_and_flux(data: TorusBundleData) -> tuple[LieAlgebra, KForm]:
    N, z = data.dim, data.fiber
    c = data.algebra.structure_constants.copy()
    Hf = data.H.full()
    F = c[:, :, z].copy()
    c[:, :, z] = Hf[z]
    Hh = Hf.copy()
    Hh[z, :, :] = F
    Hh[:, z, :] = -F
    Hh[:, :, z] = F
    name = f"dual({data.algebra.name})" if data.algebra.name else ""
    return LieAlgebra(N, c, name=name), KForm.from_full(Hh)


def graph_of(subspace: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """``(g, b)`` with columns of ``subspace`` spanning ``{X + (g - b) X}``."""
    vec, cov = subspace[:N], subspace[N:]
    M = cov @ np.linalg.inv(vec)
    return 0.5 * (M + M.T), -0.5 * (M - M.T)


def dualize_buscher(data: TorusBundleData) -> TorusBundleData:
    """Dual invariant data; ``eps`` is transported by ``psi`` (no shift for constant h)."""
    N, z = data.dim, data.fiber
    algebra, H = dual_algebra_and_flux(data)
    Psi = duality_map(N, z)
    plus = data.metric().plus_basis
    g_hat, b_hat = graph_of(Psi @ plus, N)
    eps = None if data.eps is None else Psi @ data.eps
    return TorusBundleData(algebra, z, H, g_hat, b_hat, eps)


def buscher_rules(g: np.ndarray, b: np.ndarray, z: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form rules on ``E = g - b`` (agree with :func:`graph_of` applied to ``psi V+``)."""
    E = np.asarray(g, dtype=float) - np.asarray(b, dtype=float)
    ezz = E[z, z]
    E_hat = E - np.outer(E[:, z], E[z, :]) / ezz
    E_hat[z, :] = -E[z, :] / ezz
    E_hat[:, z] = E[:, z] / ezz
    E_hat[z, z] = 1.0 / ezz
    return 0.5 * (E_hat + E_hat.T), -0.5 * (E_hat - E_hat.T)


def dilaton_shift(h: np.ndarray, h_hat: np.ndarray, dx: float, order: int = 4) -> np.ndarray:
    """``2 d log(nu_hat / nu)`` (x-component) with fiber densities ``nu = sqrt(h)``."""
    return periodic_derivative(np.log(h_hat / h), dx, order)


def dual_pair(data: TorusBundleData, eps: Optional[np.ndarray] = None):
    """``(data_hat, eps_hat)``; constant ``h`` means the dilaton shift vanishes."""
    if eps is not None:
        data = replace(data, eps=np.asarray(eps, dtype=float))
    dual = dualize_buscher(data)
    return dual, dual.offset()


def transport_matrices(metric: GeneralizedMetric, metric_hat: GeneralizedMetric,
                       Psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``psi e_i^+- = sum_k C+-[k, i] e_hat_k^+-``."""
    cp = np.linalg.lstsq(metric_hat.plus_basis, Psi @ metric.plus_basis, rcond=None)[0]
    cm = np.linalg.lstsq(metric_hat.minus_basis, Psi @ metric.minus_basis, rcond=None)[0]
    return cp, cm


def ricci_exchange_residual(data: TorusBundleData, dual: Optional[TorusBundleData] = None) -> float:
    """Discrepancy of both Ricci tensors under ``psi``."""
    dual = dualize_buscher(data) if dual is None else dual
    N, z = data.dim, data.fiber
    E, Eh = data.algebroid(), dual.algebroid()
    m, mh = data.metric(), dual.metric()
    R = ricci_closed_form(E, m, divergence_operator(E, data.offset()))
    Rh = ricci_closed_form(Eh, mh, divergence_operator(Eh, dual.offset()))
    cp, cm = transport_matrices(m, mh, duality_map(N, z))
    plus = cm.T @ Rh.plus @ cp
    minus = cp.T @ Rh.minus @ cm
    return float(max(np.max(np.abs(plus - R.plus)), np.max(np.abs(minus - R.minus))))


def state_distance(data: TorusBundleData, dual_state_g, dual_state_b) -> float:
    d2 = dualize_buscher(data)
    return float(max(np.max(np.abs(d2.g - dual_state_g)), np.max(np.abs(d2.b - dual_state_b))))


def flow_correspondence_residual(data: TorusBundleData, t_end: float = 0.5, dt: float = 1e-3,
                                 scheme: str = "rk4") -> float:
    """Stepwise sup distance between the dualized flow and the flow of the dual."""
    dual = dualize_buscher(data)
    E, Eh = data.algebroid(), dual.algebroid()
    jobs = [(E, FlowState(data.g, data.b, None, data.offset())),
            (Eh, FlowState(dual.g, dual.b, None, dual.offset()))]
    with ThreadPoolExecutor(max_workers=min(2, thread_cap())) as pool:
        traj, traj_h = pool.map(lambda job: integrate_flow(job[0], job[1], t_end, dt, scheme), jobs)
    worst = 0.0
    for s, sh in zip(traj, traj_h):
        step = replace(data, g=s.g, b=s.b)
        worst = max(worst, state_distance(step, sh.g, sh.b))
    return worst


def verify_duality(data: TorusBundleData, t_end: float = 0.5, dt: float = 1e-3,
                   with_killing: bool = True) -> dict[str, float]:
    dual = dualize_buscher(data)
    N, z = data.dim, data.fiber
    E, Eh = data.algebroid(), dual.algebroid()
    Psi = duality_map(N, z)
    fr = Eh.frame.transform(Psi)
    keep = [i for i in range(N) if i != z]
    report = {
        "isometry_residual": float(np.max(np.abs(fr.pairing - E.frame.pairing))),
        "bracket_residual": float(np.max(np.abs(fr.bracket - E.frame.bracket))),
        "anchor_residual": float(np.max(np.abs(fr.anchor[keep] - E.frame.anchor[keep]))),
        "ricci_exchange_residual": ricci_exchange_residual(data, dual),
        "involution_residual": float(max(np.max(np.abs(dualize_buscher(dual).g - data.g)),
                                         np.max(np.abs(dualize_buscher(dual).b - data.b)))),
        "ricci_norm": float(np.max(np.abs(ricci_closed_form(E, data.metric()).plus))),
    }
    if t_end > 0:
        report["flow_correspondence_residual"] = flow_correspondence_residual(data, t_end, dt)
    if with_killing:
        from .spinor import killing_transport_residual

        report["killing_residual_transport"] = killing_transport_residual(data, dual)
    return report


# ----------------------------------------------------------------------------
# Grid model


def periodic_derivative(f: np.ndarray, dx: float, order: int = 4, axis: int = 0) -> np.ndarray:
    """Centered periodic first derivative of formal order 2 or 4 along ``axis``."""
    r = lambda k: np.roll(f, -k, axis=axis)  # noqa: E731  f[i + k]
    if order == 2:
        return (r(1) - r(-1)) / (2.0 * dx)
    if order == 4:
        return (-r(2) + 8.0 * r(1) - 8.0 * r(-1) + r(-2)) / (12.0 * dx)
    raise ValueError("stencil order must be 2 or 4")


@dataclass(frozen=True)
class FiberedGridModel:
    """Fields on ``x in [0, length)`` depending on ``x`` only; ``z`` (index 2) is the fiber.

    ``eps_scale`` fixes the divergence offset ``eps = eps_scale * d(phi_dil)``;
    the default 4 makes the duality shift read ``phi_hat = phi - log(h) / 2``.
    ``H0`` is a constant background ``H0 dx^dy^dz`` added to ``db``.
    """

    g: np.ndarray
    b: np.ndarray
    phi: np.ndarray
    length: float = 2.0 * np.pi
    order: int = 4
    H0: float = 0.0
    eps_scale: float = 4.0
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        b = np.asarray(self.b, dtype=float)
        N = g.shape[0]
        if g.shape != (N, 3, 3) or b.shape != (N, 3, 3):
            raise ValueError("g and b must have shape (N, 3, 3)")
        if N < 16:
            raise ValueError("grid resolution must be at least 16")
        if np.any(np.linalg.eigvalsh(0.5 * (g + g.transpose(0, 2, 1))) <= 0):
            raise ValueError("metric must be positive definite at every grid point")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "x", np.arange(N) * self.length / N)

    @classmethod
    def from_fields(cls, h, A, B, gbar, phi, length: float = 2.0 * np.pi, order: int = 4,
                    H0: float = 0.0, eps_scale: float = 4.0) -> "FiberedGridModel":
        """``g = gbar + h (dz + A dx)^2`` and ``b = B dx ^ dz``; ``gbar`` is ``(N, 2, 2)``."""
        h, A, B, phi = (np.asarray(v, dtype=float) for v in (h, A, B, phi))
        N = h.shape[0]
        gbar = np.asarray(gbar, dtype=float)
        if gbar.ndim == 1:
            gbar = np.einsum("n,ij->nij", gbar, np.eye(2))
        g = np.zeros((N, 3, 3))
        g[:, :2, :2] = gbar
        g[:, 0, 0] += h * A * A
        g[:, 0, 2] = g[:, 2, 0] = h * A
        g[:, 2, 2] = h
        b = np.zeros((N, 3, 3))
        b[:, 0, 2] = B
        b[:, 2, 0] = -B
        return cls(g, b, phi, length, order, H0, eps_scale)

    @property
    def N(self) -> int:
        return self.g.shape[0]

    @property
    def dx(self) -> float:
        return self.length / self.N

    @property
    def h(self) -> np.ndarray:
        return self.g[:, 2, 2]

    def deriv(self, f: np.ndarray) -> np.ndarray:
        return periodic_derivative(f, self.dx, self.order)

    def offset(self) -> np.ndarray:
        """Divergence offset 1-form ``eps`` per point, shape ``(N, 3)``."""
        eps = np.zeros((self.N, 3))
        eps[:, 0] = self.eps_scale * self.deriv(self.phi)
        return eps

    def with_fields(self, g=None, b=None, phi=None) -> "FiberedGridModel":
        return FiberedGridModel(self.g if g is None else g, self.b if b is None else b,
                                self.phi if phi is None else phi, self.length, self.order,
                                self.H0, self.eps_scale)


def _grad(model: FiberedGridModel, f: np.ndarray) -> np.ndarray:
    """Coordinate gradient ``[point, l, ...]`` (only ``l = 0`` nonzero)."""
    out = np.zeros((f.shape[0], 3) + f.shape[1:])
    out[:, 0] = model.deriv(f)
    return out


def grid_christoffel(model: FiberedGridModel) -> np.ndarray:
    """``Gamma[p, i, j, k]`` with ``nabla_i d_j = Gamma^k_ij d_k``."""
    g = model.g
    gi = np.linalg.inv(g)
    dg = _grad(model, g)  # [p, l, i, j] = d_l g_ij
    low = 0.5 * (np.einsum("pijl->pijl", dg) + np.einsum("pjil->pijl", dg)
                 - np.einsum("plij->pijl", dg))
    return np.einsum("pijl,plk->pijk", low, gi)


def grid_ricci_metric(model: FiberedGridModel) -> np.ndarray:
    Gam = grid_christoffel(model)
    dGam = _grad(model, Gam)  # [p, l, i, j, k] = d_l Gamma^k_ij
    term1 = np.einsum("pkijk->pij", dGam)
    term2 = np.einsum("pjikk->pij", dGam)
    term3 = np.einsum("pklk,pijl->pij", Gam, Gam)
    term4 = np.einsum("pjlk,pikl->pij", Gam, Gam)
    return term1 - term2 + term3 - term4


def grid_flux(model: FiberedGridModel) -> np.ndarray:
    """``H = db + H0 dx^dy^dz`` as a full antisymmetric array per point."""
    db = _grad(model, model.b)  # [p, i, j, k] = d_i b_jk
    H = db + np.einsum("pjki->pijk", db) + np.einsum("pkij->pijk", db)
    if model.H0:
        eps = np.zeros((3, 3, 3))
        for (i, j, k), s in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                             ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)):
            eps[i, j, k] = s
        H = H + model.H0 * eps
    return H


def grid_generalized_ricci(model: FiberedGridModel) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise base presentations ``(B+, B-)`` of the generalized Ricci tensors."""
    g = model.g
    gi = np.linalg.inv(g)
    Gam = grid_christoffel(model)
    ric = grid_ricci_metric(model)
    H = grid_flux(model)
    hh = np.einsum("prs,pkl,pirk,pjsl->pij", gi, gi, H, H)
    dH = _grad(model, H)  # [p, l, i, j, k]
    nabla_H = (dH - np.einsum("plim,pmjk->plijk", Gam, H) - np.einsum("pljm,pimk->plijk", Gam, H)
               - np.einsum("plkm,pijm->plijk", Gam, H))
    dstar = -np.einsum("pli,plijk->pjk", gi, nabla_H)
    phi = model.offset()
    dphi = _grad(model, phi)  # [p, l, m]
    nabla_phi = dphi - np.einsum("pyzm,pm->pyz", Gam, phi)
    tors = 0.5 * np.einsum("pyzm,pmn,pn->pyz", H, gi, phi)
    plus = ric - 0.25 * hh - 0.5 * dstar + 0.5 * (nabla_phi - tors)
    minus = ric - 0.25 * hh + 0.5 * dstar + 0.5 * (nabla_phi + tors)
    return plus, minus


def grid_dualize(model: FiberedGridModel, shift: bool = True) -> FiberedGridModel:
    """Pointwise Buscher dual along ``z``.

    With ``eps = 4 d(phi_dil)`` the offset shift ``2 d log(nu_hat / nu)`` is
    the dilaton shift ``phi_hat = phi - log(h) / 2``.
    """
    if model.H0:
        raise ValueError("duality of the grid model needs H0 = 0")
    g_hat = np.empty_like(model.g)
    b_hat = np.empty_like(model.b)
    Psi = duality_map(3, 2)
    for p in range(model.N):
        plus = np.vstack([np.eye(3), (model.g[p] - model.b[p])])
        g_hat[p], b_hat[p] = graph_of(Psi @ plus, 3)
    phi = model.phi - 0.5 * np.log(model.h) if shift else model.phi
    return model.with_fields(g_hat, b_hat, phi)


def grid_ricci_exchange(model: FiberedGridModel, dual: Optional[FiberedGridModel] = None) -> float:
    """Sup over grid points of the ``psi``-pushed ``Ric+`` discrepancy."""
    dual = grid_dualize(model) if dual is None else dual
    Bp, _ = grid_generalized_ricci(model)
    Bh, _ = grid_generalized_ricci(dual)
    Psi = duality_map(3, 2)
    worst = 0.0
    for p in range(model.N):
        g, b, gh, bh = model.g[p], model.b[p], dual.g[p], dual.b[p]
        plus = np.vstack([np.eye(3), g - b])
        minus = np.vstack([np.eye(3), -g - b])
        plus_h = np.vstack([np.eye(3), gh - bh])
        minus_h = np.vstack([np.eye(3), -gh - bh])
        cp = np.linalg.lstsq(plus_h, Psi @ plus, rcond=None)[0]
        cm = np.linalg.lstsq(minus_h, Psi @ minus, rcond=None)[0]
        worst = max(worst, float(np.max(np.abs(cm.T @ Bh[p] @ cp - Bp[p]))))
    return worst


def grid_ricci_flow(model: FiberedGridModel, t_end: float, dt: float, cfl: float = 0.2,
                    sample_every: int = 1) -> list[FiberedGridModel]:
    """RK4 method of lines for ``dg - db = -2 B+`` with the dilaton held fixed."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    gxx_inv = np.linalg.inv(model.g)[:, 0, 0]
    limit = cfl * model.dx ** 2 / float(np.max(gxx_inv))
    if dt > limit:
        raise ValueError(f"dt={dt:.3g} violates the CFL cap {limit:.3g}")
    steps = int(round(t_end / dt))

    def rhs(m: FiberedGridModel):
        Bp, _ = grid_generalized_ricci(m)
        return -(Bp + Bp.transpose(0, 2, 1)), Bp - Bp.transpose(0, 2, 1)

    traj = [model]
    cur = model
    for step in range(steps):
        k1 = rhs(cur)
        k2 = rhs(cur.with_fields(cur.g + 0.5 * dt * k1[0], cur.b + 0.5 * dt * k1[1]))
        k3 = rhs(cur.with_fields(cur.g + 0.5 * dt * k2[0], cur.b + 0.5 * dt * k2[1]))
        k4 = rhs(cur.with_fields(cur.g + dt * k3[0], cur.b + dt * k3[1]))
        g = cur.g + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        b = cur.b + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        cur = cur.with_fields(g, b)
        if (step + 1) % sample_every == 0:
            traj.append(cur)
    return traj


__all__ = [
    "FiberedGridModel", "ReducedAlgebroid", "TorusBundleData", "buscher_rules", "dilaton_shift",
    "dual_pair", "duality_map", "dualize_buscher", "flow_correspondence_residual",
    "graph_of", "grid_dualize", "grid_generalized_ricci", "grid_ricci_exchange",
    "grid_ricci_flow", "periodic_derivative", "reduce_invariant", "ricci_exchange_residual",
    "verify_duality",
]
