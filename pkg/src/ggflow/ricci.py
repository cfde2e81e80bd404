"""Generalized curvature and Ricci tensors.

On constant frames the mixed curvature operators are

``R+(e-, e+) f+ = D_{e-} D_{e+} f+ - D_{e+} D_{e-} f+ - D_{[e-, e+]} f+``

and similarly for ``R-``; with ``C = Gamma . P^{-1}`` (``D_{E_a} E_b =
C[a, b, :]``) these are quadratic in ``C`` plus a bracket term.  Ricci
tensors are traces over ``V+`` (resp. ``V-``) using the induced Gram
inverse.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .courant import CourantAlgebroid, FrameData, read_exact_data, read_transitive_data
from .gconn import (
    DivergenceOperator,
    GenConnection,
    GeneralizedMetric,
    divergence_operator,
    levi_civita,
    levi_civita_christoffel,
    offset_parts,
)
from .lie import FrameMetric, KForm, LieAlgebra, h_circ_h, hodge_codiff


def curvature_lowered(frame: FrameData, Gamma: np.ndarray) -> np.ndarray:
    """``Rl[a, b, c, e] = <R(E_a, E_b) E_c, E_e>`` for constant sections."""
    C = Gamma @ frame.pairing_inverse
    dd = np.einsum("bcd,ade->abce", C, C) - np.einsum("acd,bde->abce", C, C)
    dd -= np.einsum("abf,fce->abce", frame.bracket, C)
    return dd @ frame.pairing


@dataclass(frozen=True)
class CurvatureData:
    """Mixed curvature blocks on the adapted frame.

    ``plus[i, j, k, l] = <R+(e_i+, e_j-) e_k+, e_l+>`` and
    ``minus[i, j, k, l] = <R-(e_i-, e_j+) e_k-, e_l->``.
    """

    plus: np.ndarray
    minus: np.ndarray
    D: GenConnection

    def skew_defect(self) -> float:
        return max(float(np.max(np.abs(b + b.transpose(0, 1, 3, 2)), initial=0.0))
                   for b in (self.plus, self.minus))


def curvature(E: CourantAlgebroid, metric: GeneralizedMetric, D: GenConnection) -> CurvatureData:
    if D.compatibility_defect() > 1e-8:
        raise ValueError("connection is not compatible with the generalized metric")
    D = GenConnection(E, D.coeffs, metric)
    frame = metric.adapted_frame()
    rp, r = metric.r_plus, frame.rank
    Rl = curvature_lowered(frame, D.adapted())
    p, m = slice(0, rp), slice(rp, r)
    return CurvatureData(Rl[p, m, p, p], Rl[m, p, m, m], D)


@dataclass(frozen=True)
class RicciResult:
    """Mixed Ricci tensors on the adapted frame.

    ``plus[j, k] = Ric+(e-_j, e+_k)`` has shape ``(r-, r+)`` and
    ``minus[j, k] = Ric-(e+_j, e-_k)`` has shape ``(r+, r-)``.
    """

    plus: np.ndarray
    minus: np.ndarray
    n: int

    @property
    def base_plus(self) -> np.ndarray:
        """``B+[i, j] = Ric+(X_i^-, X_j^+)`` on the base frame."""
        return self.plus[: self.n, : self.n]

    @property
    def base_minus(self) -> np.ndarray:
        """``B-[i, j] = Ric-(X_i^+, X_j^-)`` on the base frame."""
        return self.minus[: self.n, : self.n]

    @property
    def fiber_plus(self) -> np.ndarray:
        """``Ric+(t^-, X^+)`` rows for fiber directions of ``V-``."""
        return self.plus[self.n:, :]

    @property
    def fiber_minus(self) -> np.ndarray:
        """``Ric-(X^+, t^-)`` columns for fiber directions of ``V-``."""
        return self.minus[:, self.n:]


def ricci_from_adapted(frame: FrameData, Gamma: np.ndarray, r_plus: int, n: int) -> RicciResult:
    """Traces of the mixed curvature on an adapted frame."""
    r = frame.rank
    Rl = curvature_lowered(frame, Gamma)
    p, m = slice(0, r_plus), slice(r_plus, r)
    Gp_inv = np.linalg.inv(frame.pairing[p, p])
    Gm_inv = np.linalg.inv(frame.pairing[m, m])
    plus = np.einsum("il,ijkl->jk", Gp_inv, Rl[p, m, p, p])
    minus = np.einsum("il,ijkl->jk", Gm_inv, Rl[m, p, m, m])
    return RicciResult(plus, minus, n)


def ricci_trace(E: CourantAlgebroid, metric: GeneralizedMetric,
                D: Optional[GenConnection] = None,
                div: Optional[DivergenceOperator] = None) -> RicciResult:
    """Ricci tensors of ``D`` (default: the Levi-Civita connection for ``div``)."""
    if D is None:
        D = levi_civita(E, metric, div)
    frame = metric.adapted_frame()
    return ricci_from_adapted(frame, D.adapted(), metric.r_plus, E.n)


def bianchi_first_residual(E: CourantAlgebroid, D: GenConnection) -> float:
    """Cyclic sum of ``<R(e-, a) b, c>`` over ``a, b, c`` in ``V+`` (and ``V-``)."""
    metric = D.metric
    frame = metric.adapted_frame()
    rp, r = metric.r_plus, frame.rank
    Rl = curvature_lowered(frame, D.adapted())
    worst = 0.0
    for mixed, pure in ((slice(rp, r), slice(0, rp)), (slice(0, rp), slice(rp, r))):
        blk = Rl[pure, mixed, pure, pure]  # [a, j, b, c] = <R(a, e_j) b, c>
        cyc = blk + np.einsum("bjca->ajbc", blk) + np.einsum("cjab->ajbc", blk)
        worst = max(worst, float(np.max(np.abs(cyc), initial=0.0)))
    return worst


def total_ricci_endomorphism(result: RicciResult, frame: FrameData, r_plus: int) -> np.ndarray:
    """``Ric = Ric+ - Ric-`` as an endomorphism of ``E`` on the adapted frame.

    ``Ric+`` maps ``e-`` to ``sum_k Ric+(e-, e_k+) ~e_k+`` and ``Ric-`` maps
    ``e+`` to ``sum_k Ric-(e+, e_k-) ~e_k-``.
    """
    r = frame.rank
    p, m = slice(0, r_plus), slice(r_plus, r)
    Gp_inv = np.linalg.inv(frame.pairing[p, p])
    Gm_inv = np.linalg.inv(frame.pairing[m, m])
    out = np.zeros((r, r))
    out[p, m] = Gp_inv @ result.plus.T
    out[m, p] = -(Gm_inv @ result.minus.T)
    return out


def skew_symmetry_defect(result: RicciResult) -> float:
    """Sup of ``Ric+(e-_j, e+_k) - Ric-(e+_k, e-_j)`` (zero iff total Ricci is skew)."""
    return float(np.max(np.abs(result.minus - result.plus.T), initial=0.0))


def skew_symmetry_check(E: CourantAlgebroid, metric: GeneralizedMetric,
                        div: Optional[DivergenceOperator] = None, tol: float = 1e-10) -> dict:
    """Pairing-skew defect of the total Ricci endomorphism ``Ric+ - Ric-``.

    Also reports the symmetric/skew split ``h+-``/``b+-`` of the base blocks.
    """
    result = ricci_trace(E, metric, div=div)
    frame = metric.adapted_frame()
    endo = total_ricci_endomorphism(result, frame, metric.r_plus)
    lowered = frame.pairing @ endo
    residual = float(np.max(np.abs(lowered + lowered.T), initial=0.0))
    bp, bm = result.base_plus, result.base_minus
    return {
        "is_skew": residual < tol,
        "residual": residual,
        "h_plus": 0.5 * (bp + bp.T), "h_minus": 0.5 * (bm + bm.T),
        "b_plus": 0.5 * (bp - bp.T), "b_minus": 0.5 * (bm - bm.T),
    }


# ----------------------------------------------------------------------------
# Closed forms on the base


def riemann_base(algebra: LieAlgebra, g: np.ndarray) -> np.ndarray:
    """``Rm[a, b, c, :]`` = components of ``R(e_a, e_b) e_c`` for invariant ``g``."""
    Gam = levi_civita_christoffel(algebra, g)
    c = algebra.structure_constants
    return (np.einsum("bcm,amk->abck", Gam, Gam) - np.einsum("acm,bmk->abck", Gam, Gam)
            - np.einsum("abf,fck->abck", c, Gam))


def ricci_base(algebra: LieAlgebra, g: np.ndarray) -> np.ndarray:
    """Riemannian Ricci tensor ``Ric(Y, Z) = tr(X -> R(X, Y) Z)``."""
    return np.einsum("abca->bc", riemann_base(algebra, g))


def hessian_like(algebra: LieAlgebra, g: np.ndarray, phi: np.ndarray,
                 H: Optional[np.ndarray] = None, sign: int = 0) -> np.ndarray:
    """``(nabla^{sign} phi)[Y, Z] = (nabla_Y phi)(Z)`` for an invariant 1-form.

    ``nabla^{+-} = nabla^g +- g^{-1} H / 2``.
    """
    Gam = levi_civita_christoffel(algebra, g)
    out = -np.einsum("yzm,m->yz", Gam, phi)
    if sign and H is not None:
        out = out - sign * 0.5 * np.einsum("yzm,m->yz", H, np.linalg.solve(g, phi))
    return out


def ricci_of_connection(algebra: LieAlgebra, christoffel: np.ndarray) -> np.ndarray:
    """``Ric(Y, Z) = tr(X -> R(X, Y) Z)`` for ``nabla_i e_j = sum_k N[i, j, k] e_k``."""
    c = algebra.structure_constants
    N = christoffel
    Rm = (np.einsum("bcm,amk->abck", N, N) - np.einsum("acm,bmk->abck", N, N)
          - np.einsum("abf,fck->abck", c, N))
    return np.einsum("abca->bc", Rm)


def bismut_christoffel(algebra: LieAlgebra, g: np.ndarray, H: np.ndarray, sign: int) -> np.ndarray:
    """Christoffel array of ``nabla^{+-} = nabla^g +- g^{-1} H / 2``."""
    return levi_civita_christoffel(algebra, g) + sign * 0.5 * H @ np.linalg.inv(g)


def f_circ_f(g: np.ndarray, F: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``(F o F)(Y, Z) = sum g^{kl} c(F(Y, e_k), F(e_l, Z))``."""
    return np.einsum("kl,yka,lzb,ab->yz", np.linalg.inv(g), F, F, c)


def gauge_codifferential(algebra: LieAlgebra, g: np.ndarray, F: np.ndarray,
                         A: np.ndarray, kf: np.ndarray) -> np.ndarray:
    """``(d_A^* F)(Z) = -sum g^{ab} (nabla^A_{e_a} F)(e_b, Z)``, shape ``(n, d)``."""
    Gam = levi_civita_christoffel(algebra, g)
    nabla = (-np.einsum("abm,mzk->abzk", Gam, F) - np.einsum("azm,bmk->abzk", Gam, F)
             + np.einsum("ae,bzf,efk->abzk", A, F, kf))
    return -np.einsum("ab,abzk->zk", np.linalg.inv(g), nabla)


def f_dot_h(g: np.ndarray, F: np.ndarray, H: np.ndarray) -> np.ndarray:
    """``(F . H)(Z) = sum F^{ab} H(e_a, e_b, Z) / 2``; equals ``(-1)^{n+1} *(F ^ *H)``."""
    gi = np.linalg.inv(g)
    return 0.5 * np.einsum("ak,bl,abe,klz->ze", gi, gi, F, H)


def r13_tensor(algebra: LieAlgebra, g: np.ndarray, H) -> np.ndarray:
    """``g(R(X, Y) Z, W)`` for the hybrid second derivative

    ``R(X,Y)Z = nabla^{1/3}_X nabla^+_Y Z - nabla^+_Y nabla^{1/3}_X Z
    + nabla^{1/3}_{nabla^+_Y X} Z - nabla^+_{nabla^-_X Y} Z``,

    evaluated on the invariant frame.  Indexed ``[x, y, z, w]``.
    """
    Hf = H.full() if isinstance(H, KForm) else np.asarray(H, dtype=float)
    gi = np.linalg.inv(g)
    Gam = levi_civita_christoffel(algebra, g)
    Hu = Hf @ gi
    Np, Nm, N3 = Gam + 0.5 * Hu, Gam - 0.5 * Hu, Gam + Hu / 6.0
    R = (np.einsum("yzm,xmk->xyzk", Np, N3) - np.einsum("xzm,ymk->xyzk", N3, Np)
         + np.einsum("yxm,mzk->xyzk", Np, N3) - np.einsum("xym,mzk->xyzk", Nm, Np))
    return R @ g


def r13_expanded(algebra: LieAlgebra, g: np.ndarray, H) -> np.ndarray:
    """Expansion of :func:`r13_tensor` through ``R^g``, ``nabla^g H`` and ``H^2`` terms."""
    Hf = H.full() if isinstance(H, KForm) else np.asarray(H, dtype=float)
    gi = np.linalg.inv(g)
    Gam = levi_civita_christoffel(algebra, g)
    # (nabla_a H)(b, c, d) for constant coefficients
    nH = -(np.einsum("abm,mcd->abcd", Gam, Hf) + np.einsum("acm,bmd->abcd", Gam, Hf)
           + np.einsum("adm,bcm->abcd", Gam, Hf))
    Rg = riemann_base(algebra, g) @ g
    HH = np.einsum("xmw,mn,yzn->xyzw", Hf, gi, Hf)  # H(X, g^{-1}H(Y,Z,.), W)
    return (Rg + 0.5 * nH - np.einsum("yxzw->xyzw", nH) / 6.0
            + HH / 12.0 - np.einsum("yxzw->xyzw", HH) / 12.0
            - np.einsum("zxyw->xyzw", HH) / 6.0)


def r13_bianchi_residual(r13: np.ndarray) -> float:
    """Cyclic sum over ``(x, z, w)`` of ``r13[x, y, z, w]``."""
    cyc = r13 + np.einsum("zywx->xyzw", r13) + np.einsum("wyxz->xyzw", r13)
    return float(np.max(np.abs(cyc), initial=0.0))


def ricci_closed_form(E: CourantAlgebroid, metric: GeneralizedMetric,
                      div: Optional[DivergenceOperator] = None) -> RicciResult:
    """Ricci tensors from base tensors, without building a connection.

    Data is read in the adapted splitting of ``metric`` (so ``b`` and the
    fiber shift are absorbed into ``H``, ``F``, ``A``) and the offset is
    decomposed as ``eps = phi+ + sigma- + r``.  Exact case::

        B+- = Ric_g - H o H / 4 -+ d^*H / 2 + nabla^{+-} phi / 2

    (``sigma`` for ``B-``).  Transitive case, with ``Ric^{+-}`` the Ricci
    tensors of ``nabla^{+-}``::

        Ric+(Y-, Z+) = Ric^+(Y, Z) - (F o F)(Y, Z) + nabla^+_Y phi(Z) / 2
        Ric+(t-, Z+) = -c(d_A^*F(Z) - (F . H)(Z) + F(g^{-1} phi, Z) / 2, t)
        Ric-(Y+, Z-) = Ric^-(Y, Z) - (F o F)(Y, Z) + nabla^-_Y sigma(Z) / 2 + c(F(Y, Z), r)
        Ric-(Y+, t-) = -c(d_A^*F(Y) - (F . H)(Y) + F(g^{-1} sigma, Y) / 2 - [A(Y), r], t)
    """
    div = divergence_operator(E) if div is None else div
    n = E.n
    g = metric.g.g
    split = metric.split_frame()
    phi, sigma, r = offset_parts(metric, div.offset)
    if E.fiber is None:
        H = read_exact_data(split, n)
        return _closed_exact(E.base, metric.g, H, phi, sigma)
    if not metric.is_admissible():
        raise ValueError("generalized metric is not admissible")
    H, F, A = read_transitive_data(split, n, E.fiber)
    return _closed_transitive(E, g, H.full(), F, A, phi, sigma, r)


def _closed_exact(base: LieAlgebra, metric: FrameMetric, H: KForm, phi, sigma) -> RicciResult:
    g = metric.g
    Hf = H.full()
    ric = ricci_base(base, g)
    hh = h_circ_h(metric, H)
    dstar = hodge_codiff(base, metric, H).full()
    plus = ric - 0.25 * hh - 0.5 * dstar + 0.5 * hessian_like(base, g, phi, Hf, +1)
    minus = ric - 0.25 * hh + 0.5 * dstar + 0.5 * hessian_like(base, g, sigma, Hf, -1)
    return RicciResult(plus, minus, base.dim)


def _closed_transitive(E: CourantAlgebroid, g, H, F, A, phi, sigma, r) -> RicciResult:
    base = E.base
    n, d = base.dim, E.fiber_dim
    c = E.fiber.c
    kf = E.fiber.algebra.structure_constants
    gi = np.linalg.inv(g)
    ff = f_circ_f(g, F, c)
    dsF = gauge_codifferential(base, g, F, A, kf)
    fh = f_dot_h(g, F, H)
    ric_p = ricci_of_connection(base, bismut_christoffel(base, g, H, +1))
    ric_m = ricci_of_connection(base, bismut_christoffel(base, g, H, -1))
    plus = np.zeros((n + d, n))
    plus[:n] = ric_p - ff + 0.5 * hessian_like(base, g, phi, H, +1)
    row = dsF - fh + 0.5 * np.einsum("m,mzk->zk", gi @ phi, F)
    plus[n:] = -(row @ c).T
    minus = np.zeros((n, n + d))
    minus[:, :n] = ric_m - ff + 0.5 * hessian_like(base, g, sigma, H, -1)
    minus[:, :n] += np.einsum("yza,ab,b->yz", F, c, r)
    col = dsF - fh + 0.5 * np.einsum("m,myk->yk", gi @ sigma, F)
    col -= np.einsum("ye,f,efk->yk", A, r, kf)
    minus[:, n:] = -(col @ c)
    return RicciResult(plus, minus, n)
