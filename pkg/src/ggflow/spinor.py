"""Clifford modules, spin lifts, Killing spinors and Strominger residuals.

Conventions: ``gamma(v)^2 = <v, v>`` (no minus sign).  A pairing-skew
endomorphism ``A`` with lowered coefficients ``A_low[a, b] = <A e_a, e_b>``
lifts to ``rho(A) = 1/4 sum A_low[a, b] gamma(e~_b) gamma(e~_a)`` with
``e~`` the dual basis, so that ``[rho(A), gamma(v)] = gamma(A v)``.

Invariant spinors are constant module vectors; on them a connection acts by
the lift of its coefficient endomorphisms.  The Dirac operator of a
generalized connection on the exterior module of ``E`` is
``1/2 sum_a gamma(E~_a) rho(D_{E_a})``; for ``V+`` spinors the unhalved
sum over ``V+`` is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .courant import CourantAlgebroid
from .gconn import (
    DivergenceOperator,
    GenConnection,
    GeneralizedMetric,
    divergence_operator,
    levi_civita,
    levi_civita_christoffel,
)
from .lie import (
    FrameMetric,
    KForm,
    LieAlgebra,
    ce_d,
    ce_matrix,
    exterior_algebra,
    hodge_codiff,
    wedge,
    wedge_matrix,
)
from .ricci import curvature

MAX_CLIFFORD_DIM = 8

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


# ----------------------------------------------------------------------------
# Clifford modules


def _euclidean_gammas(n: int) -> list[np.ndarray]:
    if n == 1:
        return [np.ones((1, 1), dtype=complex)]
    if n % 2:
        even = _euclidean_gammas(n - 1)
        m = (n - 1) // 2
        chir = (1j ** m) * np.linalg.multi_dot(even) if len(even) > 1 else even[0]
        return even + [chir]
    if n == 2:
        return [_PAULI[0], _PAULI[1]]
    prev = _euclidean_gammas(n - 2)
    one = np.eye(prev[0].shape[0], dtype=complex)
    return ([np.kron(g, _PAULI[2]) for g in prev]
            + [np.kron(one, _PAULI[0]), np.kron(one, _PAULI[1])])


@dataclass(frozen=True)
class CliffordModule:
    """Gamma matrices for an orthonormal basis with ``gamma_a^2 = signature[a]``."""

    n: int
    signature: tuple[int, ...]
    gammas: np.ndarray

    @property
    def rank(self) -> int:
        return self.gammas.shape[1]

    def relation_residual(self) -> float:
        eta = np.diag(self.signature)
        eye = np.eye(self.rank)
        worst = 0.0
        for a in range(self.n):
            for b in range(self.n):
                anti = self.gammas[a] @ self.gammas[b] + self.gammas[b] @ self.gammas[a]
                worst = max(worst, float(np.max(np.abs(anti - 2.0 * eta[a, b] * eye))))
        return worst


@lru_cache(maxsize=None)
def _clifford_cached(n: int, signature: tuple[int, ...]) -> CliffordModule:
    base = _euclidean_gammas(n)
    gam = np.array([g if s > 0 else 1j * g for g, s in zip(base, signature)])
    gam.setflags(write=False)
    return CliffordModule(n, signature, gam)


def build_clifford(n: int, signature: Optional[Sequence[int]] = None) -> CliffordModule:
    if not 1 <= n <= MAX_CLIFFORD_DIM:
        raise ValueError(f"unsupported Clifford dimension {n} (1..{MAX_CLIFFORD_DIM})")
    sig = tuple(1 for _ in range(n)) if signature is None else tuple(int(s) for s in signature)
    if len(sig) != n or any(s not in (1, -1) for s in sig):
        raise ValueError("signature must be a sequence of +-1 of length n")
    return _clifford_cached(n, sig)


@dataclass(frozen=True)
class FrameClifford:
    """Gamma matrices for an arbitrary basis with Gram matrix ``gram``."""

    gram: np.ndarray
    gammas: np.ndarray
    dual_gammas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        inv = np.linalg.inv(self.gram)
        object.__setattr__(self, "dual_gammas", np.einsum("ab,bij->aij", inv, self.gammas))

    @property
    def rank(self) -> int:
        return self.gammas.shape[1]

    def act(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("a,aij->ij", v, self.gammas)

    def lift(self, A_low: np.ndarray) -> np.ndarray:
        return 0.25 * np.einsum("ab,bij,ajk->ik", A_low, self.dual_gammas, self.dual_gammas)

    def relation_residual(self) -> float:
        G = self.gammas
        anti = np.einsum("aij,bjk->abik", G, G) + np.einsum("bij,ajk->abik", G, G)
        target = 2.0 * np.einsum("ab,ik->abik", self.gram, np.eye(self.rank))
        return float(np.max(np.abs(anti - target)))


def clifford_for_gram(gram: np.ndarray) -> FrameClifford:
    """Module for a basis of a quadratic space with Gram matrix ``gram``.

    Definite Grams use the Cholesky factor, which depends continuously on
    ``gram`` and is the identity on orthonormal bases.
    """
    gram = 0.5 * (np.asarray(gram, dtype=float) + np.asarray(gram, dtype=float).T)
    lam = np.linalg.eigvalsh(gram)
    if np.min(np.abs(lam)) < 1e-12:
        raise ValueError("Gram matrix is degenerate")
    n = gram.shape[0]
    if lam.min() > 0 or lam.max() < 0:
        sign = 1 if lam.min() > 0 else -1
        C = np.linalg.cholesky(sign * gram)
        module = build_clifford(n, [sign] * n)
    else:
        lam, V = np.linalg.eigh(gram)
        order = np.argsort(-lam)
        lam, V = lam[order], V[:, order]
        module = build_clifford(n, np.sign(lam).astype(int))
        C = V * np.sqrt(np.abs(lam))
    return FrameClifford(gram, np.einsum("ak,kij->aij", C, module.gammas))


def orthonormal_frame(gram: np.ndarray) -> np.ndarray:
    """Columns ``T`` with ``T^T gram T = diag(+-1)``."""
    lam, V = np.linalg.eigh(0.5 * (gram + gram.T))
    order = np.argsort(-lam)
    return V[:, order] / np.sqrt(np.abs(lam[order]))


# ----------------------------------------------------------------------------
# Classical spin connections


def _christoffels(algebra: LieAlgebra, g: np.ndarray, H: Optional[KForm]) -> dict[str, np.ndarray]:
    lc = levi_civita_christoffel(algebra, g)
    Hf = np.zeros((algebra.dim,) * 3) if H is None else H.full()
    gi = np.linalg.inv(g)
    tors = Hf @ gi
    return {
        "levi-civita": lc,
        "plus": lc + 0.5 * tors,
        "minus": lc - 0.5 * tors,
        "plus13": lc + tors / 6.0,
        "minus13": lc - tors / 6.0,
    }


@dataclass(frozen=True)
class SpinConnections:
    """Per-direction spinor endomorphisms on a ``g``-orthonormal frame ``u``."""

    frame: np.ndarray
    clifford: FrameClifford
    lifts: dict[str, np.ndarray]
    omega: dict[str, np.ndarray]

    def dirac(self, name: str) -> np.ndarray:
        return np.einsum("aij,ajk->ik", self.clifford.gammas, self.lifts[name])

    def clifford_form(self, phi: np.ndarray) -> np.ndarray:
        """``phi . `` for a 1-form given on the original frame."""
        return self.clifford.act(self.frame.T @ phi)


def spin_connections(algebra: LieAlgebra, g: np.ndarray, H: Optional[KForm] = None) -> SpinConnections:
    g = np.asarray(g, dtype=float)
    if np.linalg.eigvalsh(g).min() <= 0:
        raise ValueError("spin connections need a Riemannian metric")
    T = orthonormal_frame(g)
    cl = clifford_for_gram(np.eye(algebra.dim))
    lifts, omega = {}, {}
    for name, Gam in _christoffels(algebra, g, H).items():
        w = np.einsum("ai,bj,abc,cd,dl->ijl", T, T, Gam, g, T)
        omega[name] = w
        lifts[name] = np.array([cl.lift(w[i]) for i in range(algebra.dim)])
    return SpinConnections(T, cl, lifts, omega)


def _require_spinor(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=complex)
    if not np.any(np.abs(eta) > 0):
        raise ValueError("spinor must be nonzero")
    return eta


# constant in front of phi in the dilatino equation on the classical side
DILATINO_COEFF = -0.25


def killing_residuals(algebra: LieAlgebra, g: np.ndarray, H: Optional[KForm], phi,
                      eta) -> tuple[np.ndarray, float]:
    """``(|nabla+_{u_i} eta| per direction, |Dirac^{1/3} eta + c phi . eta|)``."""
    eta = _require_spinor(eta)
    sc = spin_connections(algebra, g, H)
    phi = np.zeros(algebra.dim) if phi is None else np.asarray(phi, dtype=float)
    first = np.linalg.norm(np.einsum("aij,j->ai", sc.lifts["plus"], eta), axis=1)
    op = sc.dirac("plus13") + DILATINO_COEFF * sc.clifford_form(phi)
    return first, float(np.linalg.norm(op @ eta))


def parallel_spinor_space(algebra: LieAlgebra, g: np.ndarray, H: Optional[KForm] = None,
                          tol: float = 1e-10) -> tuple[int, np.ndarray]:
    sc = spin_connections(algebra, g, H)
    stack = sc.lifts["plus"].reshape(-1, sc.clifford.rank)
    _, s, vh = np.linalg.svd(stack)
    s = np.concatenate([s, np.zeros(vh.shape[0] - len(s))])
    basis = vh[s <= tol].conj().T
    return basis.shape[1], basis


# ----------------------------------------------------------------------------
# Generalized Killing spinors


def _killing_from_frames(E: CourantAlgebroid, D: GenConnection, plus: np.ndarray,
                         minus: np.ndarray, eta) -> tuple[np.ndarray, float]:
    frame = E.frame
    Gp = plus.T @ frame.pairing @ plus
    cl = clifford_for_gram(Gp)
    Gm = D.in_frame(np.hstack([plus, minus]))
    rp = plus.shape[1]
    eta = _require_spinor(eta)
    first = np.array([np.linalg.norm(cl.lift(Gm[rp + i, :rp, :rp]) @ eta)
                      for i in range(minus.shape[1])])
    dirac = sum(cl.dual_gammas[a] @ cl.lift(Gm[a, :rp, :rp]) for a in range(rp))
    return first, float(np.linalg.norm(dirac @ eta))


def generalized_killing_residuals(E: CourantAlgebroid, metric: GeneralizedMetric,
                                  div: Optional[DivergenceOperator], eta,
                                  plus_frame: Optional[np.ndarray] = None,
                                  minus_frame: Optional[np.ndarray] = None):
    """``(|D_{e-_i} eta| per ``minus_frame`` column, |Dirac+ eta|)`` on ``Cl(V+)``."""
    D = levi_civita(E, metric, div)
    plus = metric.plus_basis if plus_frame is None else plus_frame
    minus = metric.minus_basis if minus_frame is None else minus_frame
    return _killing_from_frames(E, D, plus, minus, eta)


def killing_transport_residual(data, dual, seed: int = 0) -> float:
    """Compare Killing residuals of a dual pair on ``psi``-corresponding frames."""
    from .tduality import duality_map

    rng = np.random.default_rng(seed)
    E, Eh = data.algebroid(), dual.algebroid()
    m, mh = data.metric(), dual.metric()
    Psi = duality_map(data.dim, data.fiber)
    plus = m.plus_basis @ orthonormal_frame(m.plus_basis.T @ E.frame.pairing @ m.plus_basis)
    minus = m.minus_basis
    rank = clifford_for_gram(plus.T @ E.frame.pairing @ plus).rank
    worst = 0.0
    for _ in range(3):
        eta = rng.normal(size=rank) + 1j * rng.normal(size=rank)
        r1 = generalized_killing_residuals(E, m, divergence_operator(E, data.offset()), eta,
                                           plus, minus)
        r2 = generalized_killing_residuals(Eh, mh, divergence_operator(Eh, dual.offset()), eta,
                                           Psi @ plus, Psi @ minus)
        worst = max(worst, float(np.max(np.abs(r1[0] - r2[0]))), abs(r1[1] - r2[1]))
    return worst


# ----------------------------------------------------------------------------
# Spinorial Ricci identity


def clifford_ricci_identity_residual(E: CourantAlgebroid, metric: GeneralizedMetric,
                                     D: GenConnection, e_minus: int, alpha) -> float:
    """``|1/2 sum_i e~_i+ . R+(e_i+, e-) . alpha - 1/4 (iota_{e-} Ric+) . alpha|``.

    ``e_minus`` indexes the adapted ``V-`` basis; ``R+(x, y)`` acts through
    the spin lift of its curvature endomorphism.
    """
    alpha = np.asarray(alpha, dtype=complex)
    curv = curvature(E, metric, D)
    frame = metric.adapted_frame()
    rp = metric.r_plus
    cl = clifford_for_gram(frame.pairing[:rp, :rp])
    lhs = 0.5 * sum(cl.dual_gammas[i] @ cl.lift(curv.plus[i, e_minus]) for i in range(rp))
    ric = np.einsum("il,ijkl->jk", np.linalg.inv(frame.pairing[:rp, :rp]), curv.plus)
    rhs = 0.25 * np.einsum("k,kij->ij", ric[e_minus], cl.dual_gammas)
    return float(np.linalg.norm((lhs - rhs) @ alpha))


# ----------------------------------------------------------------------------
# Exterior module and generating operators


@dataclass(frozen=True)
class ExteriorModule:
    """``Lambda g*`` with ``(X + xi) . alpha = iota_X alpha + xi ^ alpha``."""

    n: int

    @property
    def size(self) -> int:
        return 2 ** self.n

    def gammas(self) -> np.ndarray:
        ext = exterior_algebra(self.n)
        return np.concatenate([ext.interior_ops, ext.wedge_ops]).astype(float)

    def act(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("a,aij->ij", v, self.gammas())

    def relation_residual(self, pairing: np.ndarray) -> float:
        G = self.gammas()
        anti = np.einsum("aij,bjk->abik", G, G) + np.einsum("bij,ajk->abik", G, G)
        return float(np.max(np.abs(anti - 2.0 * np.einsum("ab,ik->abik", pairing, np.eye(self.size)))))


def _frame_clifford_exterior(E: CourantAlgebroid) -> tuple[ExteriorModule, np.ndarray, np.ndarray]:
    mod = ExteriorModule(E.n)
    G = mod.gammas()
    dual = np.einsum("ab,bij->aij", E.frame.pairing_inverse, G)
    return mod, G, dual


def _graded_commutator(A: np.ndarray, B: np.ndarray, both_odd: bool) -> np.ndarray:
    return A @ B + B @ A if both_odd else A @ B - B @ A


def dirac_of_connection(E: CourantAlgebroid, D: GenConnection) -> np.ndarray:
    """``1/2 sum_a gamma(E~_a) rho(D_{E_a})`` on invariant forms."""
    _, _, dual = _frame_clifford_exterior(E)
    lift = lambda A: 0.25 * np.einsum("ab,bij,ajk->ik", A, dual, dual)  # noqa: E731
    return 0.5 * sum(dual[a] @ lift(D.coeffs[a]) for a in range(E.rank))


def torsion_from_dirac(E: CourantAlgebroid, dirac: np.ndarray) -> np.ndarray:
    """``T[a, b, c]`` read from ``[[Dirac, E_a .], E_b .] - [E_a, E_b] .``.

    The result is the Clifford image of ``iota_{E_b} iota_{E_a} T``; its
    coefficients are recovered by pairing with the module trace.
    """
    _, G, dual = _frame_clifford_exterior(E)
    r = E.rank
    K = E.frame.bracket
    size = G.shape[1]
    # tr(gamma(u) gamma(E~_c)) = size * <u, E~_c> picks the E_c coefficient of u
    out = np.zeros((r, r, r))
    for a in range(r):
        inner = _graded_commutator(dirac, G[a], True)
        for b in range(r):
            op = inner @ G[b] - G[b] @ inner - np.einsum("c,cij->ij", K[a, b], G)
            coeff = np.einsum("cij,ji->c", dual, op).real / size
            out[a, b] = coeff @ E.frame.pairing
    return out


@dataclass(frozen=True)
class GeneratingOperatorReport:
    operator: np.ndarray
    anchor_residual: float
    bracket_residual: float
    square_residual: float
    square_scalar: float


def generating_operator_exact(E: CourantAlgebroid) -> GeneratingOperatorReport:
    """``d - H ^`` on invariant forms and its defining properties.

    Property (i) involves only invariant functions (constants), for which
    ``[Dirac, f] = 0`` and ``pi(e) f = 0``; its residual is computed anyway.
    """
    if E.fiber is not None:
        raise ValueError("the exterior generating operator is defined on exact algebroids")
    n = E.n
    d = ce_matrix(E.base).astype(float)
    op = d - wedge_matrix(E.H)
    _, G, _ = _frame_clifford_exterior(E)
    size = op.shape[0]
    f = 1.7 * np.eye(size)
    first = _graded_commutator(op, f, False)
    anchor_res = max(float(np.max(np.abs(_graded_commutator(first, G[a], False))))
                     for a in range(2 * n))
    K = E.frame.bracket
    worst = 0.0
    for a in range(2 * n):
        inner = _graded_commutator(op, G[a], True)
        for b in range(2 * n):
            lhs = inner @ G[b] - G[b] @ inner
            worst = max(worst, float(np.max(np.abs(lhs - np.einsum("c,cij->ij", K[a, b], G)))))
    sq = op @ op
    scalar = float(np.trace(sq) / size)
    return GeneratingOperatorReport(op, anchor_res, worst,
                                    float(np.max(np.abs(sq - scalar * np.eye(size)))), scalar)


def dirac_variation_residual(E: CourantAlgebroid, D: GenConnection, e: np.ndarray) -> float:
    """``|Dirac(D + chi^e) - Dirac(D) + (r_E - 1)/4 e .|`` for a Weyl term ``chi^e``."""
    from .gconn import weyl_term

    chi = weyl_term(E.frame.pairing, E.frame.pairing @ e)
    _, G, _ = _frame_clifford_exterior(E)
    diff = dirac_of_connection(E, D + chi) - dirac_of_connection(E, D)
    target = DIRAC_VARIATION_SIGN * (E.rank - 1) / 4.0 * np.einsum("a,aij->ij", e, G)
    return float(np.max(np.abs(diff - target)))


# sign of the Weyl shift of the Dirac operator for chi^e as in gconn.weyl_term
DIRAC_VARIATION_SIGN = -1.0


# ----------------------------------------------------------------------------
# SU(3) structures and the Strominger system


def _form_from_matrix_action(n: int, form: KForm, M: np.ndarray) -> KForm:
    """Pull-back ``form(M., M., ...)`` of a k-form by a frame endomorphism."""
    full = form.full()
    k = form.degree
    for axis in range(k):
        full = np.moveaxis(np.tensordot(M.T, full, axes=([1], [axis])), 0, axis)
    return KForm.from_full(full)


@dataclass(frozen=True)
class SU3Structure:
    J: np.ndarray
    omega_re: KForm
    omega_im: KForm
    g: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if J.shape != (6, 6):
            raise ValueError("an SU(3) structure lives on a 6-dimensional algebra")
        if np.max(np.abs(J @ J + np.eye(6))) > 1e-10:
            raise ValueError("J does not square to -1")
        if np.max(np.abs(J.T @ g @ J - g)) > 1e-10:
            raise ValueError("J is not compatible with g")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "g", g)

    @classmethod
    def standard(cls) -> "SU3Structure":
        """``J e1 = e2, J e3 = e4, J e5 = e6`` and ``Omega = (e1+ie2)(e3+ie4)(e5+ie6)``."""
        J = np.zeros((6, 6))
        for i in range(3):
            J[2 * i + 1, 2 * i] = 1.0
            J[2 * i, 2 * i + 1] = -1.0
        z = [np.array([1.0, 1j]) for _ in range(3)]
        full = np.zeros((6, 6, 6), dtype=complex)
        import itertools

        for (a, b, c) in itertools.product(range(2), repeat=3):
            coeff = z[0][a] * z[1][b] * z[2][c]
            idx = (a, 2 + b, 4 + c)
            for perm in itertools.permutations(range(3)):
                sign = np.linalg.det(np.eye(3)[list(perm)])
                full[tuple(idx[p] for p in perm)] += sign * coeff
        return cls(J, KForm.from_full(full.real), KForm.from_full(full.imag))

    @property
    def omega(self) -> KForm:
        """``omega(X, Y) = g(J X, Y)``."""
        return KForm.from_full(self.J.T @ self.g)

    def normalization(self) -> float:
        """Ratio ``(3i/4) Omega ^ Omega-bar / omega^3`` (equal to 1 for the standard structure)."""
        top = wedge(self.omega_re, self.omega_im).coeffs[0] * 1.5
        w = self.omega
        cube = wedge(wedge(w, w), w).coeffs[0]
        return float(top / cube)

    def invariant_residuals(self) -> dict[str, float]:
        w = self.omega
        return {
            "J_square": float(np.max(np.abs(self.J @ self.J + np.eye(6)))),
            "omega_skew": float(np.max(np.abs(w.full() + w.full().T))),
            "omega_wedge_Omega": float(max(np.max(np.abs(wedge(w, self.omega_re).coeffs)),
                                           np.max(np.abs(wedge(w, self.omega_im).coeffs)))),
        }


def dc_form(algebra: LieAlgebra, su3: SU3Structure, form: KForm) -> KForm:
    """``d^c alpha (X, Y, ...) = -d alpha (J X, J Y, ...)``."""
    return -1.0 * _form_from_matrix_action(algebra.dim, ce_d(algebra, form), su3.J)


@dataclass(frozen=True)
class StromingerReport:
    holomorphic: float
    instanton: float
    conformally_balanced: float
    anomaly: float
    H: KForm

    def as_dict(self) -> dict[str, float]:
        return {"dOmega": self.holomorphic, "F_wedge_omega2": self.instanton,
                "dstar_omega_minus_dc_log_norm": self.conformally_balanced,
                "ddc_omega_minus_cFF": self.anomaly}


def strominger_residuals(algebra: LieAlgebra, su3: SU3Structure, F: Optional[np.ndarray] = None,
                         c: Optional[np.ndarray] = None) -> StromingerReport:
    """Sup-norms of the four Strominger equations for invariant data.

    ``F[i, j, a]`` is fiber-valued with pairing ``c``; the norm of ``Omega``
    is constant for invariant data so its ``d^c log`` term vanishes.
    """
    if algebra.dim != 6:
        raise ValueError("the Strominger system needs a 6-dimensional algebra")
    n = 6
    F = np.zeros((n, n, 1)) if F is None else np.asarray(F, dtype=float)
    if F.ndim == 2:
        F = F[:, :, None]
    c = np.eye(F.shape[2]) if c is None else np.atleast_2d(np.asarray(c, dtype=float))
    omega = su3.omega
    dO = max(float(np.max(np.abs(ce_d(algebra, su3.omega_re).coeffs))),
             float(np.max(np.abs(ce_d(algebra, su3.omega_im).coeffs))))
    w2 = wedge(omega, omega)
    Fforms = [KForm.from_full(F[:, :, a]) for a in range(F.shape[2])]
    inst = max(float(np.max(np.abs(wedge(f, w2).coeffs))) for f in Fforms)
    bal = float(np.max(np.abs(hodge_codiff(algebra, FrameMetric(su3.g), omega).coeffs), initial=0.0))
    H = dc_form(algebra, su3, omega)
    ddc = ce_d(algebra, H)
    cff = KForm.zero(n, 4)
    for a, fa in enumerate(Fforms):
        for b, fb in enumerate(Fforms):
            cff = cff + c[a, b] * wedge(fa, fb)
    anomaly = float(np.max(np.abs((ddc - cff).coeffs)))
    return StromingerReport(dO, inst, bal, anomaly, H)


__all__ = [
    "CliffordModule", "ExteriorModule", "FrameClifford", "GeneratingOperatorReport",
    "SU3Structure", "SpinConnections", "StromingerReport", "build_clifford",
    "clifford_for_gram", "clifford_ricci_identity_residual", "dc_form", "dirac_of_connection",
    "dirac_variation_residual", "generalized_killing_residuals", "generating_operator_exact",
    "killing_residuals", "killing_transport_residual", "orthonormal_frame",
    "parallel_spinor_space", "torsion_from_dirac", "spin_connections", "strominger_residuals",
]
