"""Exact and transitive Courant algebroids on invariant frames.

Every algebroid is reduced to *frame data*: the pairing matrix ``P``, the
anchor matrix ``rho`` (base components of ``pi(E_a)`` in column ``a``) and the
structure constants ``K`` of the Dorfman bracket on constant sections,
``[E_a, E_b] = sum_c K[a, b, c] E_c``.  Downstream modules only use frame
data, so a change of isotropic splitting is a change of frame.

Frame ordering: ``(X_1..X_n, r_1..r_d, xi^1..xi^n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lie import DEFAULT_TOL, KForm, LieAlgebra, ce_d, wedge

EXACT = "exact"
TRANSITIVE = "transitive"


@dataclass(frozen=True)
class QuadraticFiber:
    """Fiber Lie algebra with an invariant symmetric pairing ``c``."""

    algebra: LieAlgebra
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        d = self.algebra.dim
        if c.shape != (d, d):
            raise ValueError(f"fiber pairing must be {d}x{d}, got {c.shape}")
        if np.max(np.abs(c - c.T), initial=0.0) > DEFAULT_TOL:
            raise ValueError("fiber pairing is not symmetric")
        if d and abs(np.linalg.det(c)) < 1e-14:
            raise ValueError("fiber pairing is degenerate")
        c = 0.5 * (c + c.T)
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.algebra.dim

    def invariance_residual(self) -> float:
        """Sup of ``c([r,s],t) + c(s,[r,t])`` over frame triples."""
        k = self.algebra.structure_constants
        # c([e_r,e_s], e_t) = k[r,s,m] c[m,t]
        lowered = np.einsum("rsm,mt->rst", k, self.c)
        res = lowered + lowered.transpose(0, 2, 1)
        return float(np.max(np.abs(res), initial=0.0))

    @classmethod
    def abelian(cls, c: np.ndarray) -> "QuadraticFiber":
        c = np.atleast_2d(np.asarray(c, dtype=float))
        return cls(LieAlgebra.abelian(c.shape[0]), c)

    @classmethod
    def su2(cls, scale: float = 1.0) -> "QuadraticFiber":
        """``[e1,e2] = e3`` and cyclic, with pairing ``scale * Id``."""
        alg = LieAlgebra.from_brackets(3, [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)], "su2")
        return cls(alg, scale * np.eye(3))


@dataclass(frozen=True)
class FrameData:
    """Pairing, anchor and bracket constants of an algebroid on a frame."""

    base: LieAlgebra
    pairing: np.ndarray
    anchor: np.ndarray
    bracket: np.ndarray
    pairing_inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = self.pairing.shape[0]
        if self.anchor.shape != (self.base.dim, r) or self.bracket.shape != (r, r, r):
            raise ValueError("inconsistent frame data shapes")
        object.__setattr__(self, "pairing_inverse", np.linalg.inv(self.pairing))

    @property
    def rank(self) -> int:
        return self.pairing.shape[0]

    def lowered_bracket(self) -> np.ndarray:
        """``<[E_a, E_b], E_c>``."""
        return np.einsum("abd,dc->abc", self.bracket, self.pairing)

    def bracket_of(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("a,b,abc->c", u, v, self.bracket)

    def pair(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.pairing @ v)

    def transform(self, M: np.ndarray) -> "FrameData":
        """Frame data in the frame ``E'_a = sum_x M[x, a] E_x``."""
        M = np.asarray(M, dtype=float)
        Minv = np.linalg.inv(M)
        P = M.T @ self.pairing @ M
        rho = self.anchor @ M
        K = np.einsum("xa,yb,xyz,cz->abc", M, M, self.bracket, Minv)
        return FrameData(self.base, P, rho, K)


@dataclass(frozen=True)
class CourantAlgebroid:
    """Exact or transitive Courant algebroid over an invariant base.

    ``F[i, j, a]`` is the fiber-valued curvature and ``A[i, a]`` the
    invariant gauge potential acting on fiber sections by ``d_X t = [A(X), t]``.
    """

    base: LieAlgebra
    H: KForm
    fiber: Optional[QuadraticFiber] = None
    F: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.base.dim
        if self.H.dim != n or self.H.degree != 3:
            raise ValueError("H must be a 3-form over the base frame")
        if self.fiber is not None:
            d = self.fiber.dim
            F = np.zeros((n, n, d)) if self.F is None else np.array(self.F, dtype=float)
            A = np.zeros((n, d)) if self.A is None else np.array(self.A, dtype=float)
            if F.shape != (n, n, d):
                raise ValueError(f"F must have shape {(n, n, d)}, got {F.shape}")
            if np.max(np.abs(F + F.transpose(1, 0, 2)), initial=0.0) > DEFAULT_TOL:
                raise ValueError("F is not antisymmetric in its form slots")
            if A.shape != (n, d):
                raise ValueError(f"A must have shape {(n, d)}, got {A.shape}")
            for arr in (F, A):
                arr.setflags(write=False)
            object.__setattr__(self, "F", F)
            object.__setattr__(self, "A", A)
        elif self.F is not None or self.A is not None:
            raise ValueError("F and A require a fiber")
        object.__setattr__(self, "_frame", _build_frame(self))

    # -- structure ---------------------------------------------------------

    @classmethod
    def exact(cls, base: LieAlgebra, H: Optional[KForm] = None) -> "CourantAlgebroid":
        return cls(base, H if H is not None else KForm.zero(base.dim, 3))

    @classmethod
    def transitive(cls, base: LieAlgebra, fiber: QuadraticFiber, F: Optional[np.ndarray] = None,
                   H: Optional[KForm] = None, A: Optional[np.ndarray] = None) -> "CourantAlgebroid":
        return cls(base, H if H is not None else KForm.zero(base.dim, 3), fiber, F, A)

    @property
    def variant(self) -> str:
        return EXACT if self.fiber is None else TRANSITIVE

    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def fiber_dim(self) -> int:
        return 0 if self.fiber is None else self.fiber.dim

    @property
    def rank(self) -> int:
        return 2 * self.n + self.fiber_dim

    @property
    def x_block(self) -> slice:
        return slice(0, self.n)

    @property
    def fiber_block(self) -> slice:
        return slice(self.n, self.n + self.fiber_dim)

    @property
    def xi_block(self) -> slice:
        return slice(self.n + self.fiber_dim, self.rank)

    @property
    def frame(self) -> FrameData:
        return self._frame  # type: ignore[attr-defined]

    def section(self, X=None, r=None, xi=None) -> np.ndarray:
        """Assemble a section coefficient vector from its blocks."""
        v = np.zeros(self.rank)
        if X is not None:
            v[self.x_block] = X
        if r is not None:
            if self.fiber is None:
                raise ValueError("exact algebroid has no fiber block")
            v[self.fiber_block] = r
        if xi is not None:
            v[self.xi_block] = xi
        return v

    def split(self, v: np.ndarray):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.rank,):
            raise ValueError(f"section of length {self.rank} expected, got {v.shape}")
        return v[self.x_block], v[self.fiber_block], v[self.xi_block]

    def with_H(self, H: KForm) -> "CourantAlgebroid":
        return CourantAlgebroid(self.base, H, self.fiber, self.F, self.A)


# ----------------------------------------------------------------------------
# Pairing and bracket


def pairing(E: CourantAlgebroid, e1: np.ndarray, e2: np.ndarray) -> float:
    """``<X + r + xi, Y + t + eta> = (eta(X) + xi(Y))/2 + c(r, t)``."""
    X, r, xi = E.split(e1)
    Y, t, eta = E.split(e2)
    value = 0.5 * (eta @ X + xi @ Y)
    if E.fiber is not None:
        value += r @ E.fiber.c @ t
    return float(value)


def dorfman_bracket(E: CourantAlgebroid, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    """Bracket of invariant sections.

    For invariant data Lie derivatives and exterior derivatives reduce to
    contractions with structure constants: ``L_X eta = iota_X d eta``.
    """
    X, r, xi = E.split(e1)
    Y, t, eta = E.split(e2)
    c = E.base.structure_constants
    h = E.H.full()
    vec = E.base.bracket(X, Y)
    # iota_X d eta (Z) = -eta([X, Z])
    form = -np.einsum("i,imk,k->m", X, c, eta) + np.einsum("i,imk,k->m", Y, c, xi)
    form += np.einsum("i,j,ijm->m", X, Y, h)
    out = E.section(X=vec, xi=form)
    if E.fiber is None:
        return out
    kf = E.fiber.algebra.structure_constants
    cf = E.fiber.c
    F, A = E.F, E.A
    fib = -np.einsum("a,b,abe->e", r, t, kf)
    fib -= np.einsum("i,j,ija->a", X, Y, F)
    # d_X t = [A(X), t]
    fib += np.einsum("i,ie,a,eab->b", X, A, t, kf)
    fib -= np.einsum("i,ie,a,eab->b", Y, A, r, kf)
    # 2c(d r, t)(Z) = 2c([A(Z), r], t)
    form = 2.0 * np.einsum("me,a,eab,bd,d->m", A, r, kf, cf, t)
    form += 2.0 * np.einsum("i,ima,ab,b->m", X, F, cf, t)
    form -= 2.0 * np.einsum("i,ima,ab,b->m", Y, F, cf, r)
    out[E.fiber_block] += fib
    out[E.xi_block] += form
    return out


def _build_frame(E: CourantAlgebroid) -> FrameData:
    n, rk = E.n, E.rank
    P = np.zeros((rk, rk))
    P[E.x_block, E.xi_block] = 0.5 * np.eye(n)
    P[E.xi_block, E.x_block] = 0.5 * np.eye(n)
    if E.fiber is not None:
        P[E.fiber_block, E.fiber_block] = E.fiber.c
    rho = np.zeros((n, rk))
    rho[:, E.x_block] = np.eye(n)
    basis = np.eye(rk)
    K = np.zeros((rk, rk, rk))
    for a in range(rk):
        for b in range(rk):
            K[a, b] = dorfman_bracket(E, basis[a], basis[b])
    return FrameData(E.base, P, rho, K)


# ----------------------------------------------------------------------------
# Axiom checks


def jacobi_defect(frame: FrameData) -> np.ndarray:
    """``[a,[b,c]] - [[a,b],c] - [b,[a,c]]`` on frame triples."""
    K = frame.bracket
    left = np.einsum("bcm,amz->abcz", K, K)
    mid = np.einsum("abm,mcz->abcz", K, K)
    right = np.einsum("acm,bmz->abcz", K, K)
    return left - mid - right


def axioms_residual(E_or_frame) -> dict[str, float]:
    """Residuals of (C1)-(C5) on invariant frame sections."""
    frame = E_or_frame.frame if isinstance(E_or_frame, CourantAlgebroid) else E_or_frame
    K, rho = frame.bracket, frame.anchor
    cbase = frame.base.structure_constants
    sup = lambda arr: float(np.max(np.abs(arr), initial=0.0))  # noqa: E731
    c1 = sup(jacobi_defect(frame))
    # anchor of the bracket vs bracket of anchors
    lhs = np.einsum("ic,abc->abi", rho, K)
    rhs = np.einsum("ma,nb,mni->abi", rho, rho, cbase)
    c2 = sup(lhs - rhs)
    if isinstance(E_or_frame, CourantAlgebroid):
        c3 = leibniz_residual(E_or_frame)
    else:
        c3 = coisotropy_residual(frame)
    Kl = frame.lowered_bracket()
    c4 = sup(Kl + Kl.transpose(0, 2, 1))
    # constant sections have constant pairings, so 2[e,e] = 0
    c5 = sup(K + K.transpose(1, 0, 2))
    return {"C1": c1, "C2": c2, "C3": c3, "C4": c4, "C5": c5}


def coisotropy_residual(frame: FrameData) -> float:
    """Sup-norm of ``rho P^{-1} rho^T``: the anchor kills ``(pi^* T^*)^sharp``."""
    m = frame.anchor @ frame.pairing_inverse @ frame.anchor.T
    return float(np.max(np.abs(m), initial=0.0))


def _jet_terms(E: CourantAlgebroid, e1: np.ndarray, e2: np.ndarray, df: np.ndarray):
    """Derivative terms of the explicit bracket at a zero of ``f``.

    Returns ``([f e1, e2], [e1, f e2])`` evaluated from the bracket formula
    term by term (Lie derivatives, ``d`` of ``f xi``, ``d_Y(f r)``).
    """
    X, r, xi = E.split(e1)
    Y, t, eta = E.split(e2)
    cr_t = 0.0 if E.fiber is None else float(r @ E.fiber.c @ t)
    left = -(df @ Y) * e1
    left = left + E.section(xi=(eta @ X + xi @ Y + 2.0 * cr_t) * df)
    right = (df @ X) * e2
    return left, right


def leibniz_residual(E: CourantAlgebroid) -> float:
    """(C3) on 1-jets against the anchor/pairing prediction.

    The axioms force ``[e1, f e2] = pi(e1)(f) e2 + f[e1, e2]`` and, through
    polarized (C5), ``[f e1, e2] = -pi(e2)(f) e1 + <e1, e2> (pi^* df)^sharp
    + f[e1, e2]``.  At a zero of ``f`` only the derivative terms survive.
    """
    frame = E.frame
    P, rho, Pinv = frame.pairing, frame.anchor, frame.pairing_inverse
    r = frame.rank
    eye = np.eye(r)
    worst = coisotropy_residual(frame)
    for k in range(E.n):
        df = np.zeros(E.n)
        df[k] = 1.0
        sharp = Pinv @ (rho.T @ df)
        for a in range(r):
            for b in range(r):
                left, right = _jet_terms(E, eye[a], eye[b], df)
                want_right = (df @ rho[:, a]) * eye[b]
                want_left = -(df @ rho[:, b]) * eye[a] + P[a, b] * sharp
                worst = max(worst, float(np.max(np.abs(left - want_left))),
                            float(np.max(np.abs(right - want_right))))
    return worst


def c_wedge(E: CourantAlgebroid) -> KForm:
    """The 4-form ``c(F ^ F)``."""
    n = E.n
    if n < 4:
        raise ValueError("c(F ^ F) needs base dimension at least 4")
    if E.fiber is None:
        return KForm.zero(n, 4)
    F = E.F
    out = KForm.zero(n, 4)
    forms = [KForm.from_full(F[:, :, a]) for a in range(E.fiber_dim)]
    for a in range(E.fiber_dim):
        for b in range(E.fiber_dim):
            if E.fiber.c[a, b] != 0.0:
                out = out + wedge(forms[a], forms[b]) * E.fiber.c[a, b]
    return out


def bianchi_transitive_residual(E: CourantAlgebroid) -> float:
    """Sup-norm of ``dH - c(F ^ F)``."""
    if E.fiber is None:
        raise ValueError("Bianchi identity with curvature applies to transitive algebroids")
    if E.n < 4:
        return 0.0
    return (ce_d(E.base, E.H) - c_wedge(E)).norm_sup()


def closedness_residual(E: CourantAlgebroid) -> float:
    """Sup-norm of ``dH`` (exact variant validity)."""
    if E.n < 4:
        return 0.0
    return ce_d(E.base, E.H).norm_sup()


def read_exact_data(frame: FrameData, n: int) -> KForm:
    """Recover ``H`` from the bracket constants of an exact frame."""
    Kl = frame.lowered_bracket()
    return KForm.from_full(2.0 * Kl[:n, :n, :n])


def read_transitive_data(frame: FrameData, n: int, fiber: QuadraticFiber):
    """Recover ``(H, F, A)`` from bracket constants in a standard frame."""
    d = fiber.dim
    Kl = frame.lowered_bracket()
    H = KForm.from_full(2.0 * Kl[:n, :n, :n])
    F = -frame.bracket[:n, :n, n:n + d]
    # [X_i, t_a] fiber part = A[i, e] kf[e, a, b]
    kf = fiber.algebra.structure_constants
    A = np.zeros((n, d))
    if d and np.any(kf):
        M = kf.reshape(d, d * d).T  # (a b) x e
        for i in range(n):
            target = frame.bracket[i, n:n + d, n:n + d].reshape(d * d)
            A[i] = np.linalg.lstsq(M, target, rcond=None)[0]
    return H, F, A
