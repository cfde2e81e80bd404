"""Generalized metrics and generalized connections on invariant frames.

A generalized connection is stored by its coefficients
``Gamma[a, b, c] = <D_{E_a} E_b, E_c>`` on a constant frame.  Derivative
terms vanish on constant sections, so frame changes act tensorially and
torsion, divergence and curvature are contractions of ``Gamma`` with the
bracket constants.

The Levi-Civita construction works in the *adapted frame* (a basis of
``V+`` followed by a basis of ``V-``):

1. mixed blocks are forced, ``D_{e-} e+ = [e-, e+]+`` and
   ``D_{e+} e- = [e+, e-]-``;
2. pure blocks start from a seed (the lifted Levi-Civita connection of
   ``g`` together with the gauge derivative on fiber directions);
3. the remaining torsion is pure type and is removed by ``D - T/3``;
4. pure Weyl terms on ``V+`` and ``V-`` adjust the divergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .courant import CourantAlgebroid, FrameData
from .lie import DEFAULT_TOL, FrameMetric, LieAlgebra


def levi_civita_lowered(algebra: LieAlgebra, g: np.ndarray) -> np.ndarray:
    """Koszul formula ``L[i, j, k] = g(nabla_{e_i} e_j, e_k)`` for invariant g."""
    c = algebra.structure_constants
    cl = np.einsum("ijm,mk->ijk", c, g)  # g([e_i, e_j], e_k)
    return 0.5 * (cl - np.einsum("jki->ijk", cl) + np.einsum("kij->ijk", cl))


def levi_civita_christoffel(algebra: LieAlgebra, g: np.ndarray) -> np.ndarray:
    """``nabla_{e_i} e_j = sum_k Gamma[i, j, k] e_k``."""
    return levi_civita_lowered(algebra, g) @ np.linalg.inv(g)


# ----------------------------------------------------------------------------
# Generalized metrics


@dataclass(frozen=True)
class GeneralizedMetric:
    """Generalized metric ``V+`` built from ``(g, b)`` and a fiber shift ``a``.

    ``V+ = e^{(b,a)} {X + g X}`` and ``V- = e^{(b,a)} {X - g X + r}`` where
    ``e^{(b,a)}`` is the orthogonal change of splitting
    ``X + r + xi -> X + (r + a(X)) + (xi + iota_X b - c(a X, a .) - 2 c(a ., r))``.
    """

    E: CourantAlgebroid
    g: FrameMetric
    b: np.ndarray
    a: Optional[np.ndarray] = None
    splitting: np.ndarray = field(init=False, repr=False, compare=False)
    plus_basis: np.ndarray = field(init=False, repr=False, compare=False)
    minus_basis: np.ndarray = field(init=False, repr=False, compare=False)
    G: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        E, n = self.E, self.E.n
        if not isinstance(self.g, FrameMetric):
            object.__setattr__(self, "g", FrameMetric(np.asarray(self.g, dtype=float)))
        if self.g.dim != n:
            raise ValueError(f"metric dimension {self.g.dim} does not match base dimension {n}")
        b = np.zeros((n, n)) if self.b is None else np.asarray(self.b, dtype=float)
        if b.shape != (n, n) or np.max(np.abs(b + b.T), initial=0.0) > DEFAULT_TOL:
            raise ValueError("b must be a skew n x n matrix")
        d = E.fiber_dim
        a = np.zeros((n, d)) if self.a is None else np.asarray(self.a, dtype=float)
        if a.shape != (n, d):
            raise ValueError(f"fiber shift must have shape {(n, d)}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)
        M = splitting_change(E, b, a)
        g = self.g.g
        plus = np.zeros((E.rank, n))
        plus[E.x_block] = np.eye(n)
        plus[E.xi_block] = g
        minus = np.zeros((E.rank, n + d))
        minus[E.x_block, :n] = np.eye(n)
        minus[E.xi_block, :n] = -g
        if d:
            minus[E.fiber_block, n:] = np.eye(d)
        plus = M @ plus
        minus = M @ minus
        full = np.hstack([plus, minus])
        signs = np.diag(np.concatenate([np.ones(n), -np.ones(n + d)]))
        G = full @ signs @ np.linalg.inv(full)
        for arr in (M, plus, minus, G):
            arr.setflags(write=False)
        object.__setattr__(self, "splitting", M)
        object.__setattr__(self, "plus_basis", plus)
        object.__setattr__(self, "minus_basis", minus)
        object.__setattr__(self, "G", G)

    @property
    def r_plus(self) -> int:
        return self.plus_basis.shape[1]

    @property
    def r_minus(self) -> int:
        return self.minus_basis.shape[1]

    @property
    def adapted_basis(self) -> np.ndarray:
        return np.hstack([self.plus_basis, self.minus_basis])

    @property
    def projector_plus(self) -> np.ndarray:
        return 0.5 * (np.eye(self.E.rank) + self.G)

    @property
    def projector_minus(self) -> np.ndarray:
        return 0.5 * (np.eye(self.E.rank) - self.G)

    def adapted_frame(self) -> FrameData:
        return self.E.frame.transform(self.adapted_basis)

    def split_frame(self) -> FrameData:
        """Frame data in the adapted splitting ``e^{(b,a)}`` (b, a absorbed)."""
        return self.E.frame.transform(self.splitting)

    def is_admissible(self, tol: float = 1e-10) -> bool:
        # V- must meet T^* trivially and V+ has rank n
        minus_vec = self.minus_basis[np.r_[self.E.x_block, self.E.fiber_block]]
        return bool(np.linalg.matrix_rank(minus_vec, tol) == self.r_minus)

    def defects(self) -> dict[str, float]:
        """``G^2 - Id`` and pairing-symmetry defect of ``G``."""
        P = self.E.frame.pairing
        G = self.G
        sup = lambda m: float(np.max(np.abs(m), initial=0.0))  # noqa: E731
        return {"involution": sup(G @ G - np.eye(self.E.rank)),
                "symmetry": sup(P @ G - (P @ G).T)}


def splitting_change(E: CourantAlgebroid, b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Matrix of ``e^{(b,a)}`` on the standard frame (columns are images)."""
    d = E.fiber_dim
    M = np.eye(E.rank)
    # column i holds iota_{X_i} b = b[i, :]
    M[E.xi_block, E.x_block] = np.asarray(b).T
    if d:
        c = E.fiber.c
        M[E.fiber_block, E.x_block] = a.T
        M[E.xi_block, E.x_block] -= (a @ c @ a.T).T
        M[E.xi_block, E.fiber_block] = -2.0 * (a @ c)
    return M


def build_generalized_metric(E: CourantAlgebroid, g, b=None, a=None) -> GeneralizedMetric:
    g = g if isinstance(g, FrameMetric) else FrameMetric(np.asarray(g, dtype=float))
    n = E.n
    return GeneralizedMetric(E, g, np.zeros((n, n)) if b is None else np.asarray(b, dtype=float), a)


# ----------------------------------------------------------------------------
# Connections, torsion, divergence


@dataclass(frozen=True)
class GenConnection:
    """Coefficients on the standard frame of ``E`` plus the adapted copy."""

    E: CourantAlgebroid
    coeffs: np.ndarray
    metric: Optional[GeneralizedMetric] = None

    def in_frame(self, M: np.ndarray) -> np.ndarray:
        return np.einsum("xa,yb,zc,xyz->abc", M, M, M, self.coeffs)

    def adapted(self) -> np.ndarray:
        if self.metric is None:
            raise ValueError("connection has no generalized metric attached")
        return self.in_frame(self.metric.adapted_basis)

    def compatibility_defect(self) -> float:
        """Sup of pairing-skewness defect and mixed ``<D e+, e->`` terms."""
        G = self.coeffs
        worst = float(np.max(np.abs(G + G.transpose(0, 2, 1)), initial=0.0))
        if self.metric is not None:
            rp = self.metric.r_plus
            Ga = self.adapted()
            worst = max(worst, float(np.max(np.abs(Ga[:, :rp, rp:]), initial=0.0)))
        return worst

    def __add__(self, chi: np.ndarray) -> "GenConnection":
        return GenConnection(self.E, self.coeffs + chi, self.metric)


def _from_adapted(E: CourantAlgebroid, metric: GeneralizedMetric, coeffs: np.ndarray) -> GenConnection:
    Minv = np.linalg.inv(metric.adapted_basis)
    return GenConnection(E, np.einsum("ax,by,cz,abc->xyz", Minv, Minv, Minv, coeffs), metric)


def torsion_frame(frame: FrameData, Gamma: np.ndarray) -> np.ndarray:
    """``<D_1 e2 - D_2 e1 - [e1,e2], e3> + <D_3 e1, e2>``."""
    Kl = frame.lowered_bracket()
    return Gamma - np.einsum("bac->abc", Gamma) - Kl + np.einsum("cab->abc", Gamma)


def torsion_axu_frame(frame: FrameData, Gamma: np.ndarray) -> np.ndarray:
    """Cyclic sum of ``<D_1 e2 - D_2 e1, e3>/2 - <[[e1, e2]], e3>/3``."""
    Kl = frame.lowered_bracket()
    skew = 0.5 * (Kl - Kl.transpose(1, 0, 2))
    base = 0.5 * (Gamma - Gamma.transpose(1, 0, 2)) - skew / 3.0
    return cyclic_sum(base)


def cyclic_sum(t: np.ndarray) -> np.ndarray:
    """``t[a,b,c] + t[b,c,a] + t[c,a,b]`` as an array indexed ``[a,b,c]``."""
    return t + np.einsum("bca->abc", t) + np.einsum("cab->abc", t)


def torsion(E: CourantAlgebroid, D: GenConnection) -> np.ndarray:
    return torsion_frame(E.frame, D.coeffs)


def torsion_axu(E: CourantAlgebroid, D: GenConnection) -> np.ndarray:
    return torsion_axu_frame(E.frame, D.coeffs)


@dataclass(frozen=True)
class DivergenceOperator:
    """``div(e) = div0(e) - <eps, e>`` with the Riemannian baseline.

    ``baseline[a] = -tr(ad_{pi(E_a)})`` is the invariant form of
    ``mu^{-1} L_{pi(e)} mu``; ``offset`` holds the section ``eps``.
    """

    baseline: np.ndarray
    offset: np.ndarray
    pairing: np.ndarray

    def __call__(self, e: np.ndarray) -> float:
        return float(self.baseline @ e - self.offset @ self.pairing @ e)

    def covector(self) -> np.ndarray:
        return self.baseline - self.pairing @ self.offset


def riemannian_baseline(frame: FrameData) -> np.ndarray:
    return -frame.anchor.T @ frame.base.trace_ad()


def divergence_operator(E: CourantAlgebroid, offset=None) -> DivergenceOperator:
    frame = E.frame
    eps = np.zeros(E.rank) if offset is None else np.asarray(offset, dtype=float)
    return DivergenceOperator(riemannian_baseline(frame), eps, frame.pairing)


def divergence_covector(frame: FrameData, Gamma: np.ndarray) -> np.ndarray:
    """``div_D(E_b) = sum_a <D_{E_a} E_b, ~E_a>``."""
    return np.einsum("ac,abc->b", frame.pairing_inverse, Gamma)


def divergence_of(E: CourantAlgebroid, D: GenConnection) -> DivergenceOperator:
    frame = E.frame
    base = riemannian_baseline(frame)
    delta = divergence_covector(frame, D.coeffs)
    eps = frame.pairing_inverse @ (base - delta)
    return DivergenceOperator(base, eps, frame.pairing)


def offset_from_dilaton(E: CourantAlgebroid, phi=None, sigma=None, r=None) -> np.ndarray:
    """Section ``phi^+ + sigma^- + r`` in the reference splitting metric ``g``.

    With only ``phi`` given the offset is ``phi^+ + phi^-`` = the plain
    covector ``phi``.  ``phi^+``/``sigma^-`` need the metric; this helper
    covers the metric-free case, see :func:`offset_from_parts`.
    """
    n = E.n
    phi = np.zeros(n) if phi is None else np.asarray(phi, dtype=float)
    if sigma is not None:
        raise ValueError("sigma requires a metric; use offset_from_parts")
    return E.section(xi=phi, r=r) if r is not None else E.section(xi=phi)


def offset_from_parts(metric: GeneralizedMetric, phi=None, sigma=None, r=None) -> np.ndarray:
    """``eps = Pi+ phi + Pi- sigma + r`` in the splitting of ``metric``."""
    E = metric.E
    n = E.n
    phi = np.zeros(n) if phi is None else np.asarray(phi, dtype=float)
    sigma = phi if sigma is None else np.asarray(sigma, dtype=float)
    M = metric.splitting
    eps = metric.projector_plus @ (M @ E.section(xi=phi))
    eps = eps + metric.projector_minus @ (M @ E.section(xi=sigma))
    if r is not None:
        eps = eps + M @ E.section(r=r)
    return eps


def offset_parts(metric: GeneralizedMetric, eps: np.ndarray):
    """Inverse of :func:`offset_from_parts`: returns ``(phi, sigma, r)``."""
    E = metric.E
    local = np.linalg.solve(metric.splitting, eps)
    X, r, xi = E.split(local)
    gX = metric.g.g @ X
    return xi + gX, xi - gX, r


# ----------------------------------------------------------------------------
# Weyl decomposition


def weyl_term(P: np.ndarray, e_lowered: np.ndarray) -> np.ndarray:
    """``<chi^e_{E_a} E_b, E_c> = <a,b> <e,c> - <e,b> <a,c>``."""
    return np.einsum("ab,c->abc", P, e_lowered) - np.einsum("b,ac->abc", e_lowered, P)


def weyl_decompose_frame(frame_pairing: np.ndarray, chi: np.ndarray):
    P = frame_pairing
    r = P.shape[0]
    if r == 1:
        raise ValueError("Weyl decomposition needs rank > 1")
    Pinv = np.linalg.inv(P)
    e_low = np.einsum("ij,ijc->c", Pinv, chi) / (r - 1)
    chi_e = weyl_term(P, e_low)
    return chi - chi_e, Pinv @ e_low


def weyl_decompose(E: CourantAlgebroid, chi: np.ndarray):
    """Split ``chi = chi_0 + chi^e``; returns ``(chi_0, e)``."""
    return weyl_decompose_frame(E.frame.pairing, chi)


def _pure_block_weyl(Gram: np.ndarray, u: np.ndarray) -> np.ndarray:
    return weyl_term(Gram, Gram @ u)


# ----------------------------------------------------------------------------
# Construction of torsion-free connections


def _seed_blocks(metric: GeneralizedMetric, frame_adapted: FrameData) -> np.ndarray:
    """Lifted ``nabla^g`` on ``V+``/``V-`` X-type directions, gauge on fiber."""
    E = metric.E
    n, d = E.n, E.fiber_dim
    rp = metric.r_plus
    L = levi_civita_lowered(E.base, metric.g.g)
    r = E.rank
    S = np.zeros((n, r, r))
    S[:, :rp, :rp] = L
    S[:, rp:rp + n, rp:rp + n] = -L
    if d:
        kf = E.fiber.algebra.structure_constants
        A = split_gauge(metric)
        S[:, rp + n:, rp + n:] = np.einsum("ie,ebm,mc->ibc", A, kf, E.fiber.c)
    return np.einsum("ia,ibc->abc", frame_adapted.anchor, S)


def split_gauge(metric: GeneralizedMetric) -> np.ndarray:
    """Gauge potential in the adapted splitting (``A + a``)."""
    from .courant import read_transitive_data

    E = metric.E
    if E.fiber is None:
        return np.zeros((E.n, 0))
    return read_transitive_data(metric.split_frame(), E.n, E.fiber)[2]


def levi_civita(E: CourantAlgebroid, metric: GeneralizedMetric,
                div: Optional[DivergenceOperator] = None,
                seed: Union[str, np.ndarray] = "levi-civita") -> GenConnection:
    """Torsion-free ``V+``-compatible connection with divergence ``div``.

    ``seed`` is ``"levi-civita"``, ``"zero"`` or an array of pure-type
    coefficients on the adapted frame.
    """
    rp, rm = metric.r_plus, metric.r_minus
    if rp <= 1 or rm <= 1:
        raise ValueError("ranks of V+ and V- must exceed 1")
    if E.fiber is not None and not metric.is_admissible():
        raise ValueError("generalized metric is not admissible")
    div = divergence_operator(E) if div is None else div
    frame = metric.adapted_frame()
    Kl = frame.lowered_bracket()
    r = E.rank
    p, m = slice(0, rp), slice(rp, r)
    if isinstance(seed, str):
        if seed == "levi-civita":
            Gamma = _seed_blocks(metric, frame)
        elif seed == "zero":
            Gamma = np.zeros((r, r, r))
        else:
            raise ValueError(f"unknown seed {seed!r}")
    else:
        Gamma = np.array(seed, dtype=float)
    # keep only pure blocks of the seed, then force the mixed ones
    pure = np.zeros((r, r, r))
    pure[p, p, p] = Gamma[p, p, p]
    pure[m, m, m] = Gamma[m, m, m]
    Gamma = pure
    Gamma[m, p, p] = Kl[m, p, p]
    Gamma[p, m, m] = Kl[p, m, m]
    Gamma = Gamma - torsion_frame(frame, Gamma) / 3.0
    Gamma = _fix_divergence(frame, metric, Gamma, div)
    return _from_adapted(E, metric, Gamma)


def _fix_divergence(frame: FrameData, metric: GeneralizedMetric, Gamma: np.ndarray,
                    div: DivergenceOperator) -> np.ndarray:
    M = metric.adapted_basis
    rp = metric.r_plus
    r = frame.rank
    target = M.T @ div.covector()
    current = divergence_covector(frame, Gamma)
    w = frame.pairing_inverse @ (current - target)
    Gp = frame.pairing[:rp, :rp]
    Gm = frame.pairing[rp:, rp:]
    out = Gamma.copy()
    out[:rp, :rp, :rp] += _pure_block_weyl(Gp, w[:rp] / (rp - 1))
    out[rp:, rp:, rp:] += _pure_block_weyl(Gm, w[rp:] / (r - rp - 1))
    return out


def gualtieri_bismut(E: CourantAlgebroid, metric: GeneralizedMetric) -> GenConnection:
    """``D^B_e Y+ = (nabla^+_{pi e} Y)+`` and ``D^B_e Y- = (nabla^-_{pi e} Y)-``."""
    if E.fiber is not None:
        raise ValueError("the Gualtieri-Bismut connection is provided for exact algebroids")
    from .courant import read_exact_data

    n = E.n
    split = metric.split_frame()
    H = read_exact_data(split, n).full()
    L = levi_civita_lowered(E.base, metric.g.g)
    frame = metric.adapted_frame()
    r = E.rank
    S = np.zeros((n, r, r))
    S[:, :n, :n] = L + 0.5 * H
    S[:, n:, n:] = -(L - 0.5 * H)
    Gamma = np.einsum("ia,ibc->abc", frame.anchor, S)
    return _from_adapted(E, metric, Gamma)


def lifted_base_connection(E: CourantAlgebroid, christoffel: np.ndarray) -> GenConnection:
    """``D_e (Y + eta) = nabla_{pi e} Y + nabla^*_{pi e} eta`` on the standard frame.

    ``christoffel[i, j, k]`` are the coefficients of ``nabla_i e_j = sum_k Gamma[i, j, k] e_k``.
    """
    if E.fiber is not None:
        raise ValueError("lifted base connections are provided for exact algebroids")
    n = E.n
    Gm = np.asarray(christoffel, dtype=float)
    r = E.rank
    out = np.zeros((r, r, r))
    # <D_i X_j, xi^k> = Gamma[i,j,k]/2 ; <D_i xi^j, X_k> = -Gamma[i,k,j]/2
    out[:n, :n, n:] = 0.5 * Gm
    out[:n, n:, :n] = -0.5 * Gm.transpose(0, 2, 1)
    return GenConnection(E, out)


def random_sigma0(metric: GeneralizedMetric, rng: np.random.Generator,
                  scale: float = 1.0) -> np.ndarray:
    """Random pure-type element of Sigma_0 (standard-frame coefficients).

    Skew in the last two slots, vanishing cyclic sum and vanishing trace
    on each of ``V+`` and ``V-``.
    """
    frame = metric.adapted_frame()
    rp, r = metric.r_plus, frame.rank
    out = np.zeros((r, r, r))
    for blk in (slice(0, rp), slice(rp, r)):
        size = blk.stop - blk.start
        chi = rng.normal(size=(size, size, size)) * scale
        chi = chi - chi.transpose(0, 2, 1)
        chi = chi - cyclic_sum(chi) / 3.0
        chi, _ = weyl_decompose_frame(frame.pairing[blk, blk], chi)
        out[blk, blk, blk] = chi
    Minv = np.linalg.inv(metric.adapted_basis)
    return np.einsum("ax,by,cz,abc->xyz", Minv, Minv, Minv, out)


def add_sigma0(D: GenConnection, sigma: np.ndarray) -> GenConnection:
    return GenConnection(D.E, D.coeffs + sigma, D.metric)
