"""Lie algebras and invariant exterior calculus.

Forms are stored on strictly increasing multi-indices.  The exterior algebra
of an ``n``-dimensional frame is realized once per ``n`` as the ``2**n``
dimensional space spanned by monomials ``e^I``, ordered first by degree and
then lexicographically, so that the degree-``k`` forms occupy a contiguous
slice.  Wedge and interior products by frame elements are dense matrices on
that space; the Chevalley-Eilenberg differential is assembled from them.

Conventions: ``[e_i, e_j] = sum_k c[i, j, k] e_k`` and
``d xi(X, Y) = -xi([X, Y])`` on invariant 1-forms, extended as an
antiderivation.  The orientation ``e^1 ^ ... ^ e^n`` is positive.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-10


# ----------------------------------------------------------------------------
# Exterior algebra bookkeeping


def _perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


class ExteriorAlgebra:
    """Monomial basis of the exterior algebra on ``n`` generators."""

    def __init__(self, n: int):
        self.n = n
        self.combos: list[tuple[int, ...]] = []
        self.offsets: list[int] = []
        for k in range(n + 1):
            self.offsets.append(len(self.combos))
            self.combos.extend(itertools.combinations(range(n), k))
        self.offsets.append(len(self.combos))
        self.index = {c: i for i, c in enumerate(self.combos)}
        self.size = len(self.combos)
        self.wedge_ops = np.zeros((n, self.size, self.size))
        self.interior_ops = np.zeros((n, self.size, self.size))
        for col, combo in enumerate(self.combos):
            for i in range(n):
                if i not in combo:
                    new = tuple(sorted(combo + (i,)))
                    # e^i ^ e^I: move e^i past the smaller indices
                    sign = (-1) ** sum(1 for c in combo if c < i)
                    self.wedge_ops[i, self.index[new], col] = sign
                else:
                    pos = combo.index(i)
                    new = combo[:pos] + combo[pos + 1:]
                    self.interior_ops[i, self.index[new], col] = (-1) ** pos
        for op in (self.wedge_ops, self.interior_ops):
            op.setflags(write=False)

    def degree_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    def combos_of(self, k: int) -> list[tuple[int, ...]]:
        return self.combos[self.offsets[k]:self.offsets[k + 1]]


@lru_cache(maxsize=None)
def exterior_algebra(n: int) -> ExteriorAlgebra:
    if n < 0 or n > 12:
        raise ValueError(f"unsupported frame dimension {n}")
    return ExteriorAlgebra(n)


# ----------------------------------------------------------------------------
# Lie algebras


@dataclass(frozen=True)
class LieAlgebra:
    """Real Lie algebra given by structure constants ``c[i, j, k]``."""

    dim: int
    structure_constants: np.ndarray
    name: str = ""

    def __post_init__(self):
        c = np.asarray(self.structure_constants, dtype=float)
        if c.shape != (self.dim,) * 3:
            raise ValueError(
                f"structure constants have shape {c.shape}, expected {(self.dim,) * 3}")
        bad = np.argwhere(np.abs(c + c.transpose(1, 0, 2)) > DEFAULT_TOL)
        if len(bad):
            i, j, k = (int(v) for v in bad[0])
            raise ValueError(
                f"structure constants not antisymmetric at (i, j, k) = "
                f"({i + 1}, {j + 1}, {k + 1}) (1-based): "
                f"c^k_ij = {c[i, j, k]}, c^k_ji = {c[j, i, k]}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)

    @classmethod
    def from_brackets(cls, dim: int, brackets: Iterable[Sequence], name: str = "",
                      one_based: bool = False) -> "LieAlgebra":
        """Build from entries ``(i, j, k, value)`` meaning ``c^k_ij = value``.

        The antisymmetric partner ``c^k_ji = -value`` is filled in unless it is
        given explicitly, in which case it must agree.
        """
        c = np.zeros((dim, dim, dim))
        seen: dict[tuple[int, int, int], float] = {}
        shift = 1 if one_based else 0
        for entry in brackets:
            i, j, k = (int(v) - shift for v in entry[:3])
            value = float(entry[3])
            for idx in (i, j, k):
                if not 0 <= idx < dim:
                    raise ValueError(f"bracket index out of range in entry {tuple(entry)}")
            if i == j:
                if value != 0.0:
                    raise ValueError(
                        f"c^{k + shift}_{i + shift}{j + shift} must vanish (antisymmetry)")
                continue
            seen[(i, j, k)] = seen.get((i, j, k), 0.0) + value
        for (i, j, k), value in seen.items():
            if (j, i, k) in seen and abs(seen[(j, i, k)] + value) > DEFAULT_TOL:
                raise ValueError(
                    f"structure constants not antisymmetric at (i, j, k) = "
                    f"({i + shift}, {j + shift}, {k + shift}): "
                    f"{value} vs {seen[(j, i, k)]}")
            c[i, j, k] = value
            c[j, i, k] = -value
        return cls(dim, c, name)

    @classmethod
    def abelian(cls, n: int) -> "LieAlgebra":
        return cls(n, np.zeros((n, n, n)), f"abelian{n}")

    @classmethod
    def heisenberg(cls, k: float = 1.0, pad: int = 0) -> "LieAlgebra":
        """``[e1, e2] = k e3`` plus ``pad`` abelian directions."""
        n = 3 + pad
        return cls.from_brackets(n, [(0, 1, 2, k)], f"heisenberg({k})" + (f"+R{pad}" if pad else ""))

    def bracket(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.structure_constants)

    def ad(self, x: np.ndarray) -> np.ndarray:
        """Matrix of ``ad_x`` acting on column vectors."""
        return np.einsum("i,ijk->kj", x, self.structure_constants)

    def trace_ad(self) -> np.ndarray:
        """Vector ``v_i = tr(ad_{e_i})``."""
        return np.einsum("ijj->i", self.structure_constants)

    def is_unimodular(self, tol: float = DEFAULT_TOL) -> bool:
        return bool(np.max(np.abs(self.trace_ad()), initial=0.0) <= tol)

    def change_basis(self, P: np.ndarray, name: str = "") -> "LieAlgebra":
        """Algebra in the frame ``f_a = sum_i P[i, a] e_i``."""
        P = np.asarray(P, dtype=float)
        Pinv = np.linalg.inv(P)
        c = np.einsum("ia,jb,ijk,ck->abc", P, P, self.structure_constants, Pinv)
        return LieAlgebra(self.dim, c, name or self.name)

    def direct_sum(self, other: "LieAlgebra") -> "LieAlgebra":
        n = self.dim + other.dim
        c = np.zeros((n, n, n))
        c[:self.dim, :self.dim, :self.dim] = self.structure_constants
        c[self.dim:, self.dim:, self.dim:] = other.structure_constants
        return LieAlgebra(n, c, f"{self.name}+{other.name}")

    def center_mask(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        """Boolean mask of frame elements that are central."""
        return np.max(np.abs(self.structure_constants), axis=(1, 2)) <= tol


def jacobi_residual(algebra: LieAlgebra) -> float:
    """Sup-norm of ``[[e_i,e_j],e_k] + cyclic`` over all frame triples."""
    c = algebra.structure_constants
    # [[e_i,e_j],e_k] = c_ij^m c_mk^l
    dbl = np.einsum("ijm,mkl->ijkl", c, c)
    cyc = dbl + dbl.transpose(1, 2, 0, 3) + dbl.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc), initial=0.0))


# ----------------------------------------------------------------------------
# Forms


@dataclass(frozen=True)
class KForm:
    """Invariant ``k``-form with coefficients on increasing multi-indices."""

    dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not 0 <= self.degree <= self.dim:
            raise ValueError(f"degree {self.degree} out of range for dim {self.dim}")
        expected = math.comb(self.dim, self.degree)
        arr = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if arr.shape != (expected,):
            raise ValueError(f"{expected} coefficients expected, got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zero(cls, dim: int, degree: int) -> "KForm":
        return cls(dim, degree, np.zeros(math.comb(dim, degree)))

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: Iterable[Sequence],
                   one_based: bool = False) -> "KForm":
        """Entries ``(i_1, ..., i_k, value)``; unsorted indices are allowed."""
        ext = exterior_algebra(dim)
        out = np.zeros(math.comb(dim, degree))
        base = ext.offsets[degree]
        shift = 1 if one_based else 0
        for entry in terms:
            idx = [int(v) - shift for v in entry[:degree]]
            if any(not 0 <= v < dim for v in idx):
                raise ValueError(f"form index out of range in entry {tuple(entry)}")
            sign = _perm_sign(idx)
            if sign == 0:
                raise ValueError(f"repeated index in form entry {tuple(entry)}")
            out[ext.index[tuple(sorted(idx))] - base] += sign * float(entry[degree])
        return cls(dim, degree, out)

    @classmethod
    def from_full(cls, tensor: np.ndarray) -> "KForm":
        """Read off the form from a totally antisymmetric dense tensor."""
        tensor = np.asarray(tensor, dtype=float)
        k = tensor.ndim
        n = tensor.shape[0] if k else 0
        if k == 0:
            return cls(0, 0, tensor.reshape(1))
        combos = exterior_algebra(n).combos_of(k)
        return cls(n, k, np.array([tensor[c] for c in combos]))

    def full(self) -> np.ndarray:
        """Dense totally antisymmetric tensor ``alpha(e_{i_1}, ..., e_{i_k})``."""
        k, n = self.degree, self.dim
        out = np.zeros((n,) * k)
        if k == 0:
            return np.array(self.coeffs[0])
        perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(k))]
        for value, combo in zip(self.coeffs, exterior_algebra(n).combos_of(k)):
            if value == 0.0:
                continue
            for p, s in perms:
                out[tuple(combo[i] for i in p)] = s * value
        return out

    def embed(self) -> np.ndarray:
        """Coefficient vector in the full ``2**n`` exterior algebra."""
        ext = exterior_algebra(self.dim)
        v = np.zeros(ext.size)
        v[ext.degree_slice(self.degree)] = self.coeffs
        return v

    def __add__(self, other: "KForm") -> "KForm":
        _check_same(self, other)
        return KForm(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "KForm") -> "KForm":
        _check_same(self, other)
        return KForm(self.dim, self.degree, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "KForm":
        return KForm(self.dim, self.degree, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "KForm":
        return self * -1.0

    def norm_sup(self) -> float:
        return float(np.max(np.abs(self.coeffs), initial=0.0))


def _check_same(a: KForm, b: KForm) -> None:
    if a.dim != b.dim or a.degree != b.degree:
        raise ValueError(f"form mismatch: ({a.dim}, {a.degree}) vs ({b.dim}, {b.degree})")


def form_from_vector(dim: int, degree: int, vec: np.ndarray) -> KForm:
    ext = exterior_algebra(dim)
    return KForm(dim, degree, np.asarray(vec)[ext.degree_slice(degree)])


def wedge(a: KForm, b: KForm) -> KForm:
    if a.dim != b.dim:
        raise ValueError("forms over different frames")
    if a.degree + b.degree > a.dim:
        raise ValueError("wedge degree exceeds dimension")
    out = wedge_matrix(a) @ b.embed()
    return form_from_vector(a.dim, a.degree + b.degree, out)


def wedge_matrix(a: KForm) -> np.ndarray:
    """Matrix of left multiplication ``alpha ^ .`` on the exterior algebra."""
    ext = exterior_algebra(a.dim)
    out = np.zeros((ext.size, ext.size))
    for value, combo in zip(a.coeffs, ext.combos_of(a.degree)):
        if value == 0.0:
            continue
        op = np.eye(ext.size)
        for i in reversed(combo):
            op = ext.wedge_ops[i] @ op
        out += value * op
    return out


def interior(x: np.ndarray, a: KForm) -> KForm:
    """Contraction ``iota_x alpha`` in the first slot."""
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    ext = exterior_algebra(a.dim)
    op = np.einsum("i,iab->ab", np.asarray(x, dtype=float), ext.interior_ops)
    return form_from_vector(a.dim, a.degree - 1, op @ a.embed())


@lru_cache(maxsize=256)
def _ce_matrix_cached(key: bytes, n: int) -> np.ndarray:
    c = np.frombuffer(key).reshape(n, n, n)
    ext = exterior_algebra(n)
    d = np.zeros((ext.size, ext.size))
    for i in range(n):
        # d e^i = -sum_{j<k} c^i_jk e^j ^ e^k
        two = np.zeros((ext.size, ext.size))
        for j in range(n):
            for k in range(j + 1, n):
                if c[j, k, i] != 0.0:
                    two -= c[j, k, i] * (ext.wedge_ops[j] @ ext.wedge_ops[k])
        d += two @ ext.interior_ops[i]
    d.setflags(write=False)
    return d


def ce_matrix(algebra: LieAlgebra) -> np.ndarray:
    """Chevalley-Eilenberg differential on the full exterior algebra."""
    c = np.ascontiguousarray(algebra.structure_constants)
    return _ce_matrix_cached(c.tobytes(), algebra.dim)


def ce_d(algebra: LieAlgebra, alpha: KForm) -> KForm:
    """Exterior derivative of an invariant form."""
    if alpha.dim != algebra.dim:
        raise ValueError(f"form over dim {alpha.dim}, algebra has dim {algebra.dim}")
    if alpha.degree >= algebra.dim:
        if alpha.degree > algebra.dim:
            raise ValueError("degree exceeds dimension")
        raise ValueError("top-degree form has no higher-degree derivative in this frame")
    out = ce_matrix(algebra) @ alpha.embed()
    return form_from_vector(algebra.dim, alpha.degree + 1, out)


def ce_d_full(algebra: LieAlgebra, tensor: np.ndarray) -> np.ndarray:
    """Exterior derivative of an antisymmetric dense tensor of degree >= 1.

    Works along any trailing index structure: the first ``k`` axes are the
    form slots and remaining axes (e.g. a fiber index) are carried along.
    """
    c = algebra.structure_constants
    tensor = np.asarray(tensor, dtype=float)
    n = algebra.dim
    k = 0
    while k < tensor.ndim and tensor.shape[k] == n:
        k += 1
    return _ce_d_full_k(c, tensor, k)


def _ce_d_full_k(c: np.ndarray, tensor: np.ndarray, k: int) -> np.ndarray:
    n = c.shape[0]
    extra = tensor.shape[k:]
    out = np.zeros((n,) * (k + 1) + extra)
    # d alpha(X_0..X_k) = sum_{i<j} (-1)^{i+j} alpha([X_i,X_j], X_0..^i..^j..X_k)
    for i in range(k + 1):
        for j in range(i + 1, k + 1):
            sign = (-1) ** (i + j)
            # contract first slot of alpha with the bracket of slots i, j
            term = np.tensordot(c, tensor, axes=([2], [0]))  # (a, b, rest...)
            # term axes: a=X_i, b=X_j, then remaining k-1 alpha slots, then extra
            others = [m for m in range(k + 1) if m not in (i, j)]
            order = [i, j] + others
            perm = np.argsort(order).tolist()
            perm = perm + list(range(k + 1, k + 1 + len(extra)))
            out += sign * np.transpose(term, perm)
    return out


def warn_if_not_unimodular(algebra: LieAlgebra) -> None:
    if not algebra.is_unimodular():
        warnings.warn(f"algebra {algebra.name or '<unnamed>'} is not unimodular", stacklevel=2)


# ----------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class FrameMetric:
    """Constant symmetric bilinear form on the frame."""

    g: np.ndarray
    riemannian: bool = True
    inverse: np.ndarray = field(init=False, repr=False, compare=False)
    volume_factor: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"metric must be square, got {g.shape}")
        if np.max(np.abs(g - g.T), initial=0.0) > DEFAULT_TOL * max(1.0, np.max(np.abs(g))):
            raise ValueError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        det = np.linalg.det(g)
        if abs(det) < 1e-14:
            raise ValueError("metric is degenerate")
        if self.riemannian and np.min(np.linalg.eigvalsh(g)) <= 0.0:
            raise ValueError("metric flagged Riemannian is not positive definite")
        g.setflags(write=False)
        inv = np.linalg.inv(g)
        inv = 0.5 * (inv + inv.T)
        inv.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "inverse", inv)
        object.__setattr__(self, "volume_factor", float(math.sqrt(abs(det))))

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @classmethod
    def identity(cls, n: int) -> "FrameMetric":
        return cls(np.eye(n))


def form_gram(metric: FrameMetric, k: int) -> np.ndarray:
    """Gram matrix ``<e^I, e^J>`` of degree-``k`` monomials."""
    combos = exterior_algebra(metric.dim).combos_of(k)
    ginv = metric.inverse
    m = len(combos)
    out = np.empty((m, m))
    for a, I in enumerate(combos):
        for b, J in enumerate(combos):
            out[a, b] = np.linalg.det(ginv[np.ix_(I, J)]) if k else 1.0
    return out


def form_inner(metric: FrameMetric, a: KForm, b: KForm) -> float:
    _check_same(a, b)
    return float(a.coeffs @ form_gram(metric, a.degree) @ b.coeffs)


def hodge_star(metric: FrameMetric, alpha: KForm, orientation: int = 1) -> KForm:
    """Hodge star with ``alpha ^ *beta = <alpha, beta> vol``."""
    n, k = alpha.dim, alpha.degree
    ext = exterior_algebra(n)
    lowered = form_gram(metric, k) @ alpha.coeffs
    out = np.zeros(math.comb(n, n - k))
    base = ext.offsets[n - k]
    for value, combo in zip(lowered, ext.combos_of(k)):
        comp = tuple(i for i in range(n) if i not in combo)
        out[ext.index[comp] - base] += _perm_sign(combo + comp) * value
    return KForm(n, n - k, orientation * metric.volume_factor * out)


def hodge_codiff(algebra: LieAlgebra, metric: FrameMetric, alpha: KForm,
                 orientation: int = 1) -> KForm:
    """Codifferential ``(-1)^{n(k+1)+1} * d *`` on a ``k``-form.

    The two stars cancel the orientation; the argument is accepted so callers
    can state it explicitly.
    """
    n, k = alpha.dim, alpha.degree
    if k < 1:
        raise ValueError("codifferential of a 0-form")
    star = hodge_star(metric, alpha, orientation)
    if star.degree == n:
        return KForm.zero(n, k - 1)
    d_star = ce_d(algebra, star)
    sign = (-1) ** (n * (k + 1) + 1)
    return hodge_star(metric, d_star, orientation) * sign


def h_circ_h(metric: FrameMetric, H: KForm) -> np.ndarray:
    """``(H o H)_ij = g^{rs} g^{kl} H_irk H_jsl``."""
    if H.degree != 3:
        raise ValueError("H must be a 3-form")
    h = H.full()
    ginv = metric.inverse
    out = np.einsum("rs,kl,irk,jsl->ij", ginv, ginv, h, h)
    return 0.5 * (out + out.T)


def h_norm_squared(metric: FrameMetric, H: KForm) -> float:
    """``|H|^2 = g^{ij} g^{kl} g^{st} H_iks H_jlt / 6``."""
    h = H.full()
    ginv = metric.inverse
    return float(np.einsum("ij,kl,st,iks,jlt->", ginv, ginv, ginv, h, h) / 6.0)


def closed_forms(algebra: LieAlgebra, degree: int, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (columns) of closed invariant forms of a degree."""
    n = algebra.dim
    ext = exterior_algebra(n)
    m = math.comb(n, degree)
    if degree == n:
        return np.eye(m)
    d = ce_matrix(algebra)[ext.degree_slice(degree + 1), ext.degree_slice(degree)]
    if d.size == 0 or not np.any(d):
        return np.eye(m)
    _, s, vh = np.linalg.svd(d)
    rank = int(np.sum(s > tol))
    return vh[rank:].T
