"""Catalogue of invariant geometries and random instance generators.

Random instances are built from known Lie algebras under random changes
of basis, so structure constants are always exact solutions of Jacobi.
Closed forms come from null spaces of the Chevalley-Eilenberg
differential; transitive data solves ``dH = c(F ^ F)`` by least squares
and is rejected when that equation has no invariant solution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .courant import CourantAlgebroid, QuadraticFiber, c_wedge
from .lie import KForm, LieAlgebra, ce_matrix, closed_forms, exterior_algebra


def _alg(dim: int, brackets, name: str) -> LieAlgebra:
    return LieAlgebra.from_brackets(dim, brackets, name, one_based=True)


CATALOGUE: dict[str, Callable[[], LieAlgebra]] = {
    "abelian3": lambda: LieAlgebra.abelian(3),
    "heisenberg": lambda: LieAlgebra.heisenberg(1.0),
    "su2": lambda: _alg(3, [(1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1)], "su2"),
    "sl2": lambda: _alg(3, [(1, 2, 3, 1), (3, 1, 1, 2), (3, 2, 2, -2)], "sl2"),
    "e2": lambda: _alg(3, [(3, 1, 2, 1), (3, 2, 1, -1)], "e(2)"),
    "book": lambda: _alg(3, [(1, 2, 2, 1), (1, 3, 3, 1)], "book"),
    "solv3": lambda: _alg(3, [(1, 2, 2, 1), (1, 3, 3, -1)], "sol"),
    "heisenberg+R": lambda: LieAlgebra.heisenberg(1.0, pad=1),
    "su2+R": lambda: _alg(4, [(1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1)], "u(2)"),
    "filiform4": lambda: _alg(4, [(1, 2, 3, 1), (1, 3, 4, 1)], "n4"),
    "aff2": lambda: _alg(4, [(1, 2, 2, 1), (3, 4, 4, 1)], "aff+aff"),
    "heisenberg5": lambda: _alg(5, [(1, 2, 5, 1), (3, 4, 5, 1)], "h5"),
    "filiform5": lambda: _alg(5, [(1, 2, 3, 1), (1, 3, 4, 1), (1, 4, 5, 1)], "n5"),
    "su2+su2": lambda: _alg(6, [(1, 2, 3, 1), (2, 3, 1, 1), (3, 1, 2, 1),
                                (4, 5, 6, 1), (5, 6, 4, 1), (6, 4, 5, 1)], "so(4)"),
    "iwasawa": lambda: _alg(6, [(1, 3, 5, -1), (2, 4, 5, 1), (1, 4, 6, -1), (2, 3, 6, -1)], "iwasawa"),
    "heisenberg+R3": lambda: LieAlgebra.heisenberg(1.0, pad=3),
}


def random_basis_change(rng: np.random.Generator, n: int) -> np.ndarray:
    P = rng.normal(size=(n, n)) * 0.5 + np.eye(n)
    while np.linalg.cond(P) > 8.0:
        P = rng.normal(size=(n, n)) * 0.5 + np.eye(n)
    return P


def random_metric(rng: np.random.Generator, n: int, spread: float = 0.4) -> np.ndarray:
    A = rng.normal(size=(n, n)) * spread
    return np.eye(n) + A @ A.T


def random_skew(rng: np.random.Generator, n: int, scale: float = 0.5) -> np.ndarray:
    b = rng.normal(size=(n, n)) * scale
    return b - b.T


def random_closed_form(rng: np.random.Generator, algebra: LieAlgebra, degree: int,
                       scale: float = 1.0) -> KForm:
    basis = closed_forms(algebra, degree)
    if basis.shape[1] == 0:
        return KForm.zero(algebra.dim, degree)
    return KForm(algebra.dim, degree, basis @ rng.normal(size=basis.shape[1]) * scale)


def random_algebra(rng: np.random.Generator, dims=(3, 6), names=None) -> LieAlgebra:
    pool = [k for k, f in CATALOGUE.items() if dims[0] <= f().dim <= dims[1]]
    if names is not None:
        pool = [k for k in pool if k in names]
    name = pool[rng.integers(len(pool))]
    L = CATALOGUE[name]()
    return L.change_basis(random_basis_change(rng, L.dim), name=L.name)


@dataclass(frozen=True)
class Instance:
    """A Courant algebroid together with generalized-metric data."""

    E: CourantAlgebroid
    g: np.ndarray
    b: np.ndarray
    a: Optional[np.ndarray]
    offset: np.ndarray


def random_exact_instance(rng: np.random.Generator, dims=(3, 6), closed_phi: bool = False,
                          offset: str = "general") -> Instance:
    """``offset`` is ``"zero"``, ``"phi"`` (``eps = phi``, closed if asked) or ``"general"``."""
    L = random_algebra(rng, dims)
    n = L.dim
    E = CourantAlgebroid.exact(L, random_closed_form(rng, L, 3))
    g = random_metric(rng, n)
    b = random_skew(rng, n)
    if offset == "zero":
        eps = np.zeros(2 * n)
    elif offset == "phi":
        phi = random_closed_form(rng, L, 1).coeffs if closed_phi else rng.normal(size=n)
        eps = E.section(xi=phi)
    else:
        eps = rng.normal(size=2 * n) * 0.5
    return Instance(E, g, b, None, eps)


def gauge_curvature(base: LieAlgebra, fiber: QuadraticFiber, A: np.ndarray) -> np.ndarray:
    """``F = dA + [A ^ A]/2`` as ``F[i, j, :] = -A([e_i, e_j]) + [A_i, A_j]``."""
    dA = -np.einsum("ijk,ka->ija", base.structure_constants, A)
    AA = np.einsum("ie,jf,efa->ija", A, A, fiber.algebra.structure_constants)
    return dA + AA


def solve_H(base: LieAlgebra, four_form: KForm, tol: float = 1e-9) -> Optional[KForm]:
    """Some invariant 3-form with ``dH = four_form``, or None if impossible."""
    n = base.dim
    ext = exterior_algebra(n)
    d = ce_matrix(base)[ext.degree_slice(4), ext.degree_slice(3)]
    u, s, vt = np.linalg.svd(d, full_matrices=False)
    keep = s > tol * max(1.0, s.max(initial=0.0))
    sol = vt[keep].T @ ((u[:, keep].T @ four_form.coeffs) / s[keep])
    if np.max(np.abs(d @ sol - four_form.coeffs), initial=0.0) > tol:
        return None
    return KForm(n, 3, sol)


def random_fiber(rng: np.random.Generator, kind: str) -> QuadraticFiber:
    if kind == "u1":
        return QuadraticFiber.abelian([[rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)]])
    if kind == "u1^2":
        Q = np.linalg.qr(rng.normal(size=(2, 2)))[0]
        signs = rng.choice([-1.0, 1.0], size=2)
        return QuadraticFiber.abelian(Q @ np.diag(signs * rng.uniform(0.5, 1.5, size=2)) @ Q.T)
    if kind == "su2":
        return QuadraticFiber.su2(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5))
    raise ValueError(f"unknown fiber kind {kind!r}")


def random_transitive_instance(rng: np.random.Generator, dims=(3, 5), fiber_kind: Optional[str] = None,
                               with_shift: bool = True, offset: str = "general",
                               max_tries: int = 50) -> Instance:
    """Random admissible transitive instance with ``d_A F = 0`` and ``dH = c(F ^ F)``."""
    for _ in range(max_tries):
        L = random_algebra(rng, dims)
        n = L.dim
        kind = fiber_kind or ["u1", "u1^2", "su2"][rng.integers(3)]
        fiber = random_fiber(rng, kind)
        d = fiber.dim
        if kind == "su2":
            A = rng.normal(size=(n, d)) * 0.5
            F = gauge_curvature(L, fiber, A)
        else:
            A = None
            forms = closed_forms(L, 2)
            if forms.shape[1] == 0:
                continue
            F = np.zeros((n, n, d))
            for alpha in range(d):
                F[:, :, alpha] = KForm(n, 2, forms @ rng.normal(size=forms.shape[1])).full()
        if n >= 4:
            probe = CourantAlgebroid.transitive(L, fiber, F, None, A)
            H0 = solve_H(L, c_wedge(probe))
            if H0 is None:
                continue
        else:
            H0 = KForm.zero(n, 3)
        H = H0 + random_closed_form(rng, L, 3, 0.7)
        E = CourantAlgebroid.transitive(L, fiber, F, H, A)
        g = random_metric(rng, n)
        b = random_skew(rng, n)
        a = rng.normal(size=(n, d)) * 0.4 if with_shift else None
        r = E.rank
        if offset == "zero":
            eps = np.zeros(r)
        elif offset == "phi":
            eps = E.section(xi=rng.normal(size=n))
        else:
            eps = rng.normal(size=r) * 0.5
        return Instance(E, g, b, a, eps)
    raise RuntimeError("no admissible transitive instance found")


__all__ = [
    "CATALOGUE", "Instance", "gauge_curvature", "random_algebra", "random_basis_change",
    "random_closed_form", "random_exact_instance", "random_fiber", "random_metric",
    "random_skew", "random_transitive_instance", "solve_H",
]
