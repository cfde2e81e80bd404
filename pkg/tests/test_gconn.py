from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sup
from ggflow.courant import CourantAlgebroid, QuadraticFiber, read_exact_data
from ggflow.gconn import (
    GenConnection,
    build_generalized_metric,
    cyclic_sum,
    divergence_of,
    divergence_operator,
    gualtieri_bismut,
    levi_civita,
    levi_civita_christoffel,
    lifted_base_connection,
    offset_from_parts,
    offset_parts,
    random_sigma0,
    torsion,
    torsion_axu,
    weyl_decompose,
    weyl_term,
)
from ggflow.instances import (
    random_exact_instance,
    random_metric,
    random_skew,
    random_transitive_instance,
)
from ggflow.lie import KForm, LieAlgebra


def pulled_back(E, Q, H):
    """``H(pi Q e1, pi Q e2, pi Q e3)`` on the standard frame."""
    A = E.frame.anchor @ Q
    return np.einsum("ia,jb,kc,ijk->abc", A, A, A, H)


def random_compatible(E, rng) -> GenConnection:
    r = E.rank
    P = E.frame.pairing
    C = rng.normal(size=(r, r, r))
    low = np.einsum("abd,dc->abc", C, P)
    return GenConnection(E, 0.5 * (low - low.transpose(0, 2, 1)))


def metric_of(inst):
    return build_generalized_metric(inst.E, inst.g, inst.b, inst.a)


def test_generalized_metric_flat_blocks():
    E = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    m = build_generalized_metric(E, np.eye(3))
    expected = np.block([[np.zeros((3, 3)), np.eye(3)], [np.eye(3), np.zeros((3, 3))]])
    assert sup(m.G - expected) == 0.0


def test_generalized_metric_antidiagonal_general_g(rng):
    E = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    g = random_metric(rng, 3)
    m = build_generalized_metric(E, g)
    assert sup(m.G[:3, 3:] - np.linalg.inv(g)) < 1e-12
    assert sup(m.G[3:, :3] - g) < 1e-12


@given(st.integers(0, 2 ** 31 - 1), st.booleans())
def test_generalized_metric_invariants(seed, transitive):
    rng = np.random.default_rng(seed)
    inst = random_transitive_instance(rng) if transitive else random_exact_instance(rng)
    m = metric_of(inst)
    defects = m.defects()
    assert defects["involution"] < 1e-12 * max(1.0, sup(m.G) ** 2)
    assert defects["symmetry"] < 1e-12 * max(1.0, sup(m.G))
    assert sup(m.projector_plus + m.projector_minus - np.eye(inst.E.rank)) < 1e-14
    assert m.r_plus == inst.E.n
    gram = m.plus_basis.T @ inst.E.frame.pairing @ m.plus_basis
    assert sup(gram - inst.g) < 1e-12
    assert np.linalg.eigvalsh(gram).min() > 0


def test_transitive_minus_contains_fiber(rng):
    fiber = QuadraticFiber.su2(1.0)
    E = CourantAlgebroid.transitive(LieAlgebra.abelian(3), fiber)
    m = build_generalized_metric(E, random_metric(rng, 3))
    assert m.is_admissible()
    for a in range(3):
        t = E.section(r=np.eye(3)[a])
        assert sup(m.projector_minus @ t - t) < 1e-12


def test_degenerate_metric_rejected():
    E = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    with pytest.raises(ValueError):
        build_generalized_metric(E, np.diag([1.0, 1.0, 0.0]))


def test_torsion_of_gualtieri_bismut(rng):
    for _ in range(5):
        inst = random_exact_instance(rng)
        E, n = inst.E, inst.E.n
        m = metric_of(inst)
        H = read_exact_data(m.split_frame(), n).full()
        T = torsion(E, gualtieri_bismut(E, m))
        expected = pulled_back(E, m.projector_plus, H) + pulled_back(E, m.projector_minus, H)
        assert sup(T - expected) < 1e-11


def test_torsion_of_lifted_torsion_free_connection(rng):
    inst = random_exact_instance(rng)
    E = inst.E
    D = lifted_base_connection(E, levi_civita_christoffel(E.base, inst.g))
    T = torsion(E, D)
    assert sup(T + 0.5 * pulled_back(E, np.eye(E.rank), E.H.full())) < 1e-12


@given(st.integers(0, 2 ** 31 - 1), st.booleans())
def test_torsion_formulas_agree(seed, transitive):
    rng = np.random.default_rng(seed)
    inst = random_transitive_instance(rng) if transitive else random_exact_instance(rng)
    D = random_compatible(inst.E, rng)
    T = torsion(inst.E, D)
    assert sup(T - torsion_axu(inst.E, D)) < 1e-11
    assert sup(T + T.transpose(1, 0, 2)) < 1e-11
    assert sup(T + T.transpose(0, 2, 1)) < 1e-11


@given(st.integers(0, 2 ** 31 - 1))
def test_cyclic_free_deformation_keeps_torsion(seed):
    rng = np.random.default_rng(seed)
    inst = random_exact_instance(rng)
    E = inst.E
    D = random_compatible(E, rng)
    chi = random_compatible(E, rng).coeffs
    chi = chi - cyclic_sum(chi) / 3.0
    assert sup(cyclic_sum(chi)) < 1e-12
    assert sup(torsion(E, D + chi) - torsion(E, D)) < 1e-11


def test_unimodular_levi_civita_lift_has_zero_offset(rng):
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(1.0), KForm.from_terms(3, 3, [(0, 1, 2, 0.7)]))
    D = lifted_base_connection(E, levi_civita_christoffel(E.base, random_metric(rng, 3)))
    assert sup(divergence_of(E, D).offset) < 1e-12


def test_divergence_variation(rng):
    inst = random_exact_instance(rng)
    E = inst.E
    D = random_compatible(E, rng)
    chi = random_compatible(E, rng).coeffs
    Pinv = E.frame.pairing_inverse
    # div_{D + chi}(e') - div_D(e') = -sum <chi_{~E_i} E_i, e'>
    shift = -np.einsum("ai,aib->b", Pinv, chi)
    delta = divergence_of(E, D + chi).covector() - divergence_of(E, D).covector()
    assert sup(delta - shift) < 1e-12


def test_weyl_shift_of_divergence(rng):
    inst = random_exact_instance(rng)
    E = inst.E
    D = random_compatible(E, rng)
    e = rng.normal(size=E.rank)
    chi = weyl_term(E.frame.pairing, E.frame.pairing @ e)
    delta = divergence_of(E, D + chi).covector() - divergence_of(E, D).covector()
    assert sup(delta + (E.rank - 1) * E.frame.pairing @ e) < 1e-12


def test_weyl_decompose_fixed_point(rng):
    inst = random_transitive_instance(rng)
    E = inst.E
    e = rng.normal(size=E.rank)
    chi0, out = weyl_decompose(E, weyl_term(E.frame.pairing, E.frame.pairing @ e))
    assert sup(chi0) < 1e-12
    assert sup(out - e) < 1e-12


def test_weyl_decompose_three_form(rng):
    inst = random_exact_instance(rng)
    r = inst.E.rank
    t = rng.normal(size=(r, r, r))
    t = t - t.transpose(1, 0, 2)
    t = t + np.einsum("bca->abc", t) + np.einsum("cab->abc", t)
    t = t - t.transpose(0, 2, 1)
    t = (t + np.einsum("bca->abc", t) + np.einsum("cab->abc", t)) / 6.0
    _, e = weyl_decompose(inst.E, t)
    assert sup(e) < 1e-12


@given(st.integers(0, 2 ** 31 - 1))
def test_weyl_decompose_reassembles(seed):
    rng = np.random.default_rng(seed)
    inst = random_exact_instance(rng)
    E = inst.E
    chi = random_compatible(E, rng).coeffs
    chi0, e = weyl_decompose(E, chi)
    assert sup(chi0 + weyl_term(E.frame.pairing, E.frame.pairing @ e) - chi) < 1e-13 * max(1, sup(chi))
    assert sup(np.einsum("ij,ijc->c", E.frame.pairing_inverse, chi0)) < 1e-12


def test_weyl_decompose_rank_one():
    from ggflow.gconn import weyl_decompose_frame

    with pytest.raises(ValueError):
        weyl_decompose_frame(np.eye(1), np.zeros((1, 1, 1)))


def test_levi_civita_flat():
    E = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    D = levi_civita(E, build_generalized_metric(E, np.eye(3)))
    assert sup(D.coeffs) == 0.0


def test_levi_civita_pure_blocks_are_one_third_bismut(rng):
    for sign in (+1, -1):
        inst = random_exact_instance(rng, offset="zero")
        E, n = inst.E, inst.E.n
        m = metric_of(inst)
        D = levi_civita(E, m)
        H = read_exact_data(m.split_frame(), n).full()
        Gam = levi_civita_christoffel(E.base, inst.g) + sign * H @ np.linalg.inv(inst.g) / 6.0
        low = Gam @ inst.g
        blk = slice(0, n) if sign > 0 else slice(n, 2 * n)
        pure = D.adapted()[blk, blk, blk]
        assert sup(pure - sign * low) < 1e-11


def test_mixed_blocks_are_bismut(rng):
    inst = random_exact_instance(rng, offset="zero")
    E, n = inst.E, inst.E.n
    m = metric_of(inst)
    D = levi_civita(E, m).adapted()
    H = read_exact_data(m.split_frame(), n).full()
    lc = levi_civita_christoffel(E.base, inst.g)
    plus = (lc + 0.5 * H @ np.linalg.inv(inst.g)) @ inst.g
    minus = (lc - 0.5 * H @ np.linalg.inv(inst.g)) @ inst.g
    assert sup(D[n:, :n, :n] - plus) < 1e-11
    assert sup(D[:n, n:, n:] + minus) < 1e-11


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("transitive", [False, True])
def test_levi_civita_torsion_free_with_prescribed_divergence(seed, transitive):
    rng = np.random.default_rng(seed)
    inst = random_transitive_instance(rng) if transitive else random_exact_instance(rng)
    E = inst.E
    m = metric_of(inst)
    div = divergence_operator(E, inst.offset)
    D = levi_civita(E, m, div)
    assert sup(torsion(E, D)) < 1e-11
    assert sup(divergence_of(E, D).offset - inst.offset) < 1e-12 * max(1.0, sup(inst.offset)) * 10
    assert D.compatibility_defect() < 1e-11


def test_mixed_blocks_independent_of_seed(rng):
    inst = random_transitive_instance(rng)
    E = inst.E
    m = metric_of(inst)
    div = divergence_operator(E, inst.offset)
    A = levi_civita(E, m, div).adapted()
    B = levi_civita(E, m, div, seed="zero").adapted()
    rp = m.r_plus
    assert sup(A[rp:, :rp, :rp] - B[rp:, :rp, :rp]) < 1e-11
    assert sup(A[:rp, rp:, rp:] - B[:rp, rp:, rp:]) < 1e-11


def test_gualtieri_bismut_without_flux_is_lifted_levi_civita(rng):
    base = LieAlgebra.heisenberg(1.0)
    E = CourantAlgebroid.exact(base)
    g = random_metric(rng, 3)
    m = build_generalized_metric(E, g)
    DB = gualtieri_bismut(E, m)
    D0 = lifted_base_connection(E, levi_civita_christoffel(base, g))
    assert sup(DB.coeffs - D0.coeffs) < 1e-12


def test_gualtieri_bismut_divergence_and_torsion_removal(rng):
    inst = random_exact_instance(rng)
    E = inst.E
    m = metric_of(inst)
    DB = gualtieri_bismut(E, m)
    D0 = lifted_base_connection(E, levi_civita_christoffel(E.base, inst.g))
    assert sup(divergence_of(E, DB).offset - divergence_of(E, D0).offset) < 1e-12
    killed = DB + (-torsion(E, DB) / 3.0)
    assert sup(killed.coeffs - levi_civita(E, m).coeffs) < 1e-11


def test_gualtieri_bismut_exact_only(rng):
    inst = random_transitive_instance(rng)
    with pytest.raises(ValueError):
        gualtieri_bismut(inst.E, metric_of(inst))


@given(st.integers(0, 2 ** 31 - 1))
def test_sigma0_elements_keep_torsion_and_divergence(seed):
    rng = np.random.default_rng(seed)
    inst = random_exact_instance(rng)
    E = inst.E
    m = metric_of(inst)
    D = levi_civita(E, m, divergence_operator(E, inst.offset))
    D2 = D + random_sigma0(m, rng)
    assert sup(torsion(E, D2)) < 1e-10
    assert sup(divergence_of(E, D2).offset - inst.offset) < 1e-10
    assert D2.compatibility_defect() < 1e-10


def test_offset_parts_roundtrip(rng):
    inst = random_transitive_instance(rng)
    m = metric_of(inst)
    n, d = inst.E.n, inst.E.fiber_dim
    phi, sigma, r = rng.normal(size=n), rng.normal(size=n), rng.normal(size=d)
    eps = offset_from_parts(m, phi, sigma, r)
    back = offset_parts(m, eps)
    assert sup(back[0] - phi) < 1e-12 and sup(back[1] - sigma) < 1e-12 and sup(back[2] - r) < 1e-12


def test_single_dilaton_form_embeds_as_covector():
    E = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    rng = np.random.default_rng(2)
    m = build_generalized_metric(E, random_metric(rng, 3))
    phi = rng.normal(size=3)
    assert sup(offset_from_parts(m, phi) - E.section(xi=phi)) < 1e-12
    m_b = build_generalized_metric(E, random_metric(rng, 3), random_skew(rng, 3))
    assert sup(E.split(np.linalg.solve(m_b.splitting, offset_from_parts(m_b, phi)))[0]) < 1e-12
