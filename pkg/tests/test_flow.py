from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sup
from ggflow.courant import CourantAlgebroid, QuadraticFiber
from ggflow.flow import (
    FlowError,
    FlowState,
    flow_rhs,
    integrate_flow,
    stationarity_residual,
    t3_flux_radius,
)
from ggflow.instances import random_exact_instance, random_transitive_instance
from ggflow.lie import FrameMetric, KForm, LieAlgebra, hodge_codiff


def flux_torus(k: float) -> CourantAlgebroid:
    return CourantAlgebroid.exact(LieAlgebra.abelian(3), KForm.from_terms(3, 3, [(0, 1, 2, k)]))


def scalar_state(f: float, n: int = 3) -> FlowState:
    return FlowState(f * np.eye(n), np.zeros((n, n)))


def rk4_error(f0: float, k: float, dt: float, t_end: float = 1.0, scheme: str = "rk4") -> float:
    traj = integrate_flow(flux_torus(k), scalar_state(f0), t_end, dt, scheme=scheme)
    return abs(traj[-1].g[0, 0] - t3_flux_radius(f0, k, t_end))


def test_flat_torus_is_stationary():
    E = CourantAlgebroid.exact(LieAlgebra.abelian(4))
    state = scalar_state(1.3, 4)
    out = flow_rhs(E, state)
    assert sup(out.dg) == 0.0 and sup(out.db) == 0.0
    traj = integrate_flow(E, state, 0.1, 0.01)
    assert len(traj) == 11
    for s in traj:
        np.testing.assert_array_equal(s.g, state.g)
        np.testing.assert_array_equal(s.b, state.b)


@pytest.mark.parametrize("f", [0.7, 1.0, 2.5])
@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_flux_torus_rhs(f, k):
    out = flow_rhs(flux_torus(k), scalar_state(f))
    np.testing.assert_allclose(out.dg, (k ** 2 / f ** 2) * np.eye(3), atol=1e-13)
    assert sup(out.db) < 1e-14


def test_both_ricci_routes_give_the_same_rhs(rng):
    for _ in range(5):
        inst = random_exact_instance(rng, (3, 5))
        state = FlowState(inst.g, inst.b, None, inst.offset)
        closed = flow_rhs(inst.E, state, route="closed")
        trace = flow_rhs(inst.E, state, route="trace")
        assert sup(closed.dg - trace.dg) < 1e-9
        assert sup(closed.db - trace.db) < 1e-9


def test_gauge_rhs_is_minus_codifferential_of_curvature():
    base = LieAlgebra.heisenberg(1.0)
    fiber = QuadraticFiber.abelian([[1.0]])
    F = np.zeros((3, 3, 1))
    F[:, :, 0] = KForm.from_terms(3, 2, [(0, 1, 1.0)]).full()
    E = CourantAlgebroid.transitive(base, fiber, F)
    g = np.diag([1.0, 2.0, 0.5])
    out = flow_rhs(E, FlowState(g, np.zeros((3, 3)), np.zeros((3, 1))))
    codiff = hodge_codiff(base, FrameMetric(g), KForm.from_full(F[:, :, 0])).coeffs
    assert sup(codiff) > 0.1
    np.testing.assert_allclose(out.dtheta[:, 0], -codiff, atol=1e-12)


def test_flux_torus_ode_solution_at_unit_time():
    for f0, k in [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0)]:
        traj = integrate_flow(flux_torus(k), scalar_state(f0), 1.0, 1e-3)
        g = traj[-1].g
        assert abs(traj[-1].t - 1.0) < 1e-12
        np.testing.assert_allclose(g, t3_flux_radius(f0, k, 1.0) * np.eye(3), atol=1e-6)


def test_rk4_error_ratio_is_sixteen():
    coarse = rk4_error(1.0, 2.0, 0.1)
    fine = rk4_error(1.0, 2.0, 0.05)
    assert 13.0 < coarse / fine < 19.0


def test_euler_error_ratio_is_two():
    coarse = rk4_error(1.0, 1.0, 0.02, scheme="euler")
    fine = rk4_error(1.0, 1.0, 0.01, scheme="euler")
    assert 1.8 < coarse / fine < 2.2


@pytest.mark.parametrize("k", [0.5, 1.0, 3.0])
def test_stationarity_residual_values(k):
    assert stationarity_residual(flux_torus(k), scalar_state(1.0)) == pytest.approx(k ** 2 / 2, rel=1e-12)
    heis = CourantAlgebroid.exact(LieAlgebra.heisenberg(k))
    assert stationarity_residual(heis, scalar_state(1.0)) == pytest.approx(k ** 2 / 2, rel=1e-12)
    flat = CourantAlgebroid.exact(LieAlgebra.abelian(3))
    assert stationarity_residual(flat, scalar_state(1.0)) == 0.0


def test_symmetry_class_preserved(rng):
    inst = random_exact_instance(rng, (4, 5))
    traj = integrate_flow(inst.E, FlowState(inst.g, inst.b, None, inst.offset), 0.02, 0.005)
    for s in traj:
        assert sup(s.g - s.g.T) == 0.0
        assert sup(s.b + s.b.T) == 0.0


def test_transitive_flow_runs_and_keeps_shift(rng):
    inst = random_transitive_instance(rng, (3, 4), fiber_kind="su2")
    state = FlowState(inst.g, inst.b, inst.a, inst.offset)
    traj = integrate_flow(inst.E, state, 0.01, 0.005)
    assert traj[-1].a.shape == inst.a.shape
    out = flow_rhs(inst.E, state, route="trace")
    ref = flow_rhs(inst.E, state, route="closed")
    assert sup(out.da - ref.da) < 1e-9


def test_plus_and_minus_equations_agree_under_skew_symmetry(rng):
    for _ in range(6):
        inst = random_exact_instance(rng, (3, 5), closed_phi=True, offset="phi")
        state = FlowState(inst.g, inst.b, None, inst.offset)
        plus = flow_rhs(inst.E, state, chirality=1)
        minus = flow_rhs(inst.E, state, chirality=-1)
        assert sup(plus.dg - minus.dg) < 1e-9
        assert sup(plus.db - minus.db) < 1e-9


def test_plus_and_minus_equations_differ_for_non_closed_dilaton():
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(1.0))
    state = FlowState(np.eye(3), np.zeros((3, 3)), None, E.section(xi=[0.0, 0.0, 1.0]))
    plus = flow_rhs(E, state, chirality=1)
    minus = flow_rhs(E, state, chirality=-1)
    assert sup(plus.db - minus.db) > 1e-3


def test_minus_equation_rejects_transitive(rng):
    inst = random_transitive_instance(rng, (3, 3), fiber_kind="u1")
    with pytest.raises(ValueError):
        flow_rhs(inst.E, FlowState(inst.g, inst.b, inst.a, inst.offset), chirality=-1)


@given(split=st.integers(1, 7))
def test_semigroup_property(split):
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(0.8))
    state = FlowState(np.diag([1.0, 1.4, 0.9]), np.zeros((3, 3)))
    dt = 0.01
    whole = integrate_flow(E, state, 8 * dt, dt)[-1]
    first = integrate_flow(E, state, split * dt, dt)[-1]
    second = integrate_flow(E, first, (8 - split) * dt, dt)[-1]
    assert sup(whole.g - second.g) < 1e-12
    assert abs(whole.t - second.t) < 1e-12


def test_heisenberg_flow_shrinks_centre_direction():
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(1.0))
    traj = integrate_flow(E, scalar_state(1.0), 0.2, 0.01)
    g = traj[-1].g
    assert g[2, 2] < 1.0 < g[0, 0]
    assert g[0, 0] == pytest.approx(g[1, 1], abs=1e-13)


def test_offset_schedule_hook_is_used():
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(1.0))
    calls = []

    def schedule(t):
        calls.append(t)
        return np.zeros(6)

    integrate_flow(E, scalar_state(1.0), 0.02, 0.01, scheme="euler", eps_schedule=schedule)
    assert calls == pytest.approx([0.0, 0.01])


@pytest.mark.parametrize("dt", [0.0, -0.1])
def test_non_positive_step_rejected(dt):
    with pytest.raises(ValueError):
        integrate_flow(flux_torus(1.0), scalar_state(1.0), 1.0, dt)


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        integrate_flow(flux_torus(1.0), scalar_state(1.0), 0.1, 0.01, scheme="leapfrog")


def test_degenerate_metric_rejected():
    with pytest.raises(FlowError):
        integrate_flow(flux_torus(1.0), scalar_state(-1.0), 0.1, 0.01)


def test_positivity_loss_aborts():
    # the Heisenberg centre direction shrinks; a huge step overshoots zero
    E = CourantAlgebroid.exact(LieAlgebra.heisenberg(3.0))
    with pytest.raises(FlowError, match="positivity"):
        integrate_flow(E, scalar_state(1.0), 1.0, 0.5, scheme="euler")


def test_blow_up_cap():
    with pytest.raises(FlowError, match="blow-up"):
        integrate_flow(flux_torus(1.0), scalar_state(1.0), 1.0, 0.1, cap=1.05)
