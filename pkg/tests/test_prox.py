import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gimvi_dyn.core import make_rng
from gimvi_dyn.errors import InnerSolveFailed
from gimvi_dyn.prox import FeasibleSet, HSpec, check_prox_inequalities, prox, prox_inner

from oracles import box_quadratic_kkt, prox_grid_2d

SETS = {
    "whole-space": FeasibleSet.whole_space(),
    "box": FeasibleSet.box([-1.0, 0.0, -2.0], [1.0, 0.5, 2.0]),
    "ball": FeasibleSet.ball([0.5, -0.5, 0.0], 1.5),
}
HS = {
    "zero": HSpec.zero(),
    "linear": HSpec.linear([0.3, -0.2, 0.1]),
    "quadratic": HSpec.quadratic([1.0, 0.5, 2.0]),
}
FAMILIES = [(s, h) for s in SETS for h in HS]


def test_whole_space_zero_is_identity():
    assert np.array_equal(prox(FeasibleSet.whole_space(), HSpec.zero(), 3.7, [3.0, -7.0]), [3.0, -7.0])


def test_box_projection_clamps():
    box = FeasibleSet.box([0.0, 0.0], [1.0, 1.0])
    assert np.array_equal(prox(box, HSpec.zero(), 1.0, [2.0, -1.0]), [1.0, 0.0])


def test_quadratic_prox_matches_grid_search():
    h = HSpec.quadratic([1.0, 1.0])
    got = prox(FeasibleSet.whole_space(), h, 1.0, [2.0, 4.0])
    grid = prox_grid_2d([2.0, 4.0], 1.0, lambda V: 0.5 * np.sum(V**2, axis=-1))
    assert np.allclose(got, [1.0, 2.0], atol=1e-12)
    assert np.allclose(got, grid, atol=5e-3)


@pytest.mark.parametrize("set_name,h_name", FAMILIES)
def test_closed_form_matches_inner_solver(set_name, h_name):
    omega, h = SETS[set_name], HS[h_name]
    rng = make_rng(5)
    for w in 3 * rng.standard_normal((100, 3)):
        for gamma in (0.3, 1.7):
            assert np.linalg.norm(prox(omega, h, gamma, w) - prox_inner(omega, h, gamma, w)) <= 1e-8


def test_box_quadratic_matches_kkt_oracle():
    lo, hi = np.array([-1.0, 0.0, -2.0]), np.array([1.0, 0.5, 2.0])
    q = np.array([1.0, 0.5, 2.0])
    rng = make_rng(1)
    for w in 4 * rng.standard_normal((50, 3)):
        got = prox(FeasibleSet.box(lo, hi), HSpec.quadratic(q), 0.8, w)
        assert np.allclose(got, box_quadratic_kkt(w, 0.8, q, lo, hi), atol=1e-14)


def test_whole_space_zero_audit_slacks_vanish():
    rep = check_prox_inequalities(FeasibleSet.whole_space(), HSpec.zero(), 1.0, 200, 0, dim=3)
    for v in rep.worst.values():
        assert abs(v) <= 1e-12


def test_box_zero_audit_has_no_violations():
    box = FeasibleSet.box(np.zeros(4), np.ones(4))
    rep = check_prox_inequalities(box, HSpec.zero(), 1.0, 1000, 3)
    assert rep.ok, rep.violations


def test_box_quadratic_characterization_holds():
    box = FeasibleSet.box(-np.ones(3), np.ones(3))
    rep = check_prox_inequalities(box, HSpec.quadratic([0.5, 1.0, 2.0]), 0.7, 1000, 4)
    assert rep.worst["characterization"] >= -1e-9
    assert rep.worst["obtuse_angle"] is None


def test_interior_points_are_fixed():
    rng = make_rng(2)
    box, ball = SETS["box"], SETS["ball"]
    for omega, mid in ((box, (box.lo + box.hi) / 2), (ball, ball.center)):
        for u in omega.sample(rng, 50, 3):
            inner = 0.5 * (u + mid)
            assert np.array_equal(prox(omega, HSpec.zero(), 1.0, inner), inner)


def test_custom_h_uses_inner_solver():
    h = HSpec.custom(lambda v: 0.5 * float(v @ v), lambda v: v, 1.0)
    got = prox(FeasibleSet.whole_space(), h, 1.0, np.array([2.0, 4.0]))
    assert np.allclose(got, [1.0, 2.0], atol=1e-9)


def test_inner_solver_reports_iteration_cap():
    h = HSpec.quadratic([1.0, 3.0])
    with pytest.raises(InnerSolveFailed):
        prox_inner(FeasibleSet.whole_space(), h, 1.0, [5.0, 5.0], tol=0.0, max_iter=3)


def test_serialization_round_trip():
    for omega in SETS.values():
        assert FeasibleSet.from_dict(omega.to_dict()).to_dict() == omega.to_dict()
    for h in HS.values():
        assert HSpec.from_dict(h.to_dict()).to_dict() == h.to_dict()


vec3 = arrays(np.float64, 3, elements=st.floats(-50, 50))


@given(vec3, vec3, st.sampled_from(FAMILIES), st.floats(0.05, 5.0))
@settings(max_examples=200, deadline=None)
def test_prox_is_nonexpansive(w, v, family, gamma):
    omega, h = SETS[family[0]], HS[family[1]]
    gap = np.linalg.norm(prox(omega, h, gamma, w) - prox(omega, h, gamma, v))
    assert gap <= np.linalg.norm(w - v) + 1e-9


@given(vec3, st.sampled_from(FAMILIES), st.floats(0.05, 5.0), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_prox_point_satisfies_characterization(w, family, gamma, seed):
    omega, h = SETS[family[0]], HS[family[1]]
    p = prox(omega, h, gamma, w)
    assert omega.contains(p, 1e-12)
    scale = 1 + np.linalg.norm(w)
    for u in omega.sample(make_rng(seed), 100, 3, scale=5.0):
        slack = (p - w) @ (u - p) + gamma * h(u) - gamma * h(p)
        assert slack >= -1e-9 * scale * (1 + np.linalg.norm(u - p))
