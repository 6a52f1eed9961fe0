import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremebound import problemfile
from extremebound.localization import (LevelSetGrid, audit_containment, compute_r_eps,
                                       compute_s_delta)
from extremebound.polynomial import parse
from extremebound.system import builtin_problem
from extremebound.trajectories import integrate

EX21 = builtin_problem("nonautonomous2d")
V21 = parse("0.5*(1 + x1^2 + x2^2)", EX21.variables)
BOX2 = [(-2.0, 2.0), (-2.0, 2.0)]

ROTATION = problemfile.loads(
    '{"variables": ["x1", "x2"], "dynamics": ["x2", "-x1"], "observable": "x1^2 + x2^2",'
    ' "initial_set": {"equalities": ["x1 - 1", "x2"]}}')


def test_constant_v_fills_grid():
    V = parse("3", EX21.states)
    s = compute_s_delta(V, 3.0, 0.0, EX21, BOX2, 11)
    r = compute_r_eps(V, 0.0, EX21, BOX2, 11)
    assert s.count == r.count == 121


def test_zero_delta_gives_level_set():
    V = parse("x1", EX21.states)
    s = compute_s_delta(V, 0.0, 0.0, EX21, BOX2, 5)
    assert np.all(s.members()[:, 0] == 0.0) and s.count == 5


def test_r_eps_for_quadratic_v_is_an_ellipse():
    r = compute_r_eps(V21.with_variables(EX21.states), 0.1, EX21, BOX2, 41)
    pts = r.points()
    inside = 0.1 * pts[:, 0] ** 2 + pts[:, 1] ** 2 <= 0.1 + 1e-12
    assert np.array_equal(r.mask, inside)


def test_zero_eps_gives_zero_set_of_decay():
    r = compute_r_eps(V21.with_variables(EX21.states), 0.0, EX21, BOX2, 41)
    assert r.count == 1 and np.array_equal(r.members()[0], [0.0, 0.0])


def test_time_dependent_v_needs_time_axis():
    V = parse("t + x1", EX21.variables)
    with pytest.raises(ValueError, match="3 axes"):
        compute_s_delta(V, 1.0, 0.1, EX21, BOX2, 5)
    s = compute_s_delta(V, 1.0, 0.1, EX21, [(0, 1)] + BOX2, 5)
    assert len(s.box) == 3


def test_negative_parameters_rejected():
    with pytest.raises(ValueError):
        compute_s_delta(V21, 1.0, -0.1, EX21, BOX2, 5)
    with pytest.raises(ValueError):
        compute_r_eps(V21, -1.0, EX21, BOX2, 5)
    with pytest.raises(ValueError):
        LevelSetGrid(BOX2, [2, 2], [True, False, True, False], "S", {"lambda": 1.0, "delta": -1.0})
    with pytest.raises(ValueError):
        LevelSetGrid(BOX2, [2, 2], [True], "S", {"lambda": 1.0, "delta": 1.0})


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0, 0.3), st.floats(0, 0.3))
def test_sets_grow_with_their_parameter(d1, d2, e1, e2):
    V = V21.with_variables(EX21.states)
    lo_d, hi_d = sorted((d1, d2))
    lo_e, hi_e = sorted((e1, e2))
    assert compute_s_delta(V, 1.5, lo_d, EX21, BOX2, 21).is_subset_of(
        compute_s_delta(V, 1.5, hi_d, EX21, BOX2, 21))
    assert compute_r_eps(V, lo_e, EX21, BOX2, 21).is_subset_of(
        compute_r_eps(V, hi_e, EX21, BOX2, 21))


def test_intersection_is_bitwise_and():
    V = V21.with_variables(EX21.states)
    s = compute_s_delta(V, 1.5, 0.5, EX21, BOX2, 21)
    r = compute_r_eps(V, 0.3, EX21, BOX2, 21)
    both = s.intersect(r)
    assert both.kind == "AND" and np.array_equal(both.mask, s.mask & r.mask)
    assert both.is_subset_of(s) and both.is_subset_of(r)
    other = compute_r_eps(V, 0.3, EX21, BOX2, 11)
    with pytest.raises(ValueError):
        s.intersect(other)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=200), st.sampled_from(["S", "R", "AND"]))
def test_run_length_round_trip(bits, kind):
    params = {"S": {"lambda": 1.25, "delta": 0.5}, "R": {"eps": 0.1}, "AND": {}}[kind]
    g = LevelSetGrid([(-1.0, 2.5)], [len(bits)], bits, kind, params)
    back = LevelSetGrid.from_rle(g.to_rle())
    assert back.box == g.box and back.resolution == g.resolution and back.kind == kind
    assert np.array_equal(back.mask, g.mask)
    if kind != "AND":
        assert back.params == params


def test_run_length_layout():
    g = LevelSetGrid([(0.0, 1.0)], [5], [0, 0, 1, 1, 1], "R", {"eps": 0.5})
    data = g.to_rle()
    assert data[:4] == b"EBRL" and data[4] == 1 and data[5] == 1
    # header 6 + axis 20 + kind/params 17 + first/nruns 5 + 2 runs * 4
    assert len(data) == 6 + 20 + 17 + 5 + 8
    with pytest.raises(ValueError):
        LevelSetGrid.from_rle(b"XXXX" + data[4:])


def test_csv_export(tmp_path):
    g = compute_r_eps(V21.with_variables(EX21.states), 0.1, EX21, BOX2, 3)
    path = tmp_path / "r.csv"
    g.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "coord1,coord2,member"
    assert lines[5] == "0.0,0.0,1"
    assert len(lines) == 10


def test_audit_conserved_quantity_never_leaves():
    V = parse("x1^2 + x2^2", ROTATION.states)
    tr = integrate(ROTATION, [1.0, 0.0], 5.0)
    audit = audit_containment(V, 1.0, 1e-8, 1e-3, tr, ROTATION)
    assert audit.applicable and audit.in_s_delta_until_t_star
    assert audit.time_outside_r_eps == 0.0 and audit.within_budget


def test_audit_not_applicable_when_level_never_reached():
    V = parse("x1^2 + x2^2", ROTATION.states)
    tr = integrate(ROTATION, [1.0, 0.0], 2.0)
    audit = audit_containment(V, 5.0, 0.1, 0.1, tr, ROTATION)
    assert not audit.applicable and math.isnan(audit.time_outside_r_eps)


def test_audit_quadratic_certificate_budget():
    # Phi = x1 reaches its max 0.30056373 while V = 1 throughout
    tr = integrate(EX21, [0.0, 1.0], 3.0)
    lam, delta, eps = 1.0, 0.7, 0.5
    audit = audit_containment(V21, lam, delta, eps, tr, EX21)
    assert audit.applicable and audit.within_budget
    # independent measurement: the whole trajectory up to t* with the exact decay rate
    ts = np.linspace(0, audit.t_star, 20001)
    xs = tr(ts)
    decay = 0.1 * xs[:, 0] ** 2 + xs[:, 1] ** 2
    assert audit.time_outside_r_eps == pytest.approx(np.mean(decay > eps) * audit.t_star, abs=2e-3)


def test_audit_with_degree_14_fixture(focus_v14):
    spec = builtin_problem("unstableFocus2d")
    V = parse(focus_v14["V"], focus_v14["variables"])
    lam = focus_v14["lambda"]
    rng = np.random.default_rng(4)
    for theta in rng.uniform(0, 2 * math.pi, 6):
        tr = integrate(spec, spec.x0_parameterization([theta]), 20.0)
        audit = audit_containment(V, lam, 0.002, 0.008, tr, spec)
        if audit.applicable:
            assert audit.time_outside_r_eps <= audit.budget + audit.slack
