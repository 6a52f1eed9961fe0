import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from extremebound import problemfile
from extremebound.polynomial import parse
from extremebound.system import builtin_problem
from extremebound.trajectories import (IntegrationError, NoPeriodicOrbit, VectorField,
                                       check_certificate, integrate, limit_cycle, lower_bound,
                                       max_on_limit_cycle, trajectory_max)

from analytic import moving_bump_v, plateau_v

QUAD = builtin_problem("quadratic1d")


def exact_quadratic(x0, t):
    return x0 / (1 - x0 * t)


def test_quadratic_solution():
    tr = integrate(QUAD, [-1.0], 1.0)
    assert tr.final_state[0] == pytest.approx(-0.5, abs=1e-8)
    assert not tr.blowup and tr.t_end == 1.0


def test_quadratic_blowup_is_flagged():
    tr = integrate(QUAD, [1.0], 2.0)
    assert tr.blowup
    assert tr.escape_time == pytest.approx(1.0, abs=1e-6)


def test_equilibrium_stays_put():
    tr = integrate(QUAD, [0.0], 5.0)
    assert np.all(tr.states == 0.0) and tr.t_end == 5.0


def test_step_underflow_raises_with_last_state():
    with pytest.raises(IntegrationError) as info:
        integrate(QUAD, [1.0], 2.0, norm_cap=math.inf)
    last = info.value.trajectory
    assert last.t_end < 1.0 and np.isfinite(last.final_state).all()


def test_nonfinite_start_rejected():
    with pytest.raises(ValueError):
        integrate(QUAD, [math.nan], 1.0)


def test_dense_output_matches_exact_solution():
    tr = integrate(QUAD, [-2.0], 3.0, rel_tol=1e-10, abs_tol=1e-12)
    ts = np.linspace(0, 3, 301)
    err = np.abs(tr(ts)[:, 0] - exact_quadratic(-2.0, ts))
    assert err.max() < 1e-8
    with pytest.raises(ValueError):
        tr(3.5)


def test_observed_order_at_least_four():
    steps, errors = [], []
    for tol in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9):
        tr = integrate(QUAD, [-1.0], 1.0, rel_tol=tol, abs_tol=tol * 1e-2)
        steps.append(len(tr.times) - 1)
        errors.append(abs(tr.final_state[0] + 0.5))
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert -slope >= 4.0


def test_agrees_with_reference_integrator():
    spec = builtin_problem("nonautonomous2d")
    vf = VectorField(spec)
    ours = integrate(spec, [0.0, 1.0], 4.0, rel_tol=1e-11, abs_tol=1e-13)
    ref = solve_ivp(vf, (0, 4), [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14,
                    dense_output=True)
    ts = np.linspace(0, 4, 81)
    assert np.max(np.abs(ours(ts) - ref.sol(ts).T)) < 1e-8


def test_vector_field_matches_polynomials():
    spec = builtin_problem("vanDerPol")
    vf = VectorField(spec)
    for p in ([0.1, 0.3, -0.2], [2.0, -1.0, 0.5]):
        expect = [f.evaluate(p) for f in spec.dynamics]
        assert np.allclose(vf(p[0], p[1:]), expect, rtol=1e-14, atol=1e-14)


def test_trajectory_max_and_csv(tmp_path):
    spec = builtin_problem("nonautonomous2d")
    tr = integrate(spec, [0.0, 1.0], 4.0)
    best, when = trajectory_max(tr, spec)
    assert best == pytest.approx(0.30056373, abs=1e-7)
    assert when == pytest.approx(1.6635, abs=1e-3)
    path = tmp_path / "traj.csv"
    tr.to_csv(path, spec)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,phi"
    assert len(lines) == len(tr.times) + 1


def test_lower_bound_point_problem():
    lb = lower_bound(builtin_problem("nonautonomous2d", {"x0": "point"}))
    assert lb.value == pytest.approx(0.30056373, abs=1e-7)
    assert list(lb.x0) == [0.0, 1.0]


def test_lower_bound_when_maximum_is_initial_value():
    # x' = -x from x = 1: Phi = x peaks at t0
    doc = ('{"variables": ["x"], "dynamics": ["-x"], "observable": "x", "t0": 0,'
           ' "horizon": {"type": "finite", "T": 2}, "initial_set": {"equalities": ["x - 1"]}}')
    lb = lower_bound(problemfile.loads(doc))
    assert lb.value == 1.0 and lb.time == 0.0


def test_lower_bound_is_deterministic_under_seed():
    spec = builtin_problem("unstableFocus2d", {"horizon": 2})
    a = lower_bound(spec, starts=6, seed=3)
    b = lower_bound(spec, starts=6, seed=3)
    assert a.value == b.value and np.array_equal(a.x0, b.x0)


def test_lower_bound_needs_parameterization():
    spec = builtin_problem("burgers", {"N": 3})
    with pytest.raises(ValueError, match="parameterization"):
        lower_bound(spec)


def test_semistable_trajectories_never_exceed_zero():
    spec = builtin_problem("cubicSemistable1d")
    lb = lower_bound(spec, starts=12, t_end=200.0)
    assert lb.value <= 1e-6


# -- certificates ------------------------------------------------------------


def test_quadratic_certificate_passes():
    spec = builtin_problem("nonautonomous2d")
    V = parse("0.5*(1 + x1^2 + x2^2)", spec.variables)
    rep = check_certificate(V, spec, [(0, 5), (-3, 3), (-3, 3)], 41, tol=1e-9)
    assert rep.passed
    assert rep.max_lie_violation <= 0.0 and rep.grid_size == 41 ** 3


def test_moving_bump_certificate_passes():
    V = moving_bump_v(-0.75)
    rep = check_certificate(V, QUAD, [(0, 4), (-2, 0)], [41, 81], tol=1e-9)
    assert rep.passed, rep.to_dict()
    assert V(0.0, [-0.75]) == 0.0


def test_plateau_certificate_passes():
    rep = check_certificate(plateau_v, QUAD, [(0, 1), (-2, 5)], [11, 141], tol=1e-9)
    assert rep.passed, rep.to_dict()


def test_zero_function_fails_where_observable_is_positive():
    spec = builtin_problem("nonautonomous2d")
    rep = check_certificate(parse("0", spec.variables), spec, [(0, 1), (-1, 1), (-1, 1)], 5)
    assert not rep.passed
    assert rep.max_phi_violation == pytest.approx(1.0)
    assert rep.phi_argmax[1] == 1.0


def test_report_serializes():
    spec = builtin_problem("nonautonomous2d")
    rep = check_certificate(parse("0.5", spec.variables), spec, [(-1, 1), (-1, 1)], 3)
    d = rep.to_dict()
    assert set(d) == {"maxLieViolation", "lieArgmax", "maxPhiViolation", "phiArgmax", "gridSize",
                      "tol", "pass"}
    assert d["pass"] is False and d["gridSize"] == 9


# -- periodic orbits ---------------------------------------------------------


def test_van_der_pol_limit_cycle():
    spec = builtin_problem("vanDerPol")
    cyc = limit_cycle(spec)
    assert cyc.max_observable == pytest.approx(0.889856, abs=1e-3)
    tighter = limit_cycle(spec, rel_tol=5e-12, abs_tol=5e-14)
    assert tighter.period == pytest.approx(cyc.period, rel=1e-6)


def test_zero_observable_on_limit_cycle():
    spec = builtin_problem("vanDerPol")
    spec = spec.replace(observable=parse("0", spec.variables))
    assert max_on_limit_cycle(spec) == 0.0


def test_no_periodic_orbit_for_decaying_system():
    doc = ('{"variables": ["x1", "x2"], "dynamics": ["-x1", "-x2"], "observable": "x1",'
           ' "initial_set": {"equalities": ["x1 - 1", "x2"]}}')
    with pytest.raises(NoPeriodicOrbit):
        limit_cycle(problemfile.loads(doc))


# -- Burgers -----------------------------------------------------------------


def _burgers_bound(phi0):
    return (phi0 ** (1 / 3) + 2 ** (-10 / 3) * math.pi ** (-8 / 3) * phi0) ** 3


@pytest.mark.parametrize("phi0", [1.0, 10.0])
def test_burgers_energy_decays_and_bound_holds(phi0):
    spec = builtin_problem("burgers", {"N": 8, "phi0": phi0})
    rng = np.random.default_rng(0)
    for _ in range(3):
        a0 = spec.x0_parameterization(rng.uniform(-1, 1, 8))
        tr = integrate(spec, a0, 0.3)
        ts = tr.refined_times(4)
        norms = np.linalg.norm(tr(ts), axis=1)
        assert np.all(np.diff(norms) <= 1e-8)
        assert trajectory_max(tr, spec)[0] <= _burgers_bound(phi0)
