"""Adaptive integration, lower-bound search over initial sets and grid checks of V."""
from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .polynomial import Polynomial
from .system import TIME, ProblemSpec, build_omega, lie_derivative

log = logging.getLogger(__name__)


class IntegrationError(RuntimeError):
    """Step size underflow; ``trajectory`` holds everything up to the last good state."""

    def __init__(self, message: str, trajectory: "Trajectory"):
        super().__init__(message)
        self.trajectory = trajectory


class NoPeriodicOrbit(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# vector field


class VectorField:
    """Polynomial right-hand side compiled to straight-line Python.

    Generated source multiplies plain floats, which for the small systems
    handled here is several times faster than numpy calls on short arrays.
    """

    def __init__(self, spec: ProblemSpec):
        names = ["t"] + [f"x{i}" for i in range(spec.n)]
        lines = ["def field(t, x):"]
        if spec.n:
            lines.append("    " + ", ".join(names[1:]) + (", = x" if spec.n == 1 else " = x"))
        comps = []
        for f in spec.dynamics:
            terms = []
            for m, c in sorted(f.terms.items()):
                factors = [repr(float(c))]
                for name, e in zip(names, m):
                    if e == 1:
                        factors.append(name)
                    elif e > 1:
                        factors.append(f"{name}**{int(e)}")
                terms.append("*".join(factors))
            comps.append(" + ".join(terms) if terms else "0.0")
        lines.append("    return _array([" + ", ".join(comps) + "])")
        scope = {"_array": np.array}
        exec(compile("\n".join(lines), f"<field {spec.name}>", "exec"), scope)
        self._fn = scope["field"]

    def __call__(self, t: float, x) -> np.ndarray:
        return self._fn(t, x)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array(_A[6] + [0.0])
_A = [np.array(row) for row in _A]
# fifth minus fourth order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension of Hairer and Wanner
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799,
               -10690763975 / 1880347072, 701980252875 / 199316789632,
               -1453857185 / 822651844, 69997945 / 29380423])

_SAFETY = 0.9
_BETA = 0.04
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass
class Trajectory:
    """Accepted steps of one integration.

    ``dense[i]`` holds five coefficient rows for the interpolant on
    [times[i], times[i+1]].
    """

    times: np.ndarray
    states: np.ndarray
    dense: list = field(default_factory=list, repr=False)
    blowup: bool = False
    escape_time: float | None = None

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t):
        """States at time(s) ``t`` from the dense output."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        if len(self.times) == 1:
            out = np.repeat(self.states[:1], len(ts), axis=0)
            return out[0] if scalar else out
        if ts.min() < self.times[0] - 1e-12 or ts.max() > self.times[-1] + 1e-12:
            raise ValueError("time outside the integrated interval")
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, len(self.dense) - 1)
        coef = self._coefficients()[idx]
        h = self.times[idx + 1] - self.times[idx]
        s = ((ts - self.times[idx]) / h)[:, None]
        s1 = 1.0 - s
        out = coef[:, 0] + s * (coef[:, 1] + s1 * (coef[:, 2] + s * (coef[:, 3] + s1 * coef[:, 4])))
        return out[0] if scalar else out

    def _coefficients(self) -> np.ndarray:
        if getattr(self, "_coef_cache", None) is None or len(self._coef_cache) != len(self.dense):
            self._coef_cache = np.array(self.dense)
        return self._coef_cache

    def refined_times(self, per_step: int = 10) -> np.ndarray:
        """``per_step`` equal subintervals inside every accepted step."""
        if len(self.times) == 1:
            return self.times.copy()
        frac = np.arange(per_step) / per_step
        h = np.diff(self.times)
        inner = (self.times[:-1, None] + h[:, None] * frac[None, :]).ravel()
        return np.append(inner, self.times[-1])

    def observable(self, spec: ProblemSpec, times=None) -> np.ndarray:
        ts = self.times if times is None else np.asarray(times, dtype=float)
        xs = self.states if times is None else self(ts)
        return observable_values(spec, ts, xs)

    def to_csv(self, path, spec: ProblemSpec, times=None):
        """Write ``t,x1..xn,phi`` rows at the step times (or given times)."""
        ts = self.times if times is None else np.asarray(times, dtype=float)
        xs = self.states if times is None else self(ts)
        phi = observable_values(spec, ts, xs)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{i + 1}" for i in range(xs.shape[1])] + ["phi"])
            for t, x, p in zip(ts, xs, phi):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(p))])


def observable_values(spec: ProblemSpec, times, states) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    states = np.asarray(states, dtype=float).reshape(len(times), spec.n)
    if spec.observable_fn is not None:
        return np.array([spec.phi_value(t, x) for t, x in zip(times, states)])
    return spec.observable.evaluate_many(np.column_stack([times, states]))


def _initial_step(f, t, y, k1, direction_len, rtol, atol):
    sk = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / sk) ** 2))
    d1 = np.sqrt(np.mean((k1 / sk) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_len)
    k2 = f(t + h0, y + h0 * k1)
    d2 = np.sqrt(np.mean(((k2 - k1) / sk) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_len)


def integrate(spec: ProblemSpec, x0, t_end: float, t0: float | None = None,
              rel_tol: float = 1e-10, abs_tol: float = 1e-12, norm_cap: float = 1e8,
              max_steps: int = 1_000_000, field_fn: Callable | None = None) -> Trajectory:
    """Dormand-Prince 5(4) with PI step control and dense output.

    Stops at ``t_end`` or as soon as ||x|| exceeds ``norm_cap`` (blowup flag).
    Raises IntegrationError on step underflow.
    """
    f = field_fn or VectorField(spec)
    t = float(spec.t0 if t0 is None else t0)
    y = np.asarray(x0, dtype=float).reshape(spec.n).copy()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state must be finite")
    times, states, dense = [t], [y.copy()], []
    traj = Trajectory(np.array(times), np.array(states), dense)
    if t_end <= t:
        return traj
    k = np.empty((7, spec.n))
    k[0] = f(t, y)
    h = _initial_step(f, t, y, k[0], t_end - t, rel_tol, abs_tol)
    err_old = 1e-4
    rejected = False
    blowup, escape = False, None
    for _ in range(max_steps):
        if t >= t_end:
            break
        if h < 1e-14 * max(1.0, abs(t)):
            traj = Trajectory(np.array(times), np.array(states), dense)
            raise IntegrationError(f"step size underflow at t = {t!r}", traj)
        last = t + h >= t_end
        if last:
            h = t_end - t
        for i in range(1, 6):
            k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
        y_new = y + h * (_B[:6] @ k[:6])
        k[6] = f(t + h, y_new)
        sk = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_vec = (_E @ k) * h / sk
        err = math.sqrt(float(err_vec @ err_vec) / spec.n) if spec.n else 0.0
        if not math.isfinite(err):
            err = math.inf
        if err <= 1.0:
            ydiff = y_new - y
            bspl = h * k[0] - ydiff
            rcont = np.array([y, ydiff, bspl, ydiff - h * k[6] - bspl, h * (_D @ k)])
            t = t_end if last else t + h
            y = y_new
            k[0] = k[6]
            times.append(t)
            states.append(y.copy())
            dense.append(rcont)
            norm = math.sqrt(float(y @ y))
            if not math.isfinite(norm) or norm > norm_cap:
                blowup, escape = True, t
                break
            fac = err ** (0.2 - 0.75 * _BETA) / err_old ** _BETA / _SAFETY
            fac = min(1 / _FAC_MIN, max(1 / _FAC_MAX, fac))
            h_new = h / fac
            if rejected:
                h_new = min(h_new, h)
            err_old = max(err, 1e-4)
            rejected = False
            h = h_new
        else:
            rejected = True
            fac = (err ** (0.2 - 0.75 * _BETA) / _SAFETY) if math.isfinite(err) else 1 / _FAC_MIN
            h = h / min(1 / _FAC_MIN, fac)
    return Trajectory(np.array(times), np.array(states), dense, blowup, escape)


# ---------------------------------------------------------------------------
# maximum of the observable along one trajectory


def trajectory_max(traj: Trajectory, spec: ProblemSpec, per_step: int = 8) -> tuple[float, float]:
    """(max Phi, time of max), sampled inside steps and polished by Brent's method."""
    ts = traj.refined_times(per_step)
    vals = traj.observable(spec, ts)
    i = int(np.argmax(vals))
    best, t_best = float(vals[i]), float(ts[i])
    if len(ts) < 3:
        return best, t_best
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
    if hi > lo:
        res = minimize_scalar(lambda s: -float(traj.observable(spec, [s])[0]),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(hi))})
        if res.success and -res.fun > best:
            best, t_best = float(-res.fun), float(res.x)
    return best, t_best


# ---------------------------------------------------------------------------
# lower bounds by multistart search over X0


@dataclass
class LowerBound:
    value: float
    x0: np.ndarray
    parameter: np.ndarray
    time: float
    evaluations: int
    window: float
    starts: int


def _start_points(param, starts: int, rng) -> list:
    dim = getattr(param, "dimension", 0)
    if dim == 0:
        return [np.zeros(0)]
    bounds = np.array(param.bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if dim == 1:
        # Evenly spaced starts cover a 1-D set better than random ones.
        width = (hi - lo) / starts
        return [lo + width * (k + 0.5) for k in range(starts)]
    return [lo + (hi - lo) * rng.random(dim) for _ in range(starts)]


def lower_bound(spec: ProblemSpec, starts: int = 16, t_end: float | None = None,
                seed: int = 0, local_searches: int = 4, max_evals: int = 400,
                rel_tol: float = 1e-10, abs_tol: float = 1e-12, window: float = 10.0,
                max_window: float = 1e4, saturation_tol: float = 1e-9) -> LowerBound:
    """Largest Phi found along trajectories started from a search over X0.

    Every start is integrated once; local searches then run from the best
    ``local_searches`` of them (Brent's method on one parameter, Nelder-Mead
    on several).  The result is a valid lower bound on the maximum, not a
    certified global one.  Finite horizons integrate to T (or ``t_end``);
    infinite ones start with a window that doubles until the best value
    changes by less than ``saturation_tol``.
    """
    param = spec.x0_parameterization
    if param is None:
        raise ValueError(f"{spec.name or 'problem'} has no parameterization of its initial set")
    dim = getattr(param, "dimension", 0)
    bounds = np.array(getattr(param, "bounds", []), dtype=float).reshape(dim, 2)
    periodic = getattr(param, "periodic", False)
    vf = VectorField(spec)
    rng = np.random.default_rng(seed)
    evals = 0

    def run(u, T):
        nonlocal evals
        evals += 1
        x0 = param(u)
        if x0 is None:
            return -math.inf, math.nan, None
        try:
            traj = integrate(spec, x0, T, rel_tol=rel_tol, abs_tol=abs_tol, field_fn=vf)
        except IntegrationError as exc:
            log.warning("skipping start %s: %s", np.asarray(x0), exc)
            return -math.inf, math.nan, None
        v, tm = trajectory_max(traj, spec)
        return v, tm, np.asarray(x0, dtype=float)

    def local(u0, T):
        if dim == 1:
            w = (bounds[0, 1] - bounds[0, 0]) / max(starts, 1)
            lo, hi = u0[0] - w, u0[0] + w
            if not periodic:
                lo, hi = max(lo, bounds[0, 0]), min(hi, bounds[0, 1])
            res = minimize_scalar(lambda s: -run(np.array([s]), T)[0], bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-10, "maxiter": max_evals})
            return np.array([res.x])
        span = bounds[:, 1] - bounds[:, 0]
        simplex = [u0] + [u0 + 0.05 * span[i] * np.eye(dim)[i] for i in range(dim)]
        res = minimize(lambda u: -run(u, T)[0], u0, method="Nelder-Mead",
                       options={"initial_simplex": np.array(simplex), "xatol": 1e-9,
                                "fatol": 1e-14, "maxfev": max_evals})
        return res.x

    def search(T, extra_starts=()):
        points = list(extra_starts) + _start_points(param, starts, rng)
        candidates = []
        for j, u0 in enumerate(points):
            v, tm, x0 = run(u0, T)
            if x0 is not None:
                candidates.append((v, j, u0, tm, x0))
        if not candidates:
            raise RuntimeError("every start failed to integrate")
        if dim:
            ranked = sorted(candidates, key=lambda c: (-c[0], c[1]))[:local_searches]
            for _, j, u0, _, _ in ranked:
                u = local(np.asarray(u0, dtype=float), T)
                v, tm, x0 = run(u, T)
                if x0 is not None:
                    candidates.append((v, j, u, tm, x0))
        # Deterministic merge: largest value, then lexicographically smallest x0.
        best = min(candidates, key=lambda c: (-c[0], tuple(np.round(c[4], 12))))
        return best[0], None, best[2], best[3], best[4]

    if spec.horizon.finite or t_end is not None:
        T = float(t_end) if t_end is not None else spec.horizon.T
        v, _, u, tm, x0 = search(T)
        return LowerBound(v, x0, np.asarray(u), tm, evals, T - spec.t0, starts)

    T = spec.t0 + window
    v, _, u, tm, x0 = search(T)
    while T - spec.t0 < max_window:
        T2 = spec.t0 + 2 * (T - spec.t0)
        v2, tm2, _ = run(u, T2)
        if abs(v2 - v) < saturation_tol:
            break
        T = T2
        v, _, u, tm, x0 = search(T, extra_starts=[u])
    return LowerBound(v, x0, np.asarray(u), tm, evals, T - spec.t0, starts)


# ---------------------------------------------------------------------------
# grid verification of auxiliary functions


@dataclass
class CertificateReport:
    max_lie_violation: float
    lie_argmax: tuple
    max_phi_violation: float
    phi_argmax: tuple
    grid_size: int
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {"maxLieViolation": self.max_lie_violation, "lieArgmax": list(self.lie_argmax),
                "maxPhiViolation": self.max_phi_violation, "phiArgmax": list(self.phi_argmax),
                "gridSize": self.grid_size, "tol": self.tol, "pass": self.passed}


def grid_points(box, resolution) -> np.ndarray:
    """Tensor grid; ``resolution`` is a node count per axis (or one for all)."""
    box = [tuple(map(float, b)) for b in box]
    if np.ndim(resolution) == 0:
        resolution = [int(resolution)] * len(box)
    axes = [np.linspace(lo, hi, int(r)) if r > 1 else np.array([0.5 * (lo + hi)])
            for (lo, hi), r in zip(box, resolution)]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(box))


def _full_points(spec: ProblemSpec, points: np.ndarray) -> np.ndarray:
    """Points on (t, x): state-only grids are placed at t = t0."""
    if points.shape[1] == spec.n + 1:
        return points
    if points.shape[1] == spec.n:
        return np.column_stack([np.full(len(points), spec.t0), points])
    raise ValueError(f"grid has {points.shape[1]} axes; expected {spec.n} or {spec.n + 1}")


def evaluate_function(V, spec: ProblemSpec, pts: np.ndarray) -> np.ndarray:
    """V on (t, x) points; V is a Polynomial or a callable V(t, x)."""
    if isinstance(V, Polynomial):
        return V.with_variables(spec.variables).evaluate_many(pts)
    return np.array([float(V(p[0], p[1:])) for p in pts])


def lie_values(V, spec: ProblemSpec, pts: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """LV on (t, x) points: exact for polynomials, central differences otherwise."""
    if isinstance(V, Polynomial):
        return lie_derivative(V.with_variables(spec.variables), spec).evaluate_many(pts)
    vf = VectorField(spec)
    out = np.empty(len(pts))
    for j, p in enumerate(pts):
        F = vf(p[0], p[1:])
        total = 0.0
        direction = np.concatenate([[1.0], F])
        for i, c in enumerate(direction):
            if c == 0.0:
                continue
            e = np.zeros_like(p)
            e[i] = step
            total += c * (V(*_split(p + e)) - V(*_split(p - e))) / (2 * step)
        out[j] = total
    return out


def _split(p):
    return p[0], p[1:]


def _omega_mask(spec: ProblemSpec, pts: np.ndarray, slack: float = 1e-12) -> np.ndarray:
    omega = build_omega(spec)
    mask = np.ones(len(pts), dtype=bool)
    for g in omega.inequalities:
        mask &= g.evaluate_many(pts) >= -slack
    return mask


def check_certificate(V, spec: ProblemSpec, box, resolution=101, tol: float = 1e-9,
                      restrict_to_omega: bool = True, step: float = 1e-6) -> CertificateReport:
    """Grid check of LV <= 0 and Phi - V <= 0.

    ``box`` lists bounds for (t, x1..xn), or for the states alone, in which
    case V is evaluated at t = t0.  Nodes outside Omega's inequalities are
    skipped unless ``restrict_to_omega`` is False.
    """
    pts = _full_points(spec, grid_points(box, resolution))
    if restrict_to_omega:
        pts = pts[_omega_mask(spec, pts)]
    if len(pts) == 0:
        raise ValueError("no grid node lies in the domain")
    lie = lie_values(V, spec, pts, step)
    gap = observable_values(spec, pts[:, 0], pts[:, 1:]) - evaluate_function(V, spec, pts)
    i, j = int(np.argmax(lie)), int(np.argmax(gap))
    max_lie, max_gap = float(lie[i]), float(gap[j])
    return CertificateReport(max_lie, tuple(map(float, pts[i])), max_gap,
                             tuple(map(float, pts[j])), len(pts), tol,
                             bool(max_lie <= tol and max_gap <= tol))


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass
class LimitCycle:
    period: float
    max_observable: float
    time_of_max: float
    point: np.ndarray
    returns: int


def limit_cycle(spec: ProblemSpec, x0=None, transient: float = 50.0, max_returns: int = 200,
                return_tol: float = 1e-9, rel_tol: float = 1e-11, abs_tol: float = 1e-13) -> LimitCycle:
    """Settle onto an attracting periodic orbit and measure it.

    After the transient, the section is the hyperplane through the current
    point normal to the flow.  Successive crossings in the flow direction are
    compared until two land within ``return_tol`` of each other.
    """
    if not spec.is_autonomous():
        raise ValueError("periodic orbit search needs autonomous dynamics")
    vf = VectorField(spec)
    if x0 is None:
        if spec.x0_parameterization is None:
            raise ValueError("no starting point given")
        x0 = spec.x0_parameterization(np.zeros(getattr(spec.x0_parameterization, "dimension", 0)))
    t0 = spec.t0
    traj = integrate(spec, x0, t0 + transient, rel_tol=rel_tol, abs_tol=abs_tol, field_fn=vf)
    if traj.blowup:
        raise NoPeriodicOrbit("trajectory escaped during the transient")
    p = traj.final_state.copy()
    normal = vf(0.0, p)
    if np.linalg.norm(normal) < 1e-12:
        raise NoPeriodicOrbit("transient ended on an equilibrium")
    normal = normal / np.linalg.norm(normal)

    def crossing(start_point, guess):
        """Integrate from the section until the next upward crossing."""
        T = guess
        while T < 1e6:
            tr = integrate(spec, start_point, T, t0=0.0, rel_tol=rel_tol, abs_tol=abs_tol,
                           field_fn=vf)
            g = (tr.states - p) @ normal
            # skip the departure from the section itself
            idx = np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0))
            if len(idx):
                i = idx[0]
                a, b = tr.times[i], tr.times[i + 1]
                for _ in range(100):
                    mid = 0.5 * (a + b)
                    if (tr(mid) - p) @ normal < 0:
                        a = mid
                    else:
                        b = mid
                    if b - a < 1e-14 * max(1.0, b):
                        break
                return b, tr(b), tr
            T *= 2
        raise NoPeriodicOrbit("no return to the section")

    guess = 1.0
    point = p
    for k in range(1, max_returns + 1):
        period, q, tr = crossing(point, guess)
        guess = 1.5 * period
        if np.linalg.norm(q - point) <= return_tol * max(1.0, np.linalg.norm(point)):
            ts = tr.refined_times(8)
            ts = ts[ts <= period]
            vals = tr.observable(spec, ts)
            i = int(np.argmax(vals))
            best, tb = float(vals[i]), float(ts[i])
            lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
            if hi > lo:
                res = minimize_scalar(lambda s: -float(tr.observable(spec, [s])[0]),
                                      bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-12})
                if -res.fun > best:
                    best, tb = float(-res.fun), float(res.x)
            return LimitCycle(period, best, tb, point, k)
        point = q
    raise NoPeriodicOrbit(f"no periodic return within {max_returns} crossings")


def max_on_limit_cycle(spec: ProblemSpec, **options) -> float:
    """Largest observable value over one period of the attracting orbit."""
    return limit_cycle(spec, **options).max_observable
