"""Problem model: dynamics, observable, sets and horizon, plus benchmark systems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .polynomial import Polynomial, VariableMismatchError, parse

TIME = "t"


@dataclass(frozen=True)
class SemialgebraicSet:
    """{z : g(z) >= 0 for g in inequalities, h(z) = 0 for h in equalities}.

    Empty lists describe the whole space.
    """

    inequalities: tuple = ()
    equalities: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))

    def contains(self, point, tol: float = 1e-9) -> bool:
        return (all(g.evaluate(point) >= -tol for g in self.inequalities)
                and all(abs(h.evaluate(point)) <= tol for h in self.equalities))

    def polynomials(self):
        return list(self.inequalities) + list(self.equalities)

    def max_degree(self) -> int:
        return max((p.degree() for p in self.polynomials()), default=0)

    def with_variables(self, variables) -> SemialgebraicSet:
        return SemialgebraicSet([g.with_variables(variables) for g in self.inequalities],
                                [h.with_variables(variables) for h in self.equalities])

    def union_constraints(self, other: SemialgebraicSet) -> SemialgebraicSet:
        """Intersection of the two sets (concatenated constraint lists)."""
        return SemialgebraicSet(self.inequalities + other.inequalities,
                                self.equalities + other.equalities)

    def is_empty_description(self) -> bool:
        return not self.inequalities and not self.equalities


@dataclass(frozen=True)
class Horizon:
    kind: str = "infinite"  # "finite" | "infinite"
    T: float | None = None
    t0: float = 0.0

    def __post_init__(self):
        if self.kind not in ("finite", "infinite"):
            raise ValueError(f"horizon kind must be finite or infinite, got {self.kind!r}")
        if self.kind == "finite":
            if self.T is None or not self.T > self.t0:
                raise ValueError("finite horizon needs T > t0")
        elif self.T is not None:
            raise ValueError("infinite horizon takes no T")

    @property
    def finite(self) -> bool:
        return self.kind == "finite"

    @classmethod
    def infinite(cls, t0: float = 0.0) -> Horizon:
        return cls("infinite", None, t0)

    @classmethod
    def until(cls, T: float, t0: float = 0.0) -> Horizon:
        return cls("finite", float(T), t0)


@dataclass(frozen=True)
class ProblemSpec:
    """An extreme-event bounding problem for a polynomial ODE.

    Polynomials in ``dynamics``, ``observable``, ``integrand`` and
    ``omega_extra`` live on ``(t, x1..xn)``; ``initial_set`` lives on the
    state variables only.  ``symmetry`` is an optional list of +-1 signs
    defining the involution x -> diag(signs) x.
    """

    states: tuple
    dynamics: tuple
    observable: Polynomial
    horizon: Horizon = field(default_factory=Horizon)
    initial_set: SemialgebraicSet = field(default_factory=SemialgebraicSet)
    omega_extra: SemialgebraicSet = field(default_factory=SemialgebraicSet)
    integrand: Polynomial | None = None
    symmetry: tuple | None = None
    name: str = ""
    # Generic scalar hook for non-polynomial observables; only trajectory and
    # certificate code use it.
    observable_fn: Callable | None = field(default=None, compare=False)
    x0_parameterization: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if TIME in states:
            raise ValueError("'t' is reserved for time")
        full = (TIME,) + states
        object.__setattr__(self, "dynamics", tuple(p.with_variables(full) for p in self.dynamics))
        if len(self.dynamics) != len(states):
            raise ValueError(f"{len(states)} states but {len(self.dynamics)} dynamics components")
        object.__setattr__(self, "observable", self.observable.with_variables(full))
        if self.integrand is not None:
            object.__setattr__(self, "integrand", self.integrand.with_variables(full))
        try:
            x0set = self.initial_set.with_variables(states)
        except VariableMismatchError as exc:
            raise ValueError(f"initial set must not depend on time: {exc}") from None
        object.__setattr__(self, "initial_set", x0set)
        object.__setattr__(self, "omega_extra", self.omega_extra.with_variables(full))
        if self.symmetry is not None:
            signs = tuple(int(s) for s in self.symmetry)
            if len(signs) != len(states) or any(s not in (1, -1) for s in signs):
                raise ValueError("symmetry must be a list of +1/-1, one per state")
            object.__setattr__(self, "symmetry", signs)
            problems = symmetry_violations(self)
            if problems:
                raise ValueError("declared symmetry does not hold: " + "; ".join(problems))

    @property
    def variables(self) -> tuple:
        return (TIME,) + self.states

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def t0(self) -> float:
        return self.horizon.t0

    def dynamics_degree(self) -> int:
        return max(max(p.degree() for p in self.dynamics), 0)

    def is_autonomous(self) -> bool:
        return not any(p.depends_on(TIME) for p in self.dynamics)

    def phi_value(self, t: float, x) -> float:
        if self.observable_fn is not None:
            return float(self.observable_fn(t, x))
        return self.observable.evaluate([t, *x])

    def sign_map(self) -> dict:
        if self.symmetry is None:
            return {}
        return dict(zip(self.states, self.symmetry))

    def replace(self, **changes) -> ProblemSpec:
        import dataclasses

        return dataclasses.replace(self, **changes)


def symmetry_violations(spec: ProblemSpec) -> list[str]:
    """Check F(t, Ax) = A F(t, x), Phi(t, Ax) = Phi and invariance of set polynomials."""
    signs = spec.sign_map()
    out = []
    for i, (f, s) in enumerate(zip(spec.dynamics, spec.symmetry)):
        if not (f.linear_transform_signs(signs) - f * s).is_zero():
            out.append(f"dynamics component {i + 1}")
    if not (spec.observable.linear_transform_signs(signs) - spec.observable).is_zero():
        out.append("observable")
    if spec.integrand is not None and not (
            spec.integrand.linear_transform_signs(signs) - spec.integrand).is_zero():
        out.append("integrand")
    for label, sset in (("initial set", spec.initial_set), ("omega", spec.omega_extra)):
        for p in sset.polynomials():
            if not (p.linear_transform_signs(signs) - p).is_zero():
                out.append(f"{label} polynomial {p}")
    return out


def lie_derivative(V: Polynomial, spec: ProblemSpec) -> Polynomial:
    """dV/dt along trajectories: dV/dt + F . grad_x V."""
    full = spec.variables
    V = V.with_variables(full)
    out = V.differentiate(TIME)
    for name, f in zip(spec.states, spec.dynamics):
        dv = V.differentiate(name)
        if not dv.is_zero():
            out = out + f * dv
    return out


def time_constraint(horizon: Horizon, variables) -> Polynomial:
    t = Polynomial.variable(variables, TIME)
    if horizon.finite:
        return (t - horizon.t0) * (horizon.T - t)
    return t - horizon.t0


def build_omega(spec: ProblemSpec) -> SemialgebraicSet:
    """omega_extra plus the automatic time constraint."""
    h = time_constraint(spec.horizon, spec.variables)
    return SemialgebraicSet((h,) + spec.omega_extra.inequalities, spec.omega_extra.equalities)


def lift_to_time(p: Polynomial, spec: ProblemSpec) -> Polynomial:
    return p.with_variables(spec.variables)


# ---------------------------------------------------------------------------
# benchmark systems


def burgers_truncation(N: int, phi0: float | None = None, local: bool = False) -> ProblemSpec:
    """Fourier-Galerkin truncation of viscous Burgers onto sin(2 pi n x), n <= N.

    With ``phi0`` the initial set is {Phi(a) = phi0}; ``local`` adds the ball
    ||a||^2 <= phi0 / (2 pi^2) to the domain.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    states = tuple(f"a{n}" for n in range(1, N + 1))
    full = (TIME,) + states
    a = [Polynomial.variable(full, s) for s in states]
    rt2pi = math.sqrt(2.0) * math.pi
    dyn = []
    for n in range(1, N + 1):
        f = a[n - 1] * (-(2 * math.pi * n) ** 2)
        quad = Polynomial.zero(full)
        for m in range(1, N - n + 1):
            quad = quad + a[m - 1] * a[m + n - 1]
        for m in range(1, n):
            quad = quad - a[m - 1] * a[n - m - 1] * 0.5
        f = f + quad * (rt2pi * n)
        dyn.append(f)
    phi = Polynomial.zero(full)
    for n in range(1, N + 1):
        phi = phi + a[n - 1] * a[n - 1] * (2 * math.pi ** 2 * n * n)
    x0set = SemialgebraicSet()
    omega = SemialgebraicSet()
    if phi0 is not None:
        x0set = SemialgebraicSet(equalities=[(phi - phi0).with_variables(states)])
        if local:
            norm2 = Polynomial.zero(full)
            for ai in a:
                norm2 = norm2 + ai * ai
            omega = SemialgebraicSet(inequalities=[Polynomial.constant(full, phi0 / (2 * math.pi ** 2)) - norm2])
    signs = tuple((-1) ** n for n in range(1, N + 1))

    def param(u):
        # Sphere {Phi = phi0}: normalize an arbitrary direction u.
        u = np.asarray(u, dtype=float)
        val = phi.evaluate([0.0, *u])
        if val <= 0:
            return None
        return u * math.sqrt(phi0 / val)

    param.dimension = N
    param.bounds = [(-1.0, 1.0)] * N
    param.periodic = False

    return ProblemSpec(states, tuple(dyn), phi, Horizon.infinite(), x0set, omega,
                       symmetry=signs, name=f"burgers{N}",
                       x0_parameterization=param if phi0 is not None else None)


def _circle_param(cx, cy, r):
    def param(theta):
        th = float(theta[0]) if hasattr(theta, "__len__") else float(theta)
        return [cx + r * math.cos(th), cy + r * math.sin(th)]

    param.dimension = 1
    param.bounds = [(0.0, 2 * math.pi)]
    param.periodic = True
    return param


def _point_param(x0):
    def param(_=None):
        return list(x0)

    param.dimension = 0
    param.bounds = []
    param.periodic = False
    return param


def _interval_param(lo, hi):
    def param(s):
        s = float(s[0]) if hasattr(s, "__len__") else float(s)
        return [min(max(s, lo), hi)]

    param.dimension = 1
    param.bounds = [(lo, hi)]
    param.periodic = False
    return param


def _horizon_from(params, default="inf") -> Horizon:
    h = params.get("horizon", default)
    if h in (None, "inf", "infinite", math.inf):
        return Horizon.infinite()
    return Horizon.until(float(h))


def builtin_problem(name: str, params: dict | None = None) -> ProblemSpec:
    """Benchmark problems by name.

    nonautonomous2d   x0=point|circle, horizon
    quadratic1d       x' = x^2, x0 (point), observable 4x (numerator of 4x/(1+4x^2))
    cubicSemistable1d x' = x^2 - x^3, X0 = [-1, 0], Omega x in [-1, 1]
    unstableFocus2d   horizon
    vanDerPol         horizon
    burgers           N, phi0, local
    """
    params = dict(params or {})
    if name == "nonautonomous2d":
        states = ("x1", "x2")
        full = (TIME,) + states
        F = (parse("x2*t - 0.1*x1 - x1*x2", full), parse("-x1*t - x2 + x1^2", full))
        phi = parse("x1", full)
        kind = params.get("x0", "point")
        if kind == "point":
            x0set = SemialgebraicSet(equalities=[parse("x1", states), parse("x2 - 1", states)])
            param = _point_param([0.0, 1.0])
        elif kind == "circle":
            x0set = SemialgebraicSet(equalities=[parse("(x1 + 0.75)^2 + x2^2 - 1", states)])
            param = _circle_param(-0.75, 0.0, 1.0)
        else:
            raise ValueError(f"nonautonomous2d: x0 must be point or circle, got {kind!r}")
        return ProblemSpec(states, F, phi, _horizon_from(params), x0set,
                           name=f"nonautonomous2d-{kind}", x0_parameterization=param)
    if name == "quadratic1d":
        states = ("x",)
        full = (TIME, "x")
        x0 = float(params.get("x0", -0.75))
        F = (parse("x^2", full),)
        phi = parse("4*x", full)

        def phi_fn(t, x):
            return 4 * x[0] / (1 + 4 * x[0] ** 2)

        return ProblemSpec(states, F, phi, _horizon_from(params),
                           SemialgebraicSet(equalities=[parse(f"x - ({x0!r})", states)]),
                           name="quadratic1d", observable_fn=phi_fn,
                           x0_parameterization=_point_param([x0]))
    if name == "cubicSemistable1d":
        states = ("x",)
        full = (TIME, "x")
        F = (parse("x^2 - x^3", full),)
        phi = parse("4*x*(1 - x)", full)
        x0set = SemialgebraicSet(inequalities=[parse("-x*(1 + x)", states)])
        omega = SemialgebraicSet(inequalities=[parse("1 - x^2", full)])
        return ProblemSpec(states, F, phi, _horizon_from(params), x0set, omega,
                           name="cubicSemistable1d", x0_parameterization=_interval_param(-1.0, 0.0))
    if name == "unstableFocus2d":
        states = ("x1", "x2")
        full = (TIME,) + states
        F = (parse("0.2*x1 + x2 - x2*(x1^2 + x2^2)", full),
             parse("-0.4*x2 + x1*(x1^2 + x2^2)", full))
        phi = parse("x1^2 + x2^2", full)
        x0set = SemialgebraicSet(equalities=[parse("x1^2 + x2^2 - 0.25", states)])
        return ProblemSpec(states, F, phi, _horizon_from(params), x0set,
                           symmetry=(-1, -1), name="unstableFocus2d",
                           x0_parameterization=_circle_param(0.0, 0.0, 0.5))
    if name == "vanDerPol":
        states = ("x1", "x2")
        full = (TIME,) + states
        F = (parse("x2", full), parse("(1 - 9*x1^2)*x2 - x1", full))
        phi = parse("x1^2 + x2^2", full)
        x0set = SemialgebraicSet(equalities=[parse("x1^2 + x2^2 - 0.04", states)])
        return ProblemSpec(states, F, phi, _horizon_from(params), x0set,
                           symmetry=(-1, -1), name="vanDerPol",
                           x0_parameterization=_circle_param(0.0, 0.0, 0.2))
    if name == "burgers":
        N = int(params.get("N", 16))
        phi0 = params.get("phi0")
        phi0 = None if phi0 is None else float(phi0)
        local = str(params.get("local", "false")).lower() in ("1", "true", "yes")
        return burgers_truncation(N, phi0, local)
    raise ValueError(f"unknown builtin problem {name!r}")


BUILTINS = ("nonautonomous2d", "quadratic1d", "cubicSemistable1d", "unstableFocus2d",
            "vanDerPol", "burgers")


def augment_integral(spec: ProblemSpec, zname: str = "z") -> ProblemSpec:
    """Turn Phi + int Psi into a pointwise observable by adding z' = Psi, z(t0) = 0."""
    if spec.integrand is None:
        raise ValueError("problem has no integrand")
    states = spec.states + (zname,)
    full = (TIME,) + states
    dyn = tuple(p.with_variables(full) for p in spec.dynamics) + (spec.integrand.with_variables(full),)
    phi = spec.observable.with_variables(full) + Polynomial.variable(full, zname)
    x0set = SemialgebraicSet([g.with_variables(states) for g in spec.initial_set.inequalities],
                             [h.with_variables(states) for h in spec.initial_set.equalities]
                             + [Polynomial.variable(states, zname)])
    omega = spec.omega_extra.with_variables(full)
    sym = None if spec.symmetry is None else spec.symmetry + (1,)
    return ProblemSpec(states, dyn, phi, spec.horizon, x0set, omega, None, sym,
                       name=spec.name + "+z")


def scale_states(spec: ProblemSpec, c: float) -> ProblemSpec:
    """Rewrite the problem in the coordinates z = c x.

    A function W(t, z) valid for the scaled problem gives V(t, x) = W(t, c x)
    for the original one (see ``unscale_function``).
    """
    if c <= 0:
        raise ValueError("scale factor must be positive")
    full = spec.variables
    to_x = {s: Polynomial.variable(full, s) * (1.0 / c) for s in spec.states}
    to_x_states = {s: Polynomial.variable(spec.states, s) * (1.0 / c) for s in spec.states}

    def sub(p):
        return p.substitute(to_x, full)

    def sub_set(sset, variables, mapping):
        return SemialgebraicSet([p.substitute(mapping, variables) for p in sset.inequalities],
                                [p.substitute(mapping, variables) for p in sset.equalities])

    dyn = tuple(sub(f) * c for f in spec.dynamics)
    return spec.replace(
        dynamics=dyn, observable=sub(spec.observable),
        integrand=None if spec.integrand is None else sub(spec.integrand),
        initial_set=sub_set(spec.initial_set, spec.states, to_x_states),
        omega_extra=sub_set(spec.omega_extra, full, to_x),
        observable_fn=None if spec.observable_fn is None else (
            lambda t, z, f=spec.observable_fn: f(t, np.asarray(z) / c)),
        x0_parameterization=_scaled_param(spec.x0_parameterization, c),
        name=spec.name)


def _scaled_param(param, c):
    if param is None:
        return None

    def scaled(*args):
        x = param(*args)
        return None if x is None else list(np.asarray(x, dtype=float) * c)

    for attr in ("dimension", "bounds", "periodic"):
        if hasattr(param, attr):
            setattr(scaled, attr, getattr(param, attr))
    return scaled


def unscale_function(W: Polynomial, spec: ProblemSpec, c: float) -> Polynomial:
    """V(t, x) = W(t, c x) on the original variables."""
    full = spec.variables
    mapping = {s: Polynomial.variable(full, s) * c for s in spec.states}
    return W.with_variables(full).substitute(mapping, full)


def scale_time(spec: ProblemSpec) -> ProblemSpec:
    """Rewrite a finite-horizon problem on s in [0, 1], t = t0 + (T - t0) s.

    High powers of t are badly scaled when T is well away from 1; on the unit
    interval they stay bounded.  Undo with ``unscale_time``.
    """
    if not spec.horizon.finite:
        raise ValueError("only finite horizons can be mapped onto [0, 1]")
    t0, L = spec.horizon.t0, spec.horizon.T - spec.horizon.t0
    full = spec.variables
    to_t = {TIME: Polynomial.variable(full, TIME) * L + t0}

    def sub(p):
        return p.substitute(to_t, full)

    omega = SemialgebraicSet([sub(p) for p in spec.omega_extra.inequalities],
                             [sub(p) for p in spec.omega_extra.equalities])
    return spec.replace(
        dynamics=tuple(sub(f) * L for f in spec.dynamics), observable=sub(spec.observable),
        integrand=None if spec.integrand is None else sub(spec.integrand) * L,
        omega_extra=omega, horizon=Horizon.until(1.0, 0.0),
        observable_fn=None if spec.observable_fn is None else (
            lambda s, x, f=spec.observable_fn: f(t0 + L * s, x)))


def unscale_time(W: Polynomial, spec: ProblemSpec) -> Polynomial:
    """V(t, x) = W((t - t0) / (T - t0), x) for the original finite-horizon ``spec``."""
    t0, L = spec.horizon.t0, spec.horizon.T - spec.horizon.t0
    full = spec.variables
    mapping = {TIME: (Polynomial.variable(full, TIME) - t0) * (1.0 / L)}
    return W.with_variables(full).substitute(mapping, full)
