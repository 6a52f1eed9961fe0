"""JSON problem files.

A problem file is one JSON object::

    {"variables": ["x1", "x2"],
     "dynamics": ["x2*t - 0.1*x1 - x1*x2", "-x1*t - x2 + x1^2"],
     "observable": "x1",
     "integrand": "x2^2",                       (optional)
     "t0": 0.0,
     "horizon": {"type": "finite", "T": 3.0},   or {"type": "infinite"}
     "initial_set": {"inequalities": [...], "equalities": [...]},
     "omega_extra": {"inequalities": [...], "equalities": [...]},
     "symmetry": [-1, -1]}                      (optional)

Expressions in ``initial_set`` use the state variables only; the others may
also use ``t``.
"""
from __future__ import annotations

import json

from .polynomial import PolynomialParseError, parse
import numpy as np

from .system import (TIME, Horizon, ProblemSpec, SemialgebraicSet, _circle_param,
                     _interval_param, _point_param)


class ProblemFileError(ValueError):
    pass


def _poly(text, variables, where):
    if not isinstance(text, str):
        raise ProblemFileError(f"{where}: expected an expression string")
    try:
        return parse(text, variables)
    except PolynomialParseError as exc:
        raise ProblemFileError(f"{where}: {exc}") from None


def _set(obj, variables, where):
    if obj is None:
        return SemialgebraicSet()
    if not isinstance(obj, dict):
        raise ProblemFileError(f"{where}: expected an object")
    unknown = set(obj) - {"inequalities", "equalities"}
    if unknown:
        raise ProblemFileError(f"{where}: unknown field(s) {sorted(unknown)}")
    ineq = [_poly(s, variables, f"{where}.inequalities[{i}]")
            for i, s in enumerate(obj.get("inequalities", []))]
    eq = [_poly(s, variables, f"{where}.equalities[{i}]")
          for i, s in enumerate(obj.get("equalities", []))]
    return SemialgebraicSet(ineq, eq)


_FIELDS = {"variables", "dynamics", "observable", "integrand", "t0", "horizon", "initial_set",
           "omega_extra", "symmetry", "name"}


def spec_from_dict(doc: dict) -> ProblemSpec:
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    unknown = set(doc) - _FIELDS
    if unknown:
        raise ProblemFileError(f"unknown field(s) {sorted(unknown)}")
    for key in ("variables", "dynamics", "observable"):
        if key not in doc:
            raise ProblemFileError(f"missing field {key!r}")
    states = tuple(doc["variables"])
    if not states or not all(isinstance(s, str) for s in states):
        raise ProblemFileError("variables: expected a nonempty array of names")
    full = (TIME,) + states
    dyn = tuple(_poly(s, full, f"dynamics[{i}]") for i, s in enumerate(doc["dynamics"]))
    phi = _poly(doc["observable"], full, "observable")
    psi = _poly(doc["integrand"], full, "integrand") if doc.get("integrand") is not None else None
    t0 = float(doc.get("t0", 0.0))
    h = doc.get("horizon", {"type": "infinite"})
    if not isinstance(h, dict) or h.get("type") not in ("finite", "infinite"):
        raise ProblemFileError('horizon: expected {"type": "finite", "T": ...} or {"type": "infinite"}')
    try:
        horizon = Horizon.until(float(h["T"]), t0) if h["type"] == "finite" else Horizon.infinite(t0)
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemFileError(f"horizon: {exc}") from None
    x0set = _set(doc.get("initial_set"), states, "initial_set")
    omega = _set(doc.get("omega_extra"), full, "omega_extra")
    try:
        spec = ProblemSpec(states, dyn, phi, horizon, x0set, omega, psi, doc.get("symmetry"),
                           doc.get("name", ""))
    except ValueError as exc:
        raise ProblemFileError(str(exc)) from None
    param = infer_parameterization(spec)
    if param is not None:
        spec = spec.replace(x0_parameterization=param)
    return spec


def infer_parameterization(spec: ProblemSpec):
    """Parameterize a point, a planar circle or a bounded interval; None otherwise.

    Trajectory searches need one; other initial sets must be parameterized in code.
    """
    point = initial_point(spec)
    if point is not None:
        return _point_param(point)
    circle = initial_circle(spec)
    if circle is not None:
        return _circle_param(*circle)
    interval = initial_interval(spec)
    if interval is not None:
        return _interval_param(*interval)
    return None


def initial_point(spec: ProblemSpec):
    """The single point of an initial set given as x_i - c_i = 0 for every state, else None."""
    x0set = spec.initial_set
    if x0set.inequalities or len(x0set.equalities) != spec.n:
        return None
    point = [None] * spec.n
    for h in x0set.equalities:
        if h.degree() != 1:
            return None
        linear = [i for i in range(spec.n) if h.coefficient(_unit(spec.n, i)) != 0.0]
        if len(linear) != 1 or len(h.terms) > 2:
            return None
        i = linear[0]
        point[i] = -h.constant_term() / h.coefficient(_unit(spec.n, i)) + 0.0
    return None if any(p is None for p in point) else point


def initial_circle(spec: ProblemSpec):
    """(cx, cy, r) for a 2-D initial set given by one equality c*((x-cx)^2 + (y-cy)^2 - r^2) = 0."""
    x0set = spec.initial_set
    if spec.n != 2 or x0set.inequalities or len(x0set.equalities) != 1:
        return None
    h = x0set.equalities[0]
    a = h.coefficient((2, 0))
    if h.degree() != 2 or a == 0.0 or h.coefficient((0, 2)) != a or h.coefficient((1, 1)) != 0.0:
        return None
    cx, cy = -h.coefficient((1, 0)) / (2 * a), -h.coefficient((0, 1)) / (2 * a)
    r2 = cx * cx + cy * cy - h.constant_term() / a
    return (cx + 0.0, cy + 0.0, float(np.sqrt(r2))) if r2 > 0 else None


def initial_interval(spec: ProblemSpec):
    """(lo, hi) for a 1-D initial set of inequalities that carve out one bounded interval."""
    x0set = spec.initial_set
    if spec.n != 1 or x0set.equalities or not x0set.inequalities:
        return None
    roots = []
    for g in x0set.inequalities:
        coeffs = [g.coefficient((k,)) for k in range(g.degree(), -1, -1)]
        roots += [float(r.real) for r in np.roots(coeffs) if abs(r.imag) < 1e-12]
    roots = sorted(set(roots))
    if not roots:
        return None
    member = [x0set.contains([x]) for x in roots]
    probes = [roots[0] - 1.0] + [(a + b) / 2 for a, b in zip(roots, roots[1:])] + [roots[-1] + 1.0]
    inside = [x0set.contains([x]) for x in probes]
    if inside[0] or inside[-1]:
        return None
    pieces = [i for i in range(1, len(probes) - 1) if inside[i]]
    if len(pieces) == 0:
        return None
    lo, hi = pieces[0], pieces[-1]
    if any(not inside[i] for i in range(lo, hi + 1)) or not (member[lo - 1] and member[hi]):
        return None
    return float(roots[lo - 1]) + 0.0, float(roots[hi]) + 0.0


def _unit(n, i):
    return tuple(1 if j == i else 0 for j in range(n))


def spec_to_dict(spec: ProblemSpec) -> dict:
    def text(p, variables):
        return p.with_variables(variables).to_string()

    full, states = spec.variables, spec.states
    doc = {"variables": list(states),
           "dynamics": [text(f, full) for f in spec.dynamics],
           "observable": text(spec.observable, full)}
    if spec.integrand is not None:
        doc["integrand"] = text(spec.integrand, full)
    doc["t0"] = spec.t0
    doc["horizon"] = ({"type": "finite", "T": spec.horizon.T} if spec.horizon.finite
                      else {"type": "infinite"})
    doc["initial_set"] = {"inequalities": [text(g, states) for g in spec.initial_set.inequalities],
                          "equalities": [text(h, states) for h in spec.initial_set.equalities]}
    doc["omega_extra"] = {"inequalities": [text(g, full) for g in spec.omega_extra.inequalities],
                          "equalities": [text(h, full) for h in spec.omega_extra.equalities]}
    if spec.symmetry is not None:
        doc["symmetry"] = list(spec.symmetry)
    if spec.name:
        doc["name"] = spec.name
    return doc


def loads(text: str) -> ProblemSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return spec_from_dict(doc)


def dumps(spec: ProblemSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, allow_nan=False) + "\n"


def load(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(spec: ProblemSpec, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(spec))

