"""Bound pipeline: single solves, degree sweeps and iterative tightening."""
from __future__ import annotations

import logging
import math
import time

from .polynomial import Polynomial
from .sdpsolve import Status, solve, strip_trace_bound, with_trace_bound
from .soscert import (BoundResult, CertificateError, assemble_bound_sdp, identity_residuals,
                      recover_v)
from .system import (ProblemSpec, SemialgebraicSet, scale_states, scale_time, unscale_function,
                     unscale_time)

log = logging.getLogger(__name__)

# Fallback trace bounds, as multiples of the total Gram dimension, tried when
# the unrestricted solve stalls.  Tight bounds make the SDP nearly unbounded
# in the Gram variables, and the barrier then drives the iterates away.
TRACE_BOUND_FACTORS = (10.0, 3.0, 1.0)


def _merit(sol) -> float:
    vals = [sol.gap, sol.primal_residual, sol.dual_residual]
    return max((v for v in vals if math.isfinite(v)), default=math.inf)


def compute_bound(spec: ProblemSpec, d: int, time_independent: bool = False,
                  terminal_time: bool = False, symmetry: bool = True,
                  state_scale: float | None = None, solver_options: dict | None = None,
                  trace_bound_factors=TRACE_BOUND_FACTORS, near_tol: float = 1e-6,
                  iteration: int = 1,
                  decay_multiplier_degree: int | None = None,
                  unit_time: bool = True) -> BoundResult:
    """Degree-d upper bound on the maximum of the observable.

    Finite horizons are solved on the unit time interval unless ``unit_time``
    is False; the returned V is always in the original variables.  Never
    raises on solver trouble; the status and message say what happened.
    """
    start = time.perf_counter()
    opts = dict(solver_options or {})
    work = scale_states(spec, state_scale) if state_scale else spec
    rescale_time = unit_time and spec.horizon.finite and not time_independent
    if rescale_time:
        work = scale_time(work)
    bsdp = assemble_bound_sdp(work, d, time_independent=time_independent,
                              terminal_time=terminal_time, symmetry=symmetry,
                              decay_multiplier_degree=decay_multiplier_degree)
    sol = solve(bsdp.sdp, **opts)
    used_bound = None
    if sol.status not in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE) \
            and not sol.nearly_optimal(near_tol):
        total = sum(bsdp.sdp.block_sizes)
        for factor in trace_bound_factors:
            R = factor * total
            trial = strip_trace_bound(solve(with_trace_bound(bsdp.sdp, R), **opts))
            log.info("degree %d: trace bound %g gave %s", d, R, trial.status)
            if trial.status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE):
                continue
            if _merit(trial) < _merit(sol):
                sol, used_bound = trial, R
            if trial.nearly_optimal(near_tol):
                break
    wall = time.perf_counter() - start
    if sol.status == Status.PRIMAL_INFEASIBLE:
        return BoundResult(d, math.nan, None, sol.status, sol.gap, sol.iterations, wall,
                           iteration, "no certificate at this degree", solution=sol)
    try:
        V, lam = recover_v(sol, bsdp)
    except CertificateError as exc:
        return BoundResult(d, math.nan, None, sol.status, sol.gap, sol.iterations, wall,
                           iteration, str(exc), solution=sol)
    residual = max(identity_residuals(sol, bsdp).values(), default=0.0)
    if rescale_time:
        V = unscale_time(V, spec)
    if state_scale:
        V = unscale_function(V, spec, state_scale)
    message = sol.message
    if used_bound is not None:
        message = (message + "; " if message else "") + f"Gram trace bounded by {used_bound:g}"
    return BoundResult(d, lam, V, sol.status, sol.gap, sol.iterations, wall, iteration, message,
                       residual, sol.nearly_optimal(near_tol), used_bound, solution=sol)


def degree_sweep(spec: ProblemSpec, degrees, **options) -> list:
    """One ``compute_bound`` per degree, in the given (ascending) order."""
    degrees = list(degrees)
    if degrees != sorted(degrees):
        raise ValueError("degrees must be ascending")
    return [compute_bound(spec, d, **options) for d in degrees]


def tightened_spec(spec: ProblemSpec, lam: float) -> ProblemSpec:
    """Add lam - Phi >= 0 to the state-time domain."""
    cut = Polynomial.constant(spec.variables, lam) - spec.observable
    omega = SemialgebraicSet(spec.omega_extra.inequalities + (cut,), spec.omega_extra.equalities)
    return spec.replace(omega_extra=omega)


def iterative_tighten(spec: ProblemSpec, d: int, max_iters: int = 5, stop_tol: float = 1e-7,
                      **options) -> list:
    """Repeat the degree-d bound, each time cutting the domain at the last bound.

    A round that is not (nearly) optimal ends the loop; its result is still
    returned so callers see why.
    """
    results = []
    current = spec
    for k in range(1, max_iters + 1):
        res = compute_bound(current, d, iteration=k, **options)
        results.append(res)
        if not res.nearly_optimal or not math.isfinite(res.lam):
            break
        if k > 1 and results[-2].lam - res.lam < stop_tol:
            break
        current = tightened_spec(current, res.lam)
    return results


def result_row(r: BoundResult) -> tuple:
    """(degree, iteration, lambda, status, gap, seconds) for tabular output."""
    return (r.degree, r.iteration, r.lam, r.status.value, r.gap, r.wall_time)
