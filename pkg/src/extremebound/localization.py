"""Sets that localize near-extremal trajectories, built from a near-optimal V.

S_delta holds the points where V sits within delta below its bound lambda;
R_eps holds the points where V decays no faster than eps.  A trajectory whose
observable comes within delta of lambda must stay in S_delta until that time
and can spend at most delta/eps time units outside R_eps.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .polynomial import Polynomial
from .system import TIME, ProblemSpec
from .trajectories import (Trajectory, _full_points, evaluate_function, grid_points, lie_values,
                           observable_values)

_MAGIC = b"EBRL"
_VERSION = 1
_KINDS = {"S": 0, "R": 1, "AND": 2}


@dataclass
class LevelSetGrid:
    """Membership of tensor-grid nodes in one set.

    ``mask`` is flat in C order over the axes (the last axis varies fastest).
    """

    box: list
    resolution: list
    mask: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.box = [tuple(map(float, b)) for b in self.box]
        self.resolution = [int(r) for r in self.resolution]
        self.mask = np.asarray(self.mask, dtype=bool).ravel()
        if len(self.mask) != int(np.prod(self.resolution)):
            raise ValueError("mask length must equal the product of the resolutions")
        for key, v in self.params.items():
            if key.rsplit(".", 1)[-1] in ("delta", "eps") and v < 0:
                raise ValueError(f"{key} must be nonnegative")

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def points(self) -> np.ndarray:
        return grid_points(self.box, self.resolution)

    def members(self) -> np.ndarray:
        return self.points()[self.mask]

    def _check_compatible(self, other: LevelSetGrid):
        if self.box != other.box or self.resolution != other.resolution:
            raise ValueError("grids differ in box or resolution")

    def intersect(self, other: LevelSetGrid) -> LevelSetGrid:
        """Bitmask AND of two sets on the same grid."""
        self._check_compatible(other)
        params = {f"{self.kind}.{k}": v for k, v in self.params.items()}
        params.update({f"{other.kind}.{k}": v for k, v in other.params.items()})
        return LevelSetGrid(self.box, self.resolution, self.mask & other.mask, "AND", params)

    def is_subset_of(self, other: LevelSetGrid) -> bool:
        self._check_compatible(other)
        return bool(np.all(~self.mask | other.mask))

    def to_csv(self, path):
        """``coord1,...,coordk,member`` with one row per node."""
        pts = self.points()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"coord{i + 1}" for i in range(pts.shape[1])] + ["member"])
            for p, m in zip(pts, self.mask):
                w.writerow([repr(float(v)) for v in p] + [int(m)])

    def to_rle(self) -> bytes:
        """Compact run-length encoding; see README for the layout."""
        out = bytearray(_MAGIC)
        out += struct.pack("<BB", _VERSION, len(self.box))
        for (lo, hi), r in zip(self.box, self.resolution):
            out += struct.pack("<ddI", lo, hi, r)
        p1, p2 = _param_pair(self)
        out += struct.pack("<Bdd", _KINDS[self.kind], p1, p2)
        runs = _runs(self.mask)
        first = int(self.mask[0]) if len(self.mask) else 0
        out += struct.pack("<BI", first, len(runs))
        out += struct.pack(f"<{len(runs)}I", *runs)
        return bytes(out)

    def write_rle(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_rle())

    @classmethod
    def from_rle(cls, data: bytes) -> LevelSetGrid:
        if data[:4] != _MAGIC:
            raise ValueError("not a run-length grid file")
        version, k = struct.unpack_from("<BB", data, 4)
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        off = 6
        box, res = [], []
        for _ in range(k):
            lo, hi, r = struct.unpack_from("<ddI", data, off)
            off += struct.calcsize("<ddI")
            box.append((lo, hi))
            res.append(r)
        kind_code, p1, p2 = struct.unpack_from("<Bdd", data, off)
        off += struct.calcsize("<Bdd")
        kind = {v: key for key, v in _KINDS.items()}[kind_code]
        first, nruns = struct.unpack_from("<BI", data, off)
        off += struct.calcsize("<BI")
        runs = struct.unpack_from(f"<{nruns}I", data, off)
        mask = np.zeros(int(np.prod(res)), dtype=bool)
        pos, value = 0, bool(first)
        for n in runs:
            mask[pos:pos + n] = value
            pos += n
            value = not value
        params = {"S": {"lambda": p1, "delta": p2}, "R": {"eps": p2}}.get(kind, {})
        return cls(box, res, mask, kind, params)

    @classmethod
    def read_rle(cls, path) -> LevelSetGrid:
        with open(path, "rb") as fh:
            return cls.from_rle(fh.read())


def _param_pair(grid: LevelSetGrid):
    if grid.kind == "S":
        return float(grid.params["lambda"]), float(grid.params["delta"])
    if grid.kind == "R":
        return math.nan, float(grid.params["eps"])
    return math.nan, math.nan


def _runs(mask: np.ndarray) -> list:
    if len(mask) == 0:
        return []
    change = np.flatnonzero(mask[1:] != mask[:-1]) + 1
    edges = np.concatenate([[0], change, [len(mask)]])
    return [int(n) for n in np.diff(edges)]


def _depends_on_time(V) -> bool:
    if not isinstance(V, Polynomial):
        return True
    return TIME in V.variables and V.depends_on(TIME)


def _grid(V, spec: ProblemSpec, box, resolution):
    if np.ndim(resolution) == 0:
        resolution = [int(resolution)] * len(box)
    expected = spec.n + 1 if _depends_on_time(V) else spec.n
    if len(box) != expected:
        raise ValueError(f"box needs {expected} axes for this V, got {len(box)}")
    if len(resolution) != len(box):
        raise ValueError("one resolution per box axis")
    pts = _full_points(spec, grid_points(box, resolution))
    return pts, list(resolution)


def compute_s_delta(V, lam: float, delta: float, spec: ProblemSpec, box, resolution) -> LevelSetGrid:
    """Nodes with 0 <= lambda - V <= delta.

    A time-independent polynomial V gets a state-space grid; otherwise the
    first box axis is time.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    pts, res = _grid(V, spec, box, resolution)
    gap = lam - evaluate_function(V, spec, pts)
    return LevelSetGrid(box, res, (gap >= 0) & (gap <= delta), "S",
                        {"lambda": float(lam), "delta": float(delta)})


def compute_r_eps(V, eps: float, spec: ProblemSpec, box, resolution) -> LevelSetGrid:
    """Nodes with -eps <= LV <= 0."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    pts, res = _grid(V, spec, box, resolution)
    lv = lie_values(V, spec, pts)
    return LevelSetGrid(box, res, (lv >= -eps) & (lv <= 0), "R", {"eps": float(eps)})


@dataclass
class ContainmentAudit:
    applicable: bool
    in_s_delta_until_t_star: bool
    time_outside_r_eps: float
    budget: float
    t_star: float
    slack: float
    max_s_violation: float

    @property
    def within_budget(self) -> bool:
        return self.time_outside_r_eps <= self.budget + self.slack

    def to_dict(self) -> dict:
        return {"applicable": self.applicable, "inSDeltaUntilTStar": self.in_s_delta_until_t_star,
                "timeOutsideREps": self.time_outside_r_eps, "budget": self.budget,
                "tStar": self.t_star, "slack": self.slack, "withinBudget": self.within_budget}


def audit_containment(V, lam: float, delta: float, eps: float, trajectory: Trajectory,
                      spec: ProblemSpec, per_step: int = 10, s_tol: float = 1e-9) -> ContainmentAudit:
    """Check a trajectory against S_delta and R_eps up to t*.

    t* is the last sampled time at which the observable reaches lambda - delta.
    Samples come from the dense output at ``per_step`` points per integrator
    step.  Outside-time is the measure of {LV < -eps} on [t0, t*], summed over
    sample intervals with the trapezoid rule on the indicator; ``slack`` is
    the longest sample interval.
    """
    if delta < 0 or eps <= 0:
        raise ValueError("need delta >= 0 and eps > 0")
    ts = trajectory.refined_times(per_step)
    xs = trajectory(ts)
    phi = observable_values(spec, ts, xs)
    budget = delta / eps
    hits = np.flatnonzero(phi >= lam - delta)
    if len(hits) == 0:
        return ContainmentAudit(False, False, math.nan, budget, math.nan, math.nan, math.nan)
    k = int(hits[-1])
    ts, xs = ts[:k + 1], xs[:k + 1]
    pts = np.column_stack([ts, xs])
    gap = lam - evaluate_function(V, spec, pts)
    s_violation = float(max(np.max(-gap), np.max(gap - delta)))
    lv = lie_values(V, spec, pts)
    outside = (lv < -eps).astype(float)
    dt = np.diff(ts)
    time_out = float(np.sum(dt * 0.5 * (outside[:-1] + outside[1:]))) if len(dt) else 0.0
    slack = float(dt.max()) if len(dt) else 0.0
    return ContainmentAudit(True, s_violation <= s_tol, time_out, budget, float(ts[-1]), slack,
                            s_violation)
