"""Dense block-diagonal SDP solver (primal-dual path following).

Problem form, with free scalar variables ``x`` and symmetric PSD blocks ``X_j``::

    minimize    c^T x + sum_j <C_j, X_j>
    subject to  A_free x + sum_j A_j(X_j) = b,   X_j >= 0

with dual

    maximize    b^T y
    subject to  A_free^T y = c,   C_j - A_j^*(y) = S_j >= 0.

Free variables are eliminated up front with a pivoted QR factorization of
``A_free``; the remaining pure block problem is solved by an infeasible-start
Nesterov-Todd predictor-corrector iteration.  Linearly dependent equality rows are
detected and removed before iterating.
"""
from __future__ import annotations

import logging
import math
import sys
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    SLOW_PROGRESS = "SlowProgress"
    ITERATION_LIMIT = "IterationLimit"

    def __str__(self):
        return self.value


@dataclass
class SdpProblem:
    """Block-diagonal SDP with free variables.

    ``A_blocks[j]`` is an (m, n_j*n_j) matrix whose row k is the row-major
    vectorization of the symmetric constraint matrix A_kj.
    """

    block_sizes: list
    b: np.ndarray
    A_blocks: list
    n_free: int = 0
    A_free: object = None
    c_free: np.ndarray | None = None
    C_blocks: list | None = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m = len(self.b)
        self.A_blocks = [sp.csr_matrix(A) for A in self.A_blocks]
        if len(self.A_blocks) != len(self.block_sizes):
            raise ValueError("one constraint matrix per block required")
        for A, n in zip(self.A_blocks, self.block_sizes):
            if A.shape != (m, n * n):
                raise ValueError(f"block matrix shape {A.shape} != {(m, n * n)}")
        if self.A_free is None:
            self.A_free = sp.csr_matrix((m, self.n_free))
        self.A_free = sp.csr_matrix(self.A_free)
        if self.A_free.shape != (m, self.n_free):
            raise ValueError("A_free has the wrong shape")
        self.c_free = np.zeros(self.n_free) if self.c_free is None else np.asarray(self.c_free, float)
        if self.C_blocks is None:
            self.C_blocks = [np.zeros((n, n)) for n in self.block_sizes]
        self.C_blocks = [np.asarray(C, dtype=float) for C in self.C_blocks]

    @property
    def m(self) -> int:
        return len(self.b)

    def constraint_residual(self, x_free, X_blocks) -> np.ndarray:
        r = self.b - self.A_free @ np.asarray(x_free, float)
        for A, X in zip(self.A_blocks, X_blocks):
            r = r - A @ X.ravel()
        return r

    def objective(self, x_free, X_blocks) -> float:
        val = float(self.c_free @ np.asarray(x_free, float))
        for C, X in zip(self.C_blocks, X_blocks):
            val += float(np.vdot(C, X))
        return val

    def dump(self, stream) -> None:
        """Write the sparse text format (see README)."""
        stream.write(f"{self.m} {self.n_free} {len(self.block_sizes)}\n")
        stream.write(" ".join(str(n) for n in self.block_sizes) + "\n")
        for k, v in enumerate(self.b):
            if v != 0.0:
                stream.write(f"b {k} {float(v)!r}\n")
        for i, v in enumerate(self.c_free):
            if v != 0.0:
                stream.write(f"c {i} {float(v)!r}\n")
        for j, C in enumerate(self.C_blocks):
            n = C.shape[0]
            for r in range(n):
                for c in range(r, n):
                    if C[r, c] != 0.0:
                        stream.write(f"C {j} {r} {c} {float(C[r, c])!r}\n")
        Af = self.A_free.tocoo()
        for k, i, v in sorted(zip(Af.row, Af.col, Af.data)):
            stream.write(f"F {k} {i} {float(v)!r}\n")
        for j, (A, n) in enumerate(zip(self.A_blocks, self.block_sizes)):
            coo = A.tocoo()
            for k, idx, v in sorted(zip(coo.row, coo.col, coo.data)):
                r, c = divmod(int(idx), n)
                if r <= c:
                    stream.write(f"A {k} {j} {r} {c} {float(v)!r}\n")

    @classmethod
    def load(cls, stream) -> SdpProblem:
        lines = [ln.split() for ln in stream if ln.strip()]
        m, nf, nb = (int(v) for v in lines[0])
        sizes = [int(v) for v in lines[1]] if nb else []
        b = np.zeros(m)
        c = np.zeros(nf)
        C = [np.zeros((n, n)) for n in sizes]
        F = sp.dok_matrix((m, nf))
        A = [sp.dok_matrix((m, n * n)) for n in sizes]
        for parts in lines[2:]:
            tag = parts[0]
            if tag == "b":
                b[int(parts[1])] = float(parts[2])
            elif tag == "c":
                c[int(parts[1])] = float(parts[2])
            elif tag == "C":
                j, r, cc, v = int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4])
                C[j][r, cc] = C[j][cc, r] = v
            elif tag == "F":
                F[int(parts[1]), int(parts[2])] = float(parts[3])
            elif tag == "A":
                k, j, r, cc, v = int(parts[1]), int(parts[2]), int(parts[3]), int(parts[4]), float(parts[5])
                n = sizes[j]
                A[j][k, r * n + cc] = v
                A[j][k, cc * n + r] = v
            else:
                raise ValueError(f"unknown record {tag!r}")
        return cls(sizes, b, [a.tocsr() for a in A], nf, F.tocsr(), c, C)


@dataclass
class SdpSolution:
    status: Status
    X: list
    y: np.ndarray
    S: list
    x_free: np.ndarray
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    primal_residual: float = math.nan
    dual_residual: float = math.nan
    history: list = field(default_factory=list)
    wall_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL

    def nearly_optimal(self, tol: float = 1e-6) -> bool:
        """Optimal, or stalled at an iterate whose gap and residuals are below ``tol``."""
        if self.status == Status.OPTIMAL:
            return True
        if self.status not in (Status.SLOW_PROGRESS, Status.ITERATION_LIMIT):
            return False
        vals = (self.gap, self.primal_residual, self.dual_residual)
        return all(math.isfinite(v) and v <= tol for v in vals)


def with_trace_bound(problem: SdpProblem, bound: float) -> SdpProblem:
    """Same problem with the extra constraint sum_j trace(X_j) <= bound.

    The slack becomes a trailing 1x1 block.  Restricting the feasible set keeps
    every feasible point feasible for the original problem, so for a
    minimization the optimum can only rise.
    """
    m = problem.m
    A_blocks = []
    for A, n in zip(problem.A_blocks, problem.block_sizes):
        row = sp.csr_matrix(np.eye(n).ravel()[None, :])
        A_blocks.append(sp.vstack([A, row]).tocsr())
    A_blocks.append(sp.csr_matrix(np.append(np.zeros(m), 1.0)[:, None]))
    A_free = sp.vstack([problem.A_free, sp.csr_matrix((1, problem.n_free))]).tocsr()
    return SdpProblem(list(problem.block_sizes) + [1], np.append(problem.b, bound), A_blocks,
                      problem.n_free, A_free, problem.c_free,
                      list(problem.C_blocks) + [np.zeros((1, 1))])


def strip_trace_bound(solution: SdpSolution) -> SdpSolution:
    """Drop the slack block and multiplier added by ``with_trace_bound``."""
    import dataclasses

    return dataclasses.replace(solution, X=solution.X[:-1], S=solution.S[:-1], y=solution.y[:-1])


# ---------------------------------------------------------------------------
# preprocessing


@dataclass
class _Reduced:
    A3: list          # per block, (m', n, n) dense
    b: np.ndarray
    C: list
    c0: float
    # data for mapping back
    w: np.ndarray
    Q1: np.ndarray
    R11: np.ndarray
    perm: np.ndarray
    rank: int
    row_map: np.ndarray    # (m, m') maps reduced dual y' to original y increment
    status: Status | None = None
    message: str = ""


def _reduce(p: SdpProblem, rank_tol: float = 1e-10) -> _Reduced:
    m = p.m
    Ablk = [A.toarray() for A in p.A_blocks]
    b = p.b.copy()
    C = [Cj.copy() for Cj in p.C_blocks]
    status = None
    message = ""
    nf = p.n_free
    if nf:
        Af = p.A_free.toarray()
        Q, R, perm = la.qr(Af, pivoting=True, mode="full")
        diag = np.abs(np.diag(R))
        r = int(np.sum(diag > rank_tol * max(diag[0] if diag.size else 0.0, 1e-300)))
        Q1, Q2 = Q[:, :r], Q[:, r:]
        R11, R12 = R[:r, :r], R[:r, r:]
        cP = p.c_free[perm]
        cB, cN = cP[:r], cP[r:]
        z = la.solve_triangular(R11, cB, trans="T") if r else np.zeros(0)
        reduced_cost = cN - R12.T @ z if r else cN
        if np.linalg.norm(reduced_cost) > 1e-9 * (1.0 + np.linalg.norm(p.c_free)):
            status = Status.DUAL_INFEASIBLE
            message = "objective unbounded along free-variable null space"
        w = Q1 @ z
        c0 = float(w @ b)
        for j, n in enumerate(p.block_sizes):
            C[j] = C[j] - (Ablk[j].T @ w).reshape(n, n)
        Ablk = [Q2.T @ A for A in Ablk]
        b = Q2.T @ b
        row_map = Q2
    else:
        r = 0
        Q1 = np.zeros((m, 0))
        R11 = np.zeros((0, 0))
        perm = np.zeros(0, dtype=int)
        w = np.zeros(m)
        c0 = 0.0
        row_map = np.eye(m)

    # remove dependent rows
    mr = len(b)
    if mr and Ablk:
        big = np.hstack(Ablk) if Ablk else np.zeros((mr, 0))
        norms = np.linalg.norm(big, axis=1)
        scale = max(norms.max(initial=0.0), 1e-300)
        nonzero = norms > 1e-13 * scale
        if not np.all(nonzero):
            if np.any(np.abs(b[~nonzero]) > 1e-9 * (1 + np.abs(b).max())):
                status = Status.PRIMAL_INFEASIBLE
                message = "equality 0 = b_k with b_k != 0"
        keep_idx = np.flatnonzero(nonzero)
        sub = big[keep_idx] / norms[keep_idx, None]
        if len(keep_idx):
            _, Rr, piv = la.qr(sub.T, mode="economic", pivoting=True)
            d = np.abs(np.diag(Rr))
            rr = int(np.sum(d > 1e-9 * d[0]))
            indep = np.sort(piv[:rr])
            dep = np.sort(piv[rr:])
            if len(dep):
                bs = b[keep_idx] / norms[keep_idx]
                coef, *_ = np.linalg.lstsq(sub[indep].T, sub[dep].T, rcond=None)
                mismatch = bs[dep] - coef.T @ bs[indep]
                if np.any(np.abs(mismatch) > 1e-8 * (1 + np.abs(bs).max())):
                    status = Status.PRIMAL_INFEASIBLE
                    message = "inconsistent linear equalities"
            rows = keep_idx[indep]
        else:
            rows = keep_idx
        D = np.linalg.norm(big[rows], axis=1)
        Ablk = [A[rows] / D[:, None] for A in Ablk]
        b = b[rows] / D
        row_map = row_map[:, rows] / D[None, :]
    A3 = [A.reshape(len(b), n, n) for A, n in zip(Ablk, p.block_sizes)]
    return _Reduced(A3, b, C, c0, w, Q1, R11, perm, r, row_map, status, message)


def constraint_conditioning(problem: SdpProblem) -> float:
    """Smallest over largest singular value of the equality rows the solver keeps.

    Measured after free variables and exactly dependent rows are eliminated,
    so it reflects what the interior point iteration actually sees.
    """
    red = _reduce(problem)
    if not red.A3 or len(red.b) == 0:
        return 1.0
    big = np.hstack([A.reshape(len(red.b), -1) for A in red.A3])
    sv = np.linalg.svd(big, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


# ---------------------------------------------------------------------------
# interior point iteration


class _SchurFactor:
    """Least-norm solves with B, regularized by reg * D^2 (D = row norms of B).

    Uses a QR factorization of [B^T D^-1; sqrt(reg) I] and keeps the
    orthogonal factor, so the primal correction B^T w is obtained without
    squaring the condition number of B.
    """

    def __init__(self, B, reg: float = 1e-12):
        m, N = B.shape
        d = np.linalg.norm(B, axis=1)
        d = np.where(d > 0, d, 1.0)
        self.d = d
        self.B = B
        aug = np.vstack([(B / d[:, None]).T, math.sqrt(reg) * np.eye(m)])
        Q, R = la.qr(aug, mode="economic", overwrite_a=True, check_finite=False)
        if not np.all(np.isfinite(R)) or np.any(np.diag(R) == 0):
            raise la.LinAlgError("Schur complement factorization failed")
        self.Q1 = Q[:N]
        self.R = R

    def least_norm(self, rhs, refine: int = 2):
        """(B^T w, w) with (B B^T + reg D^2) w = rhs."""
        v = np.zeros(self.B.shape[1])
        w = np.zeros(self.B.shape[0])
        r = rhs
        for _ in range(refine + 1):
            u = la.solve_triangular(self.R, r / self.d, trans="T")
            v = v + self.Q1 @ u
            w = w + la.solve_triangular(self.R, u) / self.d
            r = rhs - self.B @ v
        return v, w


def _sym(M):
    return (M + M.T) / 2


def _apply_A(A3, Z):
    m = A3[0].shape[0] if A3 else 0
    out = np.zeros(m)
    for A, Zj in zip(A3, Z):
        out += A.reshape(m, -1) @ Zj.ravel()
    return out


def _apply_AT(A3, y):
    return [np.tensordot(y, A, axes=(0, 0)) for A in A3]


def _nt_scaling(X, S):
    """G with G^-1 X G^-T = G^T S G = diag(lam) (Nesterov-Todd scaling point)."""
    L = la.cholesky(X, lower=True)
    w, U = np.linalg.eigh(_sym(L.T @ S @ L))
    if w.min() <= 0:
        raise la.LinAlgError("X S has a nonpositive eigenvalue")
    lam = np.sqrt(w)
    LU = L @ U
    G = LU / np.sqrt(lam)[None, :]
    Ginv = (np.sqrt(lam)[:, None] * U.T) @ la.solve_triangular(L, np.eye(len(lam)), lower=True)
    return G, Ginv, lam


def _scaled_step(lam, d):
    """Largest alpha with diag(lam) + alpha d PSD (inf if unbounded)."""
    r = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(_sym(d * r[:, None] * r[None, :])).min()
    return math.inf if e >= 0 else -1.0 / e


def solve(problem: SdpProblem, gap_tol: float = 1e-8, feas_tol: float = 1e-8,
          max_iter: int = 200, step_fraction: float = 0.98, verbose=False,
          stream=None) -> SdpSolution:
    """Solve ``problem``; never raises on numerical trouble, reports a status instead."""
    start = time.perf_counter()
    out = stream if stream is not None else (sys.stderr if verbose else None)
    red = _reduce(problem)
    sizes = problem.block_sizes
    if red.status is not None:
        sol = _empty_solution(problem, red.status, red.message)
        sol.wall_time = time.perf_counter() - start
        return sol
    m = len(red.b)
    n_tot = sum(sizes)
    A3, b, C = red.A3, red.b, red.C
    if not sizes:
        sol = _empty_solution(problem, Status.OPTIMAL if m == 0 else Status.PRIMAL_INFEASIBLE, "no blocks")
        return _finish(problem, red, sol, [], np.zeros(m), [], start)
    normb = np.linalg.norm(b)
    normC = math.sqrt(sum(np.sum(Cj ** 2) for Cj in C))

    # identity-scaled start sized from the data
    X, S = [], []
    for A, Cj, n in zip(A3, C, sizes):
        normA = np.linalg.norm(A.reshape(m, -1), axis=1) if m else np.zeros(0)
        xi = max(10.0, math.sqrt(n), n * max(((1 + np.abs(b)) / (1 + normA)).max(initial=0.0), 1.0))
        eta = max(10.0, math.sqrt(n), normA.max(initial=0.0), np.linalg.norm(Cj))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)

    history = []
    status = Status.ITERATION_LIMIT
    message = ""
    best = None
    pinf_count = dinf_count = 0
    stall = 0
    it = 0
    for it in range(max_iter + 1):
        AX = _apply_A(A3, X)
        rp = b - AX
        ATy = _apply_AT(A3, y)
        Rd = [Cj - Aty - Sj for Cj, Aty, Sj in zip(C, ATy, S)]
        pobj = sum(float(np.vdot(Cj, Xj)) for Cj, Xj in zip(C, X))
        dobj = float(b @ y)
        xs = sum(float(np.vdot(Xj, Sj)) for Xj, Sj in zip(X, S))
        mu = xs / n_tot
        relgap = abs(pobj - dobj) / (1 + abs(pobj + red.c0) + abs(dobj + red.c0))
        pinf = np.linalg.norm(rp) / (1 + normb)
        dinf = math.sqrt(sum(np.sum(R ** 2) for R in Rd)) / (1 + normC)
        rec = dict(iteration=it, mu=mu, pobj=pobj + red.c0, dobj=dobj + red.c0, gap=relgap,
                   pinf=pinf, dinf=dinf)
        merit = max(relgap, pinf, dinf)
        if best is None or merit < best[0]:
            best = (merit, [Xj.copy() for Xj in X], y.copy(), [Sj.copy() for Sj in S], it)
        if relgap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            history.append(rec)
            _log(out, rec)
            status = Status.OPTIMAL
            break
        # certificate-style infeasibility tests
        ATyS = math.sqrt(sum(np.sum((a + s_) ** 2) for a, s_ in zip(ATy, S)))
        if dobj > 0 and (ATyS / dobj < 1e-8 or (dobj > 1e10 and ATyS / dobj < 1e-6)):
            pinf_count += 1
        else:
            pinf_count = 0
        AXn = np.linalg.norm(AX)
        if pobj < 0 and (AXn / -pobj < 1e-8 or (-pobj > 1e10 and AXn / -pobj < 1e-6)):
            dinf_count += 1
        else:
            dinf_count = 0
        if pinf_count >= 5:
            status, message = Status.PRIMAL_INFEASIBLE, "dual objective diverges with bounded dual residual"
            history.append(rec)
            break
        if dinf_count >= 5:
            status, message = Status.DUAL_INFEASIBLE, "primal objective diverges with bounded primal residual"
            history.append(rec)
            break
        if it == max_iter:
            history.append(rec)
            break

        try:
            scal = [_nt_scaling(Xj, Sj) for Xj, Sj in zip(X, S)]
            At = [np.matmul(G.T, np.matmul(A, G)) for A, (G, _, _) in zip(A3, scal)]
            Rdt = [G.T @ R @ G for R, (G, _, _) in zip(Rd, scal)]
            cM = _SchurFactor(np.hstack([a.reshape(m, -1) for a in At]))
        except (la.LinAlgError, np.linalg.LinAlgError, ValueError) as exc:
            status, message = Status.SLOW_PROGRESS, f"factorization failed: {exc}"
            history.append(rec)
            break
        lams = [lam for _, _, lam in scal]

        offsets = np.cumsum([0] + [n * n for n in sizes])

        def unflatten(v):
            return [_sym(v[o:o + n * n].reshape(n, n)) for o, n in zip(offsets, sizes)]

        def direction(H):
            Rc = [2 * h / (lam[:, None] + lam[None, :]) for h, lam in zip(H, lams)]
            z = [r - rd for r, rd in zip(Rc, Rdt)]
            v, dy_ = cM.least_norm(rp - _apply_A(At, z))
            dx = [zz + c for zz, c in zip(z, unflatten(v))]
            ds = [rd - a for rd, a in zip(Rdt, _apply_AT(At, dy_))]
            # refine the primal equation in unscaled coordinates
            for _ in range(2):
                dX = [G @ d @ G.T for d, (G, _, _) in zip(dx, scal)]
                res = rp - _apply_A(A3, dX)
                if np.linalg.norm(res) <= 1e-14 * (1 + normb):
                    break
                v, dyc = cM.least_norm(res, refine=0)
                dx = [d + c for d, c in zip(dx, unflatten(v))]
                ds = [d - a for d, a in zip(ds, _apply_AT(At, dyc))]
                dy_ = dy_ + dyc
            return dx, ds, dy_

        # predictor
        dx, ds, dy = direction([-np.diag(lam ** 2) for lam in lams])
        ap = min(1.0, min(_scaled_step(lam, d) for lam, d in zip(lams, dx)))
        ad = min(1.0, min(_scaled_step(lam, d) for lam, d in zip(lams, ds)))
        mu_aff = sum(float(np.vdot(np.diag(lam) + ap * a, np.diag(lam) + ad * d))
                     for lam, a, d in zip(lams, dx, ds)) / n_tot
        expo = max(1.0, 3 * min(ap, ad) ** 2)
        sigma = min(1.0, max(0.0, mu_aff / mu) ** expo) if mu > 0 else 0.0
        # corrector
        H = [sigma * mu * np.eye(len(lam)) - np.diag(lam ** 2) - _sym(a @ d)
             for lam, a, d in zip(lams, dx, ds)]
        dx, ds, dy = direction(H)
        ap = min(1.0, step_fraction * min(_scaled_step(lam, d) for lam, d in zip(lams, dx)))
        ad = min(1.0, step_fraction * min(_scaled_step(lam, d) for lam, d in zip(lams, ds)))
        rec.update(step_p=ap, step_d=ad, sigma=sigma)
        history.append(rec)
        _log(out, rec)
        if not (np.isfinite(ap) and np.isfinite(ad)) or max(ap, ad) < 1e-9:
            stall += 1
        else:
            stall = 0
        if stall >= 3:
            status, message = Status.SLOW_PROGRESS, "step lengths collapsed"
            break
        X = [_sym(Xj + ap * (G @ d @ G.T)) for Xj, d, (G, _, _) in zip(X, dx, scal)]
        S = [_sym(Sj + ad * (Gi.T @ d @ Gi)) for Sj, d, (_, Gi, _) in zip(S, ds, scal)]
        y = y + ad * dy
        if len(history) > 30:
            recent = [h["mu"] for h in history[-20:]]
            merits = [max(h["gap"], h["pinf"], h["dinf"]) for h in history[-20:]]
            if min(merits[-5:]) > 0.5 * min(merits[:5]) and recent[-1] > 0.5 * recent[0]:
                status, message = Status.SLOW_PROGRESS, "no progress over 20 iterations"
                break

    if status not in (Status.OPTIMAL, Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE) and best is not None:
        _, X, y, S, _ = best
    sol = SdpSolution(status, [], np.zeros(problem.m), [], np.zeros(problem.n_free),
                      math.nan, math.nan, math.nan, it, history=history, message=message)
    return _finish(problem, red, sol, X, y, S, start)


def _finish(problem, red, sol, X, y, S, start):
    m = problem.m
    if X:
        r_vec = problem.b.copy()
        for A, Xj in zip(problem.A_blocks, X):
            r_vec -= A @ Xj.ravel()
        x_free = np.zeros(problem.n_free)
        if problem.n_free and red.rank:
            xB = la.solve_triangular(red.R11, red.Q1.T @ r_vec)
            x_free[red.perm[:red.rank]] = xB
        y_orig = red.w + red.row_map @ y
        sol.X = X
        sol.S = S
        sol.y = y_orig
        sol.x_free = x_free
        sol.primal_objective = problem.objective(x_free, X)
        sol.dual_objective = float(problem.b @ y_orig)
        res = problem.constraint_residual(x_free, X)
        sol.primal_residual = float(np.abs(res).max(initial=0.0))
        dres = problem.A_free.T @ y_orig - problem.c_free if problem.n_free else np.zeros(0)
        dmax = float(np.abs(dres).max(initial=0.0))
        for A, Cj, Sj in zip(problem.A_blocks, problem.C_blocks, S):
            Rj = Cj - (A.T @ y_orig).reshape(Cj.shape) - Sj
            dmax = max(dmax, float(np.abs(Rj).max(initial=0.0)))
        sol.dual_residual = dmax
        p, d = sol.primal_objective, sol.dual_objective
        sol.gap = abs(p - d) / (1 + abs(p) + abs(d))
    sol.wall_time = time.perf_counter() - start
    return sol


def _empty_solution(problem, status, message):
    return SdpSolution(status, [np.zeros((n, n)) for n in problem.block_sizes], np.zeros(problem.m),
                       [np.zeros((n, n)) for n in problem.block_sizes], np.zeros(problem.n_free),
                       math.nan, math.nan, math.nan, 0, message=message)


def _log(stream, rec):
    if stream is None:
        log.debug("%s", rec)
        return
    stream.write("{iteration:3d} mu={mu:9.2e} pobj={pobj: .9e} dobj={dobj: .9e} gap={gap:8.1e} "
                 "pinf={pinf:8.1e} dinf={dinf:8.1e}".format(**rec))
    if "step_p" in rec:
        stream.write(" ap={step_p:.3f} ad={step_d:.3f}".format(**rec))
    stream.write("\n")
