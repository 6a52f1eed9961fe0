"""Translate the auxiliary-function bound problem into a block SDP.

Each weighted-SOS membership ``P in WSOS_mu(set)`` is encoded with the
generalized S-procedure::

    P - sum_i h_i sigma_i - sum_i l_i rho_i = sigma_0

with Gram-matrix blocks for sigma_0 and every sigma_i, free coefficients for
every rho_i, and one linear equation per monomial.  Under a sign symmetry
x -> diag(s) x, only invariant monomials are kept in V and rho_i and each Gram
block splits into its even and odd parity classes.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .polynomial import Polynomial, total_degree_monomials
from .sdpsolve import SdpProblem, SdpSolution, Status
from .system import TIME, ProblemSpec, SemialgebraicSet, build_omega, lie_derivative


class CertificateError(RuntimeError):
    """No usable certificate could be read from a solver result."""


def monomial_character(mono, signs) -> int:
    c = 1
    for e, s in zip(mono, signs):
        if s < 0 and e % 2:
            c = -c
    return c


def monomial_basis(nvars: int, degree: int, signs: Sequence[int] | None = None,
                   parity: int = 1) -> list:
    """Monomials of total degree <= degree in graded-lex order.

    With ``signs`` only monomials whose sign character equals ``parity`` are kept.
    """
    if degree < 0:
        return []
    basis = total_degree_monomials(nvars, degree)
    if signs is None:
        return basis
    return [m for m in basis if monomial_character(m, signs) == parity]


class AffinePolynomial:
    """Polynomial whose coefficients are affine in the SDP free variables.

    ``const`` is a plain polynomial; ``linear[k]`` is the polynomial multiplying
    free variable k.
    """

    def __init__(self, variables, const: Polynomial | None = None, linear: dict | None = None):
        self.variables = tuple(variables)
        self.const = (const if const is not None else Polynomial.zero(self.variables)).with_variables(self.variables)
        self.linear = {k: p.with_variables(self.variables) for k, p in (linear or {}).items()}

    def degree(self) -> int:
        return max([self.const.degree()] + [p.degree() for p in self.linear.values()])

    def evaluate_coefficients(self, x_free) -> Polynomial:
        out = self.const
        for k, p in self.linear.items():
            out = out + p * float(x_free[k])
        return out


@dataclass
class WsosConstraint:
    """target in WSOS_degree(set) over the variables in ``scope``.

    ``multiplier_degree`` (default ``degree``) caps the inequality
    multipliers: sigma_i gets the largest even degree <= multiplier_degree - deg h_i.
    """

    target: AffinePolynomial
    set: SemialgebraicSet
    degree: int
    scope: tuple
    label: str = ""
    signs: tuple | None = None
    multiplier_degree: int | None = None

    def __post_init__(self):
        self.scope = tuple(self.scope)
        self.set = self.set.with_variables(self.scope)
        if self.degree < self.set.max_degree():
            raise ValueError(f"{self.label}: degree {self.degree} below set degree {self.set.max_degree()}")


@dataclass
class _Assembled:
    """Bookkeeping for one assembled WSOS constraint."""

    constraint: WsosConstraint
    sigma0_blocks: list          # block indices
    sigma_blocks: list           # per inequality: list of block indices (may be empty if omitted)
    rho_slices: list             # per equality: (slice, basis) or None
    rows: dict                   # monomial -> equation index


@dataclass
class GramBlock:
    """Gram block over the basis polynomials W^T z (W = None means z itself)."""

    label: str
    monos: list
    scope: tuple
    W: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.monos) if self.W is None else self.W.shape[1]

    def basis_polynomials(self) -> list:
        if self.W is None:
            return [Polynomial(self.scope, {m: 1.0}) for m in self.monos]
        return [Polynomial(self.scope, {m: w for m, w in zip(self.monos, self.W[:, r]) if w != 0.0})
                for r in range(self.W.shape[1])]

    def drop(self, indices) -> dict:
        """Remove basis elements; returns old -> new index map of the survivors."""
        keep = [i for i in range(self.size) if i not in indices]
        if self.W is None:
            self.monos = [self.monos[i] for i in keep]
        else:
            self.W = self.W[:, keep]
        return {old: new for new, old in enumerate(keep)}


def quotient_basis(monos: list, equalities, tol: float = 1e-10):
    """Orthonormal W spanning a complement of the ideal directions within span(monos).

    A coefficient vector p is an ideal direction when p^T z is a combination of
    products m * l_i lying inside span(monos).  Squares and cross terms of such
    directions are absorbed by the equality multipliers, so the Gram matrix can
    be restricted to the complement.  Returns None when nothing is removed.
    """
    if not equalities or not monos:
        return None
    index = {m: i for i, m in enumerate(monos)}
    top = max(sum(m) for m in monos)
    nv = len(monos[0])
    vecs = []
    for g in equalities:
        dg = g.degree()
        if dg < 1:
            continue
        for m in total_degree_monomials(nv, top - dg):
            v = np.zeros(len(monos))
            ok = True
            for beta, coef in g.terms.items():
                prod = tuple(a + b for a, b in zip(m, beta))
                j = index.get(prod)
                if j is None:
                    ok = False
                    break
                v[j] += coef
            if ok:
                vecs.append(v)
    if not vecs:
        return None
    P = np.array(vecs)
    _, sv, Vt = np.linalg.svd(P, full_matrices=True)
    rank = int(np.sum(sv > tol * max(sv[0], 1.0)))
    W = Vt[rank:].T
    W[np.abs(W) < 1e-15] = 0.0
    return W


class SdpBuilder:
    """Collects free variables, Gram blocks and coefficient-matching equations."""

    def __init__(self):
        self.free_names: list = []
        self.blocks: list = []       # GramBlock
        self.rows_b: list = []
        self.free_entries: list = []  # (row, col, val)
        self.block_entries: list = []  # per block: list of (row, r, c, val), r <= c
        self.c_free: dict = {}
        self.assembled: list = []
        self.use_quotient = True

    def add_free(self, name: str, count: int = 1) -> slice:
        start = len(self.free_names)
        self.free_names.extend(f"{name}[{i}]" for i in range(count))
        return slice(start, start + count)

    def add_block(self, label: str, basis: list, scope, W=None) -> int:
        self.blocks.append(GramBlock(label, list(basis), tuple(scope), W))
        self.block_entries.append([])
        return len(self.blocks) - 1

    def _gram_blocks(self, label, nvars, degree, signs, scope, equalities=()) -> list:
        if degree < 0:
            return []
        if signs is None:
            classes = [monomial_basis(nvars, degree)]
        else:
            classes = [monomial_basis(nvars, degree, signs, +1), monomial_basis(nvars, degree, signs, -1)]
        out = []
        for k, basis in enumerate(classes):
            if not basis:
                continue
            W = quotient_basis(basis, equalities) if self.use_quotient else None
            if W is not None and W.shape[1] == 0:
                continue
            name = f"{label}/{'even' if k == 0 else 'odd'}" if signs else label
            out.append(self.add_block(name, basis, scope, W))
        return out

    def add_wsos(self, c: WsosConstraint) -> _Assembled:
        nv = len(c.scope)
        mu = c.degree
        signs = c.signs
        rows: dict = {}

        def row(mono):
            idx = rows.get(mono)
            if idx is None:
                idx = len(self.rows_b)
                self.rows_b.append(0.0)
                rows[mono] = idx
            return idx

        # target coefficients:  sum_k P_k y_k + const  (moved to b)
        for mono, coef in c.target.const.terms.items():
            k = row(mono)
            self.rows_b[k] -= coef
        for var, poly in c.target.linear.items():
            for mono, coef in poly.terms.items():
                self.free_entries.append((row(mono), var, coef))

        def add_gram(block_idx, weight: Polynomial | None):
            blk = self.blocks[block_idx]
            basis = blk.monos
            n = len(basis)
            wterms = [((0,) * nv, 1.0)] if weight is None else list(weight.terms.items())
            entries = self.block_entries[block_idx]
            if blk.W is None:
                for r in range(n):
                    zr = basis[r]
                    for cc in range(r, n):
                        zc = basis[cc]
                        base = tuple(a + b for a, b in zip(zr, zc))
                        for beta, hb in wterms:
                            mono = tuple(a + b for a, b in zip(base, beta))
                            entries.append((row(mono), r, cc, -hb))
                return
            # polynomial basis: coefficient of z^alpha is <W^T E_alpha W, Q>
            W = blk.W
            G = {}
            for a in range(n):
                for b2 in range(n):
                    base = tuple(p + q for p, q in zip(basis[a], basis[b2]))
                    outer = np.outer(W[a], W[b2])
                    if base in G:
                        G[base] += outer
                    else:
                        G[base] = outer
            size = W.shape[1]
            iu = np.triu_indices(size)
            for base, Gm in G.items():
                Gs = (Gm + Gm.T) / 2
                vals = Gs[iu]
                nz = np.flatnonzero(np.abs(vals) > 1e-14)
                for beta, hb in wterms:
                    k = row(tuple(p + q for p, q in zip(base, beta)))
                    for idx in nz:
                        entries.append((k, int(iu[0][idx]), int(iu[1][idx]), -hb * vals[idx]))

        eqs = list(c.set.equalities)
        sigma0 = self._gram_blocks(f"{c.label}:sigma0", nv, mu // 2, signs, c.scope, eqs)
        for bi in sigma0:
            add_gram(bi, None)
        sigma_blocks = []
        for i, h in enumerate(c.set.inequalities):
            room = (mu if c.multiplier_degree is None else c.multiplier_degree) - h.degree()
            if room < 0:
                warnings.warn(f"{c.label}: degree {mu} too small for multiplier of {h}; omitted")
                sigma_blocks.append([])
                continue
            blks = self._gram_blocks(f"{c.label}:sigma{i + 1}", nv, room // 2, signs, c.scope, eqs)
            for bi in blks:
                add_gram(bi, h)
            sigma_blocks.append(blks)
        rho_slices = []
        for i, g in enumerate(c.set.equalities):
            room = mu - g.degree()
            if room < 0:
                warnings.warn(f"{c.label}: degree {mu} too small for multiplier of {g}; omitted")
                rho_slices.append(None)
                continue
            basis = monomial_basis(nv, room, signs, +1) if signs else monomial_basis(nv, room)
            sl = self.add_free(f"{c.label}:rho{i + 1}", len(basis))
            for j, m in enumerate(basis):
                for beta, gb in g.terms.items():
                    mono = tuple(a + b for a, b in zip(m, beta))
                    self.free_entries.append((row(mono), sl.start + j, -gb))
            rho_slices.append((sl, basis))
        asm = _Assembled(c, sigma0, sigma_blocks, rho_slices, rows)
        self.assembled.append(asm)
        return asm

    def prune_gram_bases(self) -> int:
        """Drop Gram basis monomials whose diagonal entry is forced to zero.

        A row with b = 0, no free-variable terms and only same-signed diagonal
        Gram entries forces each of those entries, and hence the whole row and
        column of its basis monomial, to vanish.  Repeats until nothing changes
        and returns the number of monomials removed.  Removing them keeps the
        feasible set but restores strict feasibility on the remaining face.
        """
        has_free = set(r for r, _, v in self.free_entries if v != 0.0)
        removed_total = 0
        while True:
            rows = {}
            for bi, entries in enumerate(self.block_entries):
                for k, r, c, v in entries:
                    rows.setdefault(k, []).append((bi, r, c, v))
            dead = set()
            for k, ents in rows.items():
                if k in has_free or self.rows_b[k] != 0.0:
                    continue
                ents = [e for e in ents if e[3] != 0.0]
                if ents and all(r == c for _, r, c, _ in ents):
                    signs = {v > 0 for *_, v in ents}
                    if len(signs) == 1:
                        dead.update((bi, r) for bi, r, _, _ in ents)
            if not dead:
                return removed_total
            removed_total += len(dead)
            self._drop_basis(dead)

    def facial_reduction(self, max_rounds: int = 50, tol: float = 1e-7) -> int:
        """Remove Gram basis monomials on which every feasible Gram matrix vanishes.

        Each round solves an LP for a combination y of the equations with
        A_free^T y = 0, b^T y = 0 and every block of A^T y diagonal and
        nonnegative.  Any feasible X is then orthogonal to that diagonal
        matrix, so basis monomials with a positive diagonal weight carry zero
        rows and columns and are dropped.  Returns the count removed.
        """
        from scipy.optimize import linprog

        removed_total = 0
        m = len(self.rows_b)
        for _ in range(max_rounds):
            live = [bi for bi, blk in enumerate(self.blocks) if blk.size]
            if not live or m == 0:
                break
            eq_rows, diag_rows = [], []
            diag_index = []
            n_eq = 0
            # free-variable columns
            cols = {}
            for k, j, v in self.free_entries:
                if v != 0.0:
                    cols.setdefault(("f", j), []).append((k, v))
            off, dia = {}, {}
            for bi in live:
                for k, r, c, v in self.block_entries[bi]:
                    if v == 0.0:
                        continue
                    if r == c:
                        dia.setdefault((bi, r), []).append((k, v))
                    else:
                        off.setdefault((bi, r, c), []).append((k, v))
            ri, ci, vi = [], [], []
            for entries in list(cols.values()) + list(off.values()):
                for k, v in entries:
                    ri.append(n_eq)
                    ci.append(k)
                    vi.append(v)
                n_eq += 1
            for k, v in enumerate(self.rows_b):
                if v != 0.0:
                    ri.append(n_eq)
                    ci.append(k)
                    vi.append(v)
            n_eq += 1
            nd = len(dia)
            keys = list(dia)
            # variables: y (m, free) then s (nd, in [0, 1]);  diag(A^T y) - s = 0
            for i, key in enumerate(keys):
                for k, v in dia[key]:
                    ri.append(n_eq + i)
                    ci.append(k)
                    vi.append(v)
                ri.append(n_eq + i)
                ci.append(m + i)
                vi.append(-1.0)
            A_eq = sp.csr_matrix((vi, (ri, ci)), shape=(n_eq + nd, m + nd))
            cost = np.concatenate([np.zeros(m), -np.ones(nd)])
            bounds = [(None, None)] * m + [(0.0, 1.0)] * nd
            res = linprog(cost, A_eq=A_eq, b_eq=np.zeros(n_eq + nd), bounds=bounds, method="highs")
            if res.status != 0 or -res.fun < tol:
                break
            svals = res.x[m:]
            dead = {keys[i] for i in range(nd) if svals[i] > tol}
            if not dead:
                break
            removed_total += len(dead)
            self._drop_basis(dead)
        return removed_total

    def _dense_block(self, bi: int, m: int) -> np.ndarray:
        """Constraint matrices of block ``bi`` as an (m, n, n) symmetric array."""
        n = self.blocks[bi].size
        M = np.zeros((m, n, n))
        for k, r, c, v in self.block_entries[bi]:
            M[k, r, c] += v
            if r != c:
                M[k, c, r] += v
        return M

    def _restrict_block(self, bi: int, N: np.ndarray):
        """Replace the Gram matrix Q of block ``bi`` by N Q' N^T."""
        blk = self.blocks[bi]
        m = len(self.rows_b)
        M = np.einsum("ji,kjl,lr->kir", N, self._dense_block(bi, m), N)
        base = np.eye(len(blk.monos)) if blk.W is None else blk.W
        blk.W = base @ N
        size = N.shape[1]
        iu = np.triu_indices(size)
        vals = M[:, iu[0], iu[1]]
        scale = max(np.abs(vals).max(initial=0.0), 1.0)
        ks, idx = np.nonzero(np.abs(vals) > 1e-14 * scale)
        self.block_entries[bi] = [(int(k), int(iu[0][i]), int(iu[1][i]), float(vals[k, i]))
                                  for k, i in zip(ks, idx)]

    def semidefinite_reduction(self, max_rounds: int = 10, tol: float = 1e-6,
                               max_conditioning_loss: float = 1e-3) -> int:
        """Restrict Gram blocks to the face that contains every feasible point.

        Each round looks for u with A_free^T u = 0, b^T u = 0 and every block
        of Z = -A^T u positive semidefinite with unit total trace.  Every
        feasible Gram matrix is orthogonal to Z, so each block is restricted
        to the null space of its part of Z.  Unlike the diagonal LP this also
        finds faces that are not spanned by monomials.  The search is posed as
        the dual of a homogeneous SDP with the same blocks and solved by the
        package's own solver; no certificate shows up as DualInfeasible.

        The certificate is only as exact as the interior point solve.  When it
        is merely approximate the restricted rows become nearly, but not
        exactly, dependent and the bound SDP gets harder rather than easier.
        A round that shrinks the conditioning of the equality rows by more
        than ``max_conditioning_loss`` is therefore undone and ends the loop.
        Returns the total dimension removed.
        """
        import copy

        import scipy.sparse as sp_

        from .sdpsolve import SdpProblem, Status, constraint_conditioning, solve

        removed_total = 0
        m = len(self.rows_b)
        if m == 0:
            return 0
        cond = None
        for _ in range(max_rounds):
            base, live = self._problem()
            b = base.b
            if not live:
                break
            if cond is None:
                cond = constraint_conditioning(base)
            traces = np.zeros(m)
            for A, n in zip(base.A_blocks, base.block_sizes):
                traces -= A @ np.eye(n).ravel()
            A_free = sp_.hstack([base.A_free, sp_.csr_matrix(b[:, None]),
                                 sp_.csr_matrix(traces[:, None])]).tocsr()
            c_free = np.zeros(base.n_free + 2)
            c_free[-1] = 1.0
            aux = SdpProblem(base.block_sizes, np.zeros(m), base.A_blocks, base.n_free + 2,
                             A_free, c_free)
            sol = solve(aux, max_iter=100)
            if sol.status != Status.OPTIMAL and not sol.nearly_optimal(1e-7):
                break
            total = sum(np.trace(Z) for Z in sol.S)
            if not total > 0:
                break
            saved = (copy.deepcopy(self.blocks), list(self.block_entries))
            removed = 0
            for bi, Z in zip(live, sol.S):
                w, U = np.linalg.eigh((Z + Z.T) / (2 * total))
                keep = w <= tol
                if keep.all():
                    continue
                removed += int((~keep).sum())
                self._restrict_block(bi, U[:, keep])
            if not removed:
                break
            new_cond = constraint_conditioning(self._problem()[0])
            if new_cond < max_conditioning_loss * cond:
                self.blocks, self.block_entries = saved
                break
            removed_total += removed
            cond = new_cond
        return removed_total

    def _drop_basis(self, dead):
        for bi in {bi for bi, _ in dead}:
            new_index = self.blocks[bi].drop({r for b2, r in dead if b2 == bi})
            self.block_entries[bi] = [(k, new_index[r], new_index[c], v)
                                      for k, r, c, v in self.block_entries[bi]
                                      if r in new_index and c in new_index]

    def build(self, reduce: str = "sdp") -> SdpProblem:
        """Assemble the SdpProblem; ``reduce`` is "sdp", "lp", "diagonal" or "none"."""
        if reduce in ("sdp", "lp", "diagonal"):
            self.prune_gram_bases()
        if reduce in ("sdp", "lp"):
            self.facial_reduction()
        if reduce == "sdp":
            self.semidefinite_reduction()
        sdp, live = self._problem()
        self.sdp_block = [None] * len(self.blocks)
        for j, bi in enumerate(live):
            self.sdp_block[bi] = j
        return sdp

    def _problem(self):
        """SdpProblem of the current state and the builder indices of its blocks."""
        m = len(self.rows_b)
        nf = len(self.free_names)
        if self.free_entries:
            r, cidx, v = zip(*self.free_entries)
        else:
            r, cidx, v = (), (), ()
        A_free = sp.coo_matrix((v, (r, cidx)), shape=(m, nf)).tocsr()
        A_blocks = []
        sizes = []
        live = []
        for bi, (blk, entries) in enumerate(zip(self.blocks, self.block_entries)):
            n = blk.size
            if n == 0:
                continue
            live.append(bi)
            sizes.append(n)
            rr, ii, vv = [], [], []
            for k, r_, c_, val in entries:
                rr.append(k)
                ii.append(r_ * n + c_)
                vv.append(val)
                if r_ != c_:
                    rr.append(k)
                    ii.append(c_ * n + r_)
                    vv.append(val)
            A_blocks.append(sp.coo_matrix((vv, (rr, ii)), shape=(m, n * n)).tocsr())
        c = np.zeros(nf)
        for k, val in self.c_free.items():
            c[k] = val
        return SdpProblem(sizes, np.array(self.rows_b), A_blocks, nf, A_free, c), live


def assemble_sos_constraint(c: WsosConstraint, builder: SdpBuilder | None = None):
    """Add one WSOS constraint to ``builder`` (a fresh one if omitted)."""
    builder = builder or SdpBuilder()
    return builder, builder.add_wsos(c)


# ---------------------------------------------------------------------------
# the bound problem


@dataclass
class BoundSdp:
    spec: ProblemSpec
    degree: int
    sdp: SdpProblem
    builder: SdpBuilder
    lam_index: int
    v_slice: slice
    v_basis: list
    v_vars: tuple
    options: dict = field(default_factory=dict)


@dataclass
class BoundResult:
    degree: int
    lam: float
    V: Polynomial | None
    status: Status
    gap: float
    iterations: int
    wall_time: float
    iteration: int = 1
    message: str = ""
    primal_residual: float = math.nan
    nearly_optimal: bool = False
    trace_bound: float | None = None
    solution: SdpSolution | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL


def _scope_signs(scope, spec: ProblemSpec, use_symmetry: bool):
    if not use_symmetry or spec.symmetry is None:
        return None
    smap = spec.sign_map()
    return tuple(smap.get(v, 1) for v in scope)


def _x_only(polys, spec):
    return all(not p.with_variables(spec.variables).depends_on(TIME) for p in polys)


def assemble_bound_sdp(spec: ProblemSpec, d: int, time_independent: bool = False,
                       terminal_time: bool = False, symmetry: bool = True,
                       reduce: str = "sdp",
                       decay_multiplier_degree: int | None = None) -> BoundSdp:
    """SDP whose optimum is the degree-d bound lambda*_d.

    ``decay_multiplier_degree`` caps the Omega multipliers of the decay
    constraint (default: its full degree d - 1 + deg F).  Passing d gives
    them the same degree as in the domination constraint; this restricts the
    certificate and can only raise the bound.
    """
    if spec.observable_fn is not None:
        raise ValueError("SOS synthesis needs a polynomial observable; this problem's observable is not polynomial")
    phi = spec.observable
    if d < phi.degree():
        raise ValueError(f"degree {d} below observable degree {phi.degree()}")
    if terminal_time and not spec.horizon.finite:
        raise ValueError("terminal-time bounds need a finite horizon")
    full = spec.variables
    states = spec.states
    v_vars = states if time_independent else full
    v_signs = _scope_signs(v_vars, spec, symmetry)
    v_basis = monomial_basis(len(v_vars), d, v_signs, +1) if v_signs else monomial_basis(len(v_vars), d)

    b = SdpBuilder()
    lam = b.add_free("lambda").start
    b.c_free[lam] = 1.0
    v_slice = b.add_free("V", len(v_basis))
    v_monos = [Polynomial(v_vars, {m: 1.0}).with_variables(full) for m in v_basis]

    omega = build_omega(spec)
    deg_f = spec.dynamics_degree()
    mu1 = d - 1 + max(deg_f, 1)
    if spec.integrand is not None:
        mu1 = max(mu1, spec.integrand.degree())
    mu1 = max(mu1, omega.max_degree())

    # scope for the Omega constraints: drop t when nothing depends on it
    t_free = (time_independent and not spec.horizon.finite and spec.is_autonomous()
              and _x_only([phi] + spec.omega_extra.polynomials()
                          + ([spec.integrand] if spec.integrand is not None else []), spec))
    if t_free:
        scope = states
        omega_set = SemialgebraicSet([g.with_variables(states) for g in spec.omega_extra.inequalities],
                                     [h.with_variables(states) for h in spec.omega_extra.equalities])
    else:
        scope = full
        omega_set = omega
    signs = _scope_signs(scope, spec, symmetry)

    # 1) -LV - Psi in Gamma_mu1
    lin = {}
    for k, mono in enumerate(v_monos):
        lin[v_slice.start + k] = -lie_derivative(mono, spec)
    const = -spec.integrand if spec.integrand is not None else Polynomial.zero(full)
    t1 = AffinePolynomial(scope, const.with_variables(scope) if t_free else const,
                          {k: (p.with_variables(scope) if t_free else p) for k, p in lin.items()})
    b.add_wsos(WsosConstraint(t1, omega_set, mu1, scope, "decay", signs, decay_multiplier_degree))

    # 2) V - Phi in Gamma_d   (or at t = T only)
    mu2 = max(d, omega_set.max_degree())
    if terminal_time:
        T = spec.horizon.T
        sub = {TIME: T}
        tset = SemialgebraicSet([g.substitute(sub, states) for g in spec.omega_extra.inequalities],
                                [h.substitute(sub, states) for h in spec.omega_extra.equalities])
        lin2 = {v_slice.start + k: p.substitute(sub, states) for k, p in enumerate(v_monos)}
        t2 = AffinePolynomial(states, -phi.substitute(sub, states), lin2)
        b.add_wsos(WsosConstraint(t2, tset, max(d, tset.max_degree()), states, "dominate",
                                  _scope_signs(states, spec, symmetry)))
    else:
        lin2 = {v_slice.start + k: (p.with_variables(scope) if t_free else p) for k, p in enumerate(v_monos)}
        t2 = AffinePolynomial(scope, -(phi.with_variables(scope) if t_free else phi), lin2)
        b.add_wsos(WsosConstraint(t2, omega_set, mu2, scope, "dominate", signs))

    # 3) lambda - V(t0, .) in Lambda_d
    sub0 = {TIME: spec.t0}
    lin3 = {lam: Polynomial.constant(states, 1.0)}
    for k, p in enumerate(v_monos):
        lin3[v_slice.start + k] = -p.substitute(sub0, states)
    t3 = AffinePolynomial(states, None, lin3)
    mu3 = max(d, spec.initial_set.max_degree())
    b.add_wsos(WsosConstraint(t3, spec.initial_set, mu3, states, "initial",
                              _scope_signs(states, spec, symmetry)))

    sdp = b.build(reduce)
    return BoundSdp(spec, d, sdp, b, lam, v_slice, v_basis, tuple(v_vars),
                    dict(time_independent=time_independent, terminal_time=terminal_time,
                         symmetry=symmetry,
                         decay_multiplier_degree=decay_multiplier_degree))


def recover_v(solution: SdpSolution, bsdp: BoundSdp, allow_inaccurate: bool = True):
    """Return (V over (t, x), lambda) from a solved bound SDP."""
    if solution.status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE):
        raise CertificateError(f"no certificate: solver status {solution.status}")
    if not allow_inaccurate and solution.status != Status.OPTIMAL:
        raise CertificateError(f"solver status {solution.status}")
    x = solution.x_free
    if len(x) < bsdp.v_slice.stop:
        raise CertificateError("solution is missing free variables")
    coeffs = x[bsdp.v_slice]
    V = Polynomial(bsdp.v_vars, {m: c for m, c in zip(bsdp.v_basis, coeffs)})
    return V.with_variables(bsdp.spec.variables), float(x[bsdp.lam_index])


def certificate_parts(solution: SdpSolution, bsdp: BoundSdp) -> list:
    """Explicit polynomials of every WSOS identity, for independent re-checking.

    Returns one dict per constraint with keys ``target``, ``sigma0``,
    ``sigmas`` (list of (h, sigma)), ``rhos`` (list of (l, rho)).
    """
    out = []
    b = bsdp.builder
    for asm in b.assembled:
        c = asm.constraint
        scope = c.scope

        def gram_poly(block_ids):
            total = Polynomial.zero(scope)
            for bi in block_ids:
                if b.sdp_block[bi] is None:
                    continue
                Q = solution.X[b.sdp_block[bi]]
                polys = b.blocks[bi].basis_polynomials()
                for r, pr in enumerate(polys):
                    row_sum = Polynomial.zero(scope)
                    for cc, pc in enumerate(polys):
                        row_sum = row_sum + pc * float(Q[r, cc])
                    total = total + pr * row_sum
            return total

        sig = [(h, gram_poly(blks)) for h, blks in zip(c.set.inequalities, asm.sigma_blocks)]
        rhos = []
        for g, entry in zip(c.set.equalities, asm.rho_slices):
            if entry is None:
                rhos.append((g, Polynomial.zero(scope)))
                continue
            sl, basis = entry
            rhos.append((g, Polynomial(scope, {m: v for m, v in zip(basis, solution.x_free[sl])})))
        out.append(dict(label=c.label, target=c.target.evaluate_coefficients(solution.x_free),
                        sigma0=gram_poly(asm.sigma0_blocks), sigmas=sig, rhos=rhos))
    return out


def identity_residuals(solution: SdpSolution, bsdp: BoundSdp) -> dict:
    """Max-abs coefficient of target - sigma0 - sum h sigma - sum l rho, per constraint."""
    res = {}
    for part in certificate_parts(solution, bsdp):
        r = part["target"] - part["sigma0"]
        for h, s in part["sigmas"]:
            r = r - h * s
        for g, rho in part["rhos"]:
            r = r - g * rho
        res[part["label"]] = r.max_abs_coeff()
    return res
