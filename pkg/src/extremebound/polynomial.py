"""Sparse multivariate polynomials over named variables.

A polynomial stores its variable names in a fixed order and a mapping from
exponent tuples (one entry per variable) to float coefficients.  Objects are
treated as immutable once built; every operation returns a new instance.

The text form accepted by :func:`parse` and produced by ``str(p)`` is

    3*x1^2*x2 - 1.5*t + 2

with ``+ - * ^``, parentheses, unary minus and real literals.  ``^`` takes
a nonnegative integer literal.  Implicit multiplication (``2x``) is rejected.
"""
from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

Monomial = tuple  # exponent tuple, one nonnegative int per variable


class VariableMismatchError(ValueError):
    """Raised when two polynomials cannot be brought onto a common variable list."""


class PolynomialParseError(ValueError):
    """Syntax or semantic error in polynomial text; ``offset`` is a byte offset."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}")


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def grlex_key(m: Monomial):
    """Sort key putting higher total degree first, then lexicographically larger."""
    return (-sum(m), tuple(-e for e in m))


class Polynomial:
    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[Monomial, float] | None = None,
                 prune: float = 0.0):
        variables = tuple(variables)
        if len(set(variables)) != len(variables):
            raise ValueError(f"duplicate variable names in {variables}")
        n = len(variables)
        clean = {}
        for mono, c in (terms or {}).items():
            mono = tuple(int(e) for e in mono)
            if len(mono) != n:
                raise ValueError(f"monomial {mono} does not match {n} variables")
            if any(e < 0 for e in mono):
                raise ValueError(f"negative exponent in {mono}")
            c = float(c)
            if c == 0.0 or abs(c) <= prune:
                continue
            clean[mono] = clean.get(mono, 0.0) + c
        self.variables = variables
        self.terms = {m: c for m, c in clean.items() if c != 0.0}

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, variables: Sequence[str], value: float) -> Polynomial:
        return cls(variables, {(0,) * len(tuple(variables)): value})

    @classmethod
    def zero(cls, variables: Sequence[str]) -> Polynomial:
        return cls(variables)

    @classmethod
    def variable(cls, variables: Sequence[str], name: str) -> Polynomial:
        variables = tuple(variables)
        if name not in variables:
            raise VariableMismatchError(f"unknown variable {name!r}")
        mono = tuple(1 if v == name else 0 for v in variables)
        return cls(variables, {mono: 1.0})

    @classmethod
    def monomial(cls, variables: Sequence[str], exponents: Monomial, coeff: float = 1.0) -> Polynomial:
        return cls(variables, {tuple(exponents): coeff})

    # -- basic queries ------------------------------------------------------
    @property
    def nvars(self) -> int:
        return len(self.variables)

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        if not self.terms:
            return -1
        return max(sum(m) for m in self.terms)

    def degree_in(self, name: str) -> int:
        i = self._index(name)
        return max((m[i] for m in self.terms), default=-1)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: Monomial) -> float:
        return self.terms.get(tuple(mono), 0.0)

    def constant_term(self) -> float:
        return self.terms.get((0,) * self.nvars, 0.0)

    def depends_on(self, name: str) -> bool:
        i = self._index(name)
        return any(m[i] for m in self.terms)

    def _index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise VariableMismatchError(f"unknown variable {name!r}; have {self.variables}") from None

    def pruned(self, threshold: float) -> Polynomial:
        return Polynomial(self.variables, self.terms, prune=threshold)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    # -- variable list handling --------------------------------------------
    def with_variables(self, variables: Sequence[str]) -> Polynomial:
        """Re-express over ``variables``, which must contain every variable used."""
        variables = tuple(variables)
        if variables == self.variables:
            return self
        pos = {v: i for i, v in enumerate(variables)}
        for i, v in enumerate(self.variables):
            if v not in pos and any(m[i] for m in self.terms):
                raise VariableMismatchError(f"variable {v!r} is not in {variables}")
        out = {}
        n = len(variables)
        for mono, c in self.terms.items():
            new = [0] * n
            for i, e in enumerate(mono):
                if e:
                    new[pos[self.variables[i]]] = e
            out[tuple(new)] = c
        return Polynomial(variables, out)

    def _common(self, other: Polynomial) -> tuple[Polynomial, Polynomial]:
        if self.variables == other.variables:
            return self, other
        a, b = set(self.variables), set(other.variables)
        if a <= b:
            return self.with_variables(other.variables), other
        if b <= a:
            return self, other.with_variables(self.variables)
        missing = sorted(a ^ b)
        raise VariableMismatchError(
            f"incompatible variable lists {self.variables} and {other.variables}: "
            f"variable {missing[0]!r} is not shared")

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float)):
            return Polynomial.constant(self.variables, float(other))
        return NotImplemented

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p, q = self._common(other)
        out = dict(p.terms)
        for m, c in q.terms.items():
            out[m] = out.get(m, 0.0) + c
        return Polynomial(p.variables, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.variables, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(self.variables, {m: c * other for m, c in self.terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        p, q = self._common(other)
        out: dict = {}
        for m1, c1 in p.terms.items():
            for m2, c2 in q.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0.0) + c1 * c2
        return Polynomial(p.variables, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self * (1.0 / other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        result = Polynomial.constant(self.variables, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.variables, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        try:
            p, q = self._common(other)
        except VariableMismatchError:
            return False
        return p.terms == q.terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    def allclose(self, other: Polynomial, atol: float = 1e-12, rtol: float = 0.0) -> bool:
        p, q = self._common(other)
        scale = max(p.max_abs_coeff(), q.max_abs_coeff(), 1.0)
        return (p - q).max_abs_coeff() <= atol + rtol * scale

    # -- calculus and evaluation ------------------------------------------------
    def differentiate(self, name: str) -> Polynomial:
        i = self._index(name)
        out = {}
        for m, c in self.terms.items():
            e = m[i]
            if e:
                dm = m[:i] + (e - 1,) + m[i + 1:]
                out[dm] = c * e
        return Polynomial(self.variables, out)

    def gradient(self, names: Iterable[str]) -> list[Polynomial]:
        return [self.differentiate(v) for v in names]

    def evaluate(self, point: Mapping[str, float] | Sequence[float]) -> float:
        """Evaluate at a point given as a name->value map or a sequence in variable order."""
        values = self._point_values(point)
        total = 0.0
        for m, c in self.terms.items():
            term = c
            for v, e in zip(values, m):
                if e:
                    term *= v ** e
            total += term
        return total

    __call__ = evaluate

    def _point_values(self, point) -> list[float]:
        if isinstance(point, Mapping):
            values = []
            for i, v in enumerate(self.variables):
                if v in point:
                    values.append(float(point[v]))
                elif any(m[i] for m in self.terms):
                    raise KeyError(f"no value assigned to variable {v!r}")
                else:
                    values.append(0.0)
            return values
        values = [float(x) for x in point]
        if len(values) != self.nvars:
            raise KeyError(f"expected {self.nvars} coordinates, got {len(values)}")
        return values

    def evaluate_many(self, points):
        """Vectorized evaluation; ``points`` has shape (..., nvars)."""
        import numpy as np

        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.nvars:
            raise ValueError(f"expected trailing dimension {self.nvars}")
        out = np.zeros(pts.shape[:-1])
        if not self.terms:
            return out
        maxdeg = [max((m[i] for m in self.terms), default=0) for i in range(self.nvars)]
        powers = []
        for i in range(self.nvars):
            cols = [np.ones(pts.shape[:-1])]
            for _ in range(maxdeg[i]):
                cols.append(cols[-1] * pts[..., i])
            powers.append(cols)
        for m, c in self.terms.items():
            term = np.full(pts.shape[:-1], c)
            for i, e in enumerate(m):
                if e:
                    term = term * powers[i][e]
            out += term
        return out

    def substitute(self, assignments: Mapping[str, "float | Polynomial"],
                   variables: Sequence[str] | None = None) -> Polynomial:
        """Replace variables by numbers or polynomials.

        The result lives on ``variables`` (default: the original list).
        Polynomial replacements must be expressible over that list.
        """
        target = tuple(variables) if variables is not None else self.variables
        keep = [v for v in self.variables if v not in assignments]
        for v in keep:
            if v not in target:
                # allowed only if unused
                if self.depends_on(v):
                    raise VariableMismatchError(f"variable {v!r} not in target list {target}")
        result = Polynomial.zero(target)
        cache: dict = {}

        def power(name, e):
            key = (name, e)
            if key not in cache:
                val = assignments[name]
                if isinstance(val, Polynomial):
                    cache[key] = val.with_variables(target) ** e
                else:
                    cache[key] = Polynomial.constant(target, float(val) ** e)
            return cache[key]

        for m, c in self.terms.items():
            mono = [0] * len(target)
            term = Polynomial.constant(target, c)
            for i, e in enumerate(m):
                if not e:
                    continue
                name = self.variables[i]
                if name in assignments:
                    term = term * power(name, e)
                else:
                    mono[target.index(name)] += e
            result = result + term * Polynomial(target, {tuple(mono): 1.0})
        return result

    def linear_transform_signs(self, signs: Mapping[str, int]) -> Polynomial:
        """Apply x_i -> s_i x_i for sign flips given per variable name."""
        s = [signs.get(v, 1) for v in self.variables]
        out = {}
        for m, c in self.terms.items():
            sign = 1
            for si, e in zip(s, m):
                if si < 0 and e % 2:
                    sign = -sign
            out[m] = c * sign
        return Polynomial(self.variables, out)

    # -- text -----------------------------------------------------------------
    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda mc: grlex_key(mc[0]))

    def to_string(self, digits: int = 17) -> str:
        if not self.terms:
            return "0"
        pieces = []
        for k, (m, c) in enumerate(self.sorted_terms()):
            factors = []
            for v, e in zip(self.variables, m):
                if e == 1:
                    factors.append(v)
                elif e > 1:
                    factors.append(f"{v}^{e}")
            mag = abs(c)
            num = format(mag, f".{digits}g")
            if factors:
                body = "*".join(factors) if mag == 1.0 else num + "*" + "*".join(factors)
            else:
                body = num
            if k == 0:
                pieces.append(("-" if c < 0 else "") + body)
            else:
                pieces.append((" - " if c < 0 else " + ") + body)
        return "".join(pieces)

    def __str__(self):
        return self.to_string()

    def __repr__(self):
        return f"Polynomial({self.variables}, {self.to_string()!r})"


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolynomialParseError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos), text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, variables: tuple):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def error(self, message, pos=None):
        if pos is None:
            pos = self.tokens[self.i][2]
        raise PolynomialParseError(message, _byte_offset(self.text, pos), self.text)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.error("empty expression")
        p = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            if kind in ("num", "name") or val == "(":
                self.error("expected an operator (implicit multiplication is not allowed)")
            self.error(f"unexpected token {val!r}")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            p = self.unary()
            return -p if val == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.peek()
            if kind == "op" and val in ("-", "+"):
                if val == "-":
                    self.error("negative exponent", pos)
                self.take()
                kind, val, pos = self.peek()
            if kind != "num":
                self.error("exponent must be a nonnegative integer literal", pos)
            if not re.fullmatch(r"\d+", val):
                self.error(f"non-integer exponent {val!r}", pos)
            self.take()
            return base ** int(val)
        return base

    def atom(self) -> Polynomial:
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.variables, float(val))
        if kind == "name":
            if val not in self.variables:
                self.error(f"unknown identifier {val!r}", pos)
            return Polynomial.variable(self.variables, val)
        if kind == "op" and val == "(":
            p = self.expr()
            kind2, val2, pos2 = self.take()
            if val2 != ")":
                self.error("expected ')'", pos2)
            return p
        if kind == "end":
            self.error("unexpected end of input", pos)
        self.error(f"unexpected token {val!r}", pos)


def parse(text: str, variables: Sequence[str]) -> Polynomial:
    """Parse ``text`` into a polynomial over ``variables``."""
    return _Parser(text, tuple(variables)).parse()


def total_degree_monomials(nvars: int, degree: int) -> list[Monomial]:
    """All exponent tuples of total degree <= ``degree``, graded-lex ascending."""
    out = []

    def rec(prefix, remaining, k):
        if k == nvars - 1:
            out.append(tuple(prefix) + (remaining,))
            return
        for e in range(remaining, -1, -1):
            rec(prefix + [e], remaining - e, k + 1)

    for d in range(degree + 1):
        if nvars == 0:
            if d == 0:
                out.append(())
            continue
        rec([], d, 0)
    return out


def n_monomials(nvars: int, degree: int) -> int:
    return math.comb(nvars + degree, degree)
