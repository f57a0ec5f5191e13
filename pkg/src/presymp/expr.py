"""Scalar coefficient expressions over a coordinate chart.

Expressions are immutable trees built from rational constants, coordinate
references, sums, products, non-negative integer powers, negation and the
three transcendental functions ``sin``, ``cos`` and ``exp``.  The node set is
closed under differentiation, so every partial derivative is again an
:class:`Expr`.

Text syntax::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := atom ('^' uint)?
    atom   := number | ident | '(' expr ')' | func '(' expr ')' | '-' atom

Note that unary minus binds tighter than ``^``: ``-x1^2`` is ``(-x1)^2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Coordinate",
    "Chart",
    "Expr",
    "Const",
    "Var",
    "Sum",
    "Prod",
    "Pow",
    "Neg",
    "Func",
    "ParseError",
    "UnknownIdentifierError",
    "parse",
    "to_string",
    "differentiate",
    "evaluate",
    "evaluate_batch",
    "normalize",
    "is_polynomial",
    "is_zero",
    "free_indices",
    "substitute",
    "const",
    "add",
    "mul",
    "neg",
    "power",
    "ZERO",
    "ONE",
]

FUNCTIONS = ("sin", "cos", "exp")

# Allowed coordinate roles.  ``slot`` is the 1-based pair/kernel index.
ROLES = ("x", "y", "z", "p", "px", "py", "pz")


# ---------------------------------------------------------------------------
# Charts


@dataclass(frozen=True)
class Coordinate:
    name: str
    role: str
    slot: int

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown coordinate role {self.role!r}")
        if self.slot < 1:
            raise ValueError("coordinate slots are 1-based")


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate system with ``m`` symplectic pairs and ``r`` kernel directions.

    Every chart built here starts with the base block ``x1..xm, y1..ym,
    z1..zr``; thickened charts append ``p1..pr`` and cotangent charts append
    ``px1..pxm, py1..pym, pz1..pzr``.  Because the base block is always a
    prefix, an expression written over the base chart is valid verbatim on
    either extension.
    """

    coordinates: tuple[Coordinate, ...]
    m: int
    r: int

    def __post_init__(self):
        names = [c.name for c in self.coordinates]
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be unique")
        for name in names:
            if name in FUNCTIONS or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise ValueError(f"invalid coordinate name {name!r}")
        counts = {role: 0 for role in ROLES}
        for c in self.coordinates:
            counts[c.role] += 1
        if counts["x"] != self.m or counts["y"] != self.m or counts["z"] != self.r:
            raise ValueError("role counts do not match (m, r)")
        if counts["p"] not in (0, self.r):
            raise ValueError("fiber coordinates must number r")
        has_momenta = counts["px"] or counts["py"] or counts["pz"]
        if has_momenta and (counts["px"], counts["py"], counts["pz"]) != (self.m, self.m, self.r):
            raise ValueError("momentum coordinates must number (m, m, r)")
        if has_momenta and counts["p"]:
            raise ValueError("a chart is either thickened or cotangent, not both")

    @classmethod
    def base(cls, m: int, r: int) -> "Chart":
        coords = (
            [Coordinate(f"x{j}", "x", j) for j in range(1, m + 1)]
            + [Coordinate(f"y{j}", "y", j) for j in range(1, m + 1)]
            + [Coordinate(f"z{a}", "z", a) for a in range(1, r + 1)]
        )
        return cls(tuple(coords), m, r)

    @classmethod
    def thickened(cls, m: int, r: int) -> "Chart":
        fiber = tuple(Coordinate(f"p{a}", "p", a) for a in range(1, r + 1))
        return cls(cls.base(m, r).coordinates + fiber, m, r)

    @classmethod
    def cotangent(cls, m: int, r: int) -> "Chart":
        momenta = (
            [Coordinate(f"px{j}", "px", j) for j in range(1, m + 1)]
            + [Coordinate(f"py{j}", "py", j) for j in range(1, m + 1)]
            + [Coordinate(f"pz{a}", "pz", a) for a in range(1, r + 1)]
        )
        return cls(cls.base(m, r).coordinates + tuple(momenta), m, r)

    @property
    def dim(self) -> int:
        return len(self.coordinates)

    @property
    def base_dim(self) -> int:
        return 2 * self.m + self.r

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coordinates)

    @property
    def kind(self) -> str:
        roles = {c.role for c in self.coordinates}
        if "p" in roles:
            return "thickened"
        if roles & {"px", "py", "pz"}:
            return "cotangent"
        return "base"

    def index(self, name: str) -> int:
        for i, c in enumerate(self.coordinates):
            if c.name == name:
                return i
        raise KeyError(name)

    def indices(self, role: str) -> list[int]:
        return [i for i, c in enumerate(self.coordinates) if c.role == role]

    def var(self, name: str) -> "Var":
        return Var(self.index(name), name)

    def __str__(self):
        return "(" + ", ".join(self.names) + ")"


# ---------------------------------------------------------------------------
# Expression nodes


class Expr:
    """Base class of expression nodes.  Operators build unsimplified trees."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, neg(_coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), neg(self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return power(self, n)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: Fraction

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    index: int
    name: str

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True, repr=False)
class Sum(Expr):
    terms: tuple

    def __repr__(self):
        return f"Sum{self.terms!r}"


@dataclass(frozen=True, repr=False)
class Prod(Expr):
    factors: tuple

    def __repr__(self):
        return f"Prod{self.factors!r}"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ValueError("power exponents must be non-negative integers")

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unsupported function {self.name!r}")

    def __repr__(self):
        return f"{self.name.capitalize()}({self.arg!r})"


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, Fraction)):
        return Const(Fraction(value))
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


def const(value) -> Const:
    return Const(Fraction(value))


# Smart constructors.  They fold the trivial cases (zero, one, double
# negation) so that derivative trees stay small, nothing more.

def add(*terms: Expr) -> Expr:
    kept = [t for t in terms if t != ZERO]
    if not kept:
        return ZERO
    if len(kept) == 1:
        return kept[0]
    return Sum(tuple(kept))


def mul(*factors: Expr) -> Expr:
    if any(f == ZERO for f in factors):
        return ZERO
    kept = [f for f in factors if f != ONE]
    if not kept:
        return ONE
    if len(kept) == 1:
        return kept[0]
    return Prod(tuple(kept))


def neg(e: Expr) -> Expr:
    if e == ZERO:
        return ZERO
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def power(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    return Pow(base, n)


# ---------------------------------------------------------------------------
# Parsing


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown identifier {name!r}", position)
        self.name = name


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if match is None:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, chart: Chart):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.chart = chart

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text, offset = self.advance()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", offset)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", offset)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, sign, _ = self.advance()
            t = self.term()
            terms.append(Neg(t) if sign == "-" else t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expr:
        factors = [self.factor()]
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.advance()
            factors.append(self.factor())
        return factors[0] if len(factors) == 1 else Prod(tuple(factors))

    def factor(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            kind, text, offset = self.advance()
            if kind != "num" or "." in text:
                raise ParseError("exponent must be a non-negative integer", offset)
            return Pow(base, int(text))
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.advance()
        if kind == "num":
            return Const(Fraction(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            try:
                return Var(self.chart.index(text), text)
            except KeyError:
                raise UnknownIdentifierError(text, offset) from None
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "op" and text == "-":
            # a sign glued to a literal is part of the constant: "-0.5" is Const(-1/2)
            if self.peek()[0] == "num":
                return Const(-Fraction(self.advance()[1]))
            return Neg(self.atom())
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", offset)


def parse(text: str, chart: Chart) -> Expr:
    """Parse ``text`` into an expression over ``chart``.

    Raises :class:`ParseError` (with the character offset) on malformed
    input and :class:`UnknownIdentifierError` for names missing from the chart.
    """
    return _Parser(text, chart).parse()


# ---------------------------------------------------------------------------
# Printing

_SUM, _PROD, _POW, _ATOM = range(4)


def _precedence(e: Expr) -> int:
    if isinstance(e, Sum):
        return _SUM
    if isinstance(e, Prod):
        return _PROD
    if isinstance(e, Pow):
        return _POW
    return _ATOM


def _format_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    # Finite decimal expansion exists iff the denominator is 2^a 5^b.
    d = value.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return format(float(value), ".17g")
    digits = max(twos, fives)
    scaled = value.numerator * 10**digits // value.denominator
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_string(e)
    return f"({s})" if _precedence(e) < min_prec else s


def to_string(e: Expr) -> str:
    """Render ``e`` in the parser's syntax; ``parse(to_string(e))`` rebuilds ``e``."""
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        if isinstance(e.arg, Const):
            return f"-({to_string(e.arg)})"
        return "-" + _wrap(e.arg, _ATOM)
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _ATOM)}^{e.exponent}"
    if isinstance(e, Prod):
        return "*".join(_wrap(f, _POW) for f in e.factors)
    if isinstance(e, Sum):
        parts = [_wrap(e.terms[0], _PROD)]
        for t in e.terms[1:]:
            if isinstance(t, Neg):
                parts.append(" - " + _wrap(t.arg, _PROD))
            else:
                parts.append(" + " + _wrap(t, _PROD))
        return "".join(parts)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Structural queries


def free_indices(e: Expr) -> frozenset[int]:
    if isinstance(e, Var):
        return frozenset((e.index,))
    if isinstance(e, Const):
        return frozenset()
    return frozenset().union(*(free_indices(c) for c in _children(e)))


def _children(e: Expr) -> tuple:
    if isinstance(e, Sum):
        return e.terms
    if isinstance(e, Prod):
        return e.factors
    if isinstance(e, (Pow,)):
        return (e.base,)
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    return ()


def is_polynomial(e: Expr) -> bool:
    if isinstance(e, Func):
        return False
    return all(is_polynomial(c) for c in _children(e))


def substitute(e: Expr, mapping: Mapping[int, Expr]) -> Expr:
    """Replace coordinate references by index."""
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Sum):
        return Sum(tuple(substitute(t, mapping) for t in e.terms))
    if isinstance(e, Prod):
        return Prod(tuple(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, mapping))
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, mapping))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation


def differentiate(e: Expr, coord: int) -> Expr:
    """Exact partial derivative with respect to the coordinate at index ``coord``."""
    if coord < 0:
        raise IndexError(coord)
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == coord else ZERO
    if coord not in free_indices(e):
        return ZERO
    if isinstance(e, Sum):
        return add(*(differentiate(t, coord) for t in e.terms))
    if isinstance(e, Prod):
        terms = []
        for k, f in enumerate(e.factors):
            df = differentiate(f, coord)
            if df != ZERO:
                terms.append(mul(*e.factors[:k], df, *e.factors[k + 1:]))
        return add(*terms)
    if isinstance(e, Pow):
        if e.exponent == 0:
            return ZERO
        db = differentiate(e.base, coord)
        return mul(const(e.exponent), power(e.base, e.exponent - 1), db)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, coord))
    if isinstance(e, Func):
        du = differentiate(e.arg, coord)
        if e.name == "sin":
            return mul(Func("cos", e.arg), du)
        if e.name == "cos":
            return neg(mul(Func("sin", e.arg), du))
        return mul(e, du)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation

_NUMPY_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_MATH_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


def _eval(e: Expr, column, funcs):
    if isinstance(e, Const):
        return float(e.value)
    if isinstance(e, Var):
        return column(e.index)
    if isinstance(e, Sum):
        return reduce(lambda a, b: a + b, (_eval(t, column, funcs) for t in e.terms))
    if isinstance(e, Prod):
        return reduce(lambda a, b: a * b, (_eval(f, column, funcs) for f in e.factors))
    if isinstance(e, Pow):
        return _eval(e.base, column, funcs) ** e.exponent
    if isinstance(e, Neg):
        return -_eval(e.arg, column, funcs)
    if isinstance(e, Func):
        return funcs[e.name](_eval(e.arg, column, funcs))
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, point: Sequence[float]) -> float:
    """Evaluate at a single point given as one value per chart coordinate."""
    values = [float(v) for v in point]
    return float(_eval(e, values.__getitem__, _MATH_FUNCS))


def evaluate_batch(e: Expr, points: np.ndarray) -> np.ndarray:
    """Evaluate at every row of an ``(N, dim)`` array; returns shape ``(N,)``."""
    points = np.asarray(points, dtype=float)
    out = _eval(e, lambda i: points[:, i], _NUMPY_FUNCS)
    return np.broadcast_to(np.asarray(out, dtype=float), (points.shape[0],)).copy()


# ---------------------------------------------------------------------------
# Normalization
#
# A polynomial is a dict {monomial: Fraction}.  A monomial is a sorted tuple
# of (atom, exponent) pairs.  Atoms are (0, index, name) for coordinates and
# (1, fname, argument-key) for transcendental factors, where argument-key is
# the sorted item tuple of the argument's own normalized polynomial.


def _poly_add(a: dict, b: dict, sign: int = 1) -> dict:
    out = dict(a)
    for mono, c in b.items():
        v = out.get(mono, 0) + sign * c
        if v:
            out[mono] = v
        else:
            out.pop(mono, None)
    return out


def _mono_mul(a: tuple, b: tuple) -> tuple:
    if not a:
        return b
    if not b:
        return a
    exps = dict(a)
    for atom, k in b:
        exps[atom] = exps.get(atom, 0) + k
    return tuple(sorted(exps.items()))


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            mono = _mono_mul(ma, mb)
            v = out.get(mono, 0) + ca * cb
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
    return out


_POLY_ONE = {(): Fraction(1)}


def _to_poly(e: Expr) -> dict:
    if isinstance(e, Const):
        return {(): e.value} if e.value else {}
    if isinstance(e, Var):
        return {(((0, e.index, e.name), 1),): Fraction(1)}
    if isinstance(e, Sum):
        out: dict = {}
        for t in e.terms:
            out = _poly_add(out, _to_poly(t))
        return out
    if isinstance(e, Prod):
        out = _POLY_ONE
        for f in e.factors:
            out = _poly_mul(out, _to_poly(f))
            if not out:
                break
        return out
    if isinstance(e, Pow):
        base = _to_poly(e.base)
        out = _POLY_ONE
        for _ in range(e.exponent):
            out = _poly_mul(out, base)
        return out
    if isinstance(e, Neg):
        return {m: -c for m, c in _to_poly(e.arg).items()}
    if isinstance(e, Func):
        arg = _to_poly(e.arg)
        if not arg:
            return {} if e.name == "sin" else dict(_POLY_ONE)
        key = tuple(sorted(arg.items()))
        return {(((1, e.name, key), 1),): Fraction(1)}
    raise TypeError(f"not an expression: {e!r}")


def _atom_to_expr(atom: tuple) -> Expr:
    if atom[0] == 0:
        return Var(atom[1], atom[2])
    return Func(atom[1], _from_poly(dict(atom[2])))


def _mono_degree(mono: tuple) -> int:
    return sum(k for _, k in mono)


def _from_poly(poly: dict) -> Expr:
    if not poly:
        return ZERO
    terms = []
    for mono in sorted(poly, key=lambda mo: (_mono_degree(mo), mo)):
        c = poly[mono]
        if not mono:
            terms.append(Const(c))  # sorts first, so it prints as a leading "-1 + ..."
            continue
        factors = [power(_atom_to_expr(atom), k) for atom, k in mono]
        magnitude = abs(c)
        body = mul(Const(magnitude), *factors) if magnitude != 1 else mul(*factors)
        terms.append(Neg(body) if c < 0 else body)
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def normalize(e: Expr) -> Expr:
    """Expand into a canonical ordered sum of monomials.

    Transcendental factors are treated as atoms whose arguments are
    normalized recursively.  Two polynomially identical inputs yield equal
    trees, and the result is a fixed point of this function.
    """
    return _from_poly(_to_poly(e))


def is_zero(e: Expr, dim: int | None = None, samples: int = 32, tol: float = 1e-9,
            seed: int = 0) -> bool:
    """Zero test: exact for polynomials, sampled on [-1, 1]^dim otherwise."""
    poly = _to_poly(e)
    if not poly:
        return True
    if is_polynomial(e):
        return False
    idx = free_indices(e)
    if dim is None:
        dim = max(idx) + 1 if idx else 1
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(samples, dim))
    values = evaluate_batch(_from_poly(poly), pts)
    return bool(np.all(np.abs(values) <= tol))


def collect(exprs: Iterable[Expr]) -> Expr:
    """Sum of several expressions, normalized."""
    return normalize(add(*exprs))
