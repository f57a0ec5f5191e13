"""Exterior calculus on a single coordinate chart.

Sign conventions, fixed everywhere in the package:

* a k-form is stored as ``{(i0 < i1 < ... < ik-1): coefficient}`` meaning
  ``sum coefficient * dx^i0 ^ ... ^ dx^ik-1``;
* wedge signs are permutation parities of the merged index tuple;
* ``i_X(dx^t0 ^ ... ^ dx^tk-1) = sum_l (-1)^l X^tl dx^(T without tl)``,
  equivalently ``i_X(a ^ b) = (i_X a) ^ b + (-1)^deg(a) a ^ (i_X b)``;
* the coefficient of ``T`` in ``d(a)`` is ``sum_s (-1)^pos(s) d(a_(T\\s))/dx^s``
  where ``pos(s)`` is the position of ``s`` inside ``T``;
* ``matrix_at`` returns ``M`` with ``M[i, j]`` the coefficient on ``(i, j)``,
  so that ``w(u, v) = u @ M @ v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Chart,
    Expr,
    add,
    const,
    differentiate,
    evaluate_batch,
    free_indices,
    is_polynomial,
    is_zero,
    mul,
    neg,
    normalize,
    substitute,
)

__all__ = [
    "ChartMismatchError",
    "KForm",
    "VectorField",
    "SmoothMap",
    "wedge",
    "exterior_derivative",
    "interior_product",
    "pullback",
    "matrix_at",
    "matrices_at",
    "differential",
    "scalar_form",
]


class ChartMismatchError(ValueError):
    pass


def _check_same_chart(a: Chart, b: Chart):
    if a != b:
        raise ChartMismatchError(f"chart mismatch: {a} vs {b}")


class KForm:
    """Degree-``k`` differential form with a sparse, normalized coefficient table.

    Coefficients are normalized on construction and zero entries dropped, so
    two forms compare equal exactly when their tables agree.
    """

    __slots__ = ("chart", "degree", "_terms")

    def __init__(self, chart: Chart, degree: int, terms: Mapping[tuple, Expr] | None = None):
        if degree < 0:
            raise ValueError("form degree must be non-negative")
        table = {}
        for key, coeff in (terms or {}).items():
            key = tuple(key)
            if len(key) != degree:
                raise ValueError(f"index tuple {key} does not have length {degree}")
            if any(i >= chart.dim or i < 0 for i in key):
                raise ValueError(f"index tuple {key} out of range for {chart}")
            if any(a >= b for a, b in zip(key, key[1:])):
                raise ValueError(f"index tuple {key} is not strictly increasing")
            coeff = normalize(coeff)
            if coeff != ZERO:
                table[key] = coeff
        self.chart = chart
        self.degree = degree
        self._terms = dict(sorted(table.items()))

    @classmethod
    def _accumulate(cls, chart, degree, pieces: Iterable[tuple[tuple, Expr]]) -> "KForm":
        grouped: dict[tuple, list] = {}
        for key, coeff in pieces:
            grouped.setdefault(key, []).append(coeff)
        return cls(chart, degree, {k: add(*v) for k, v in grouped.items()})

    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "KForm":
        return cls(chart, degree, {})

    @classmethod
    def basis(cls, chart: Chart, *names: str) -> "KForm":
        """``dn0 ^ dn1 ^ ...`` for coordinate names, with the permutation sign applied."""
        idx = [chart.index(n) for n in names]
        if len(set(idx)) != len(idx):
            return cls.zero(chart, len(idx))
        sign = _parity(idx)
        return cls(chart, len(idx), {tuple(sorted(idx)): const(sign)})

    @property
    def terms(self) -> dict[tuple, Expr]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, key: Sequence[int]) -> Expr:
        return self._terms.get(tuple(key), ZERO)

    def is_zero(self, samples: int = 32, tol: float = 1e-9) -> bool:
        """Symbolic for polynomial coefficients, sampled for transcendental ones."""
        return all(is_zero(c, self.chart.dim, samples, tol) for c in self._terms.values())

    def is_polynomial(self) -> bool:
        return all(is_polynomial(c) for c in self._terms.values())

    def free_indices(self) -> frozenset[int]:
        return frozenset().union(*(free_indices(c) for c in self._terms.values()))

    def evaluate_coefficients(self, points: np.ndarray) -> dict[tuple, np.ndarray]:
        return {k: evaluate_batch(c, points) for k, c in self._terms.items()}

    def __eq__(self, other):
        if not isinstance(other, KForm):
            return NotImplemented
        return (self.chart == other.chart and self.degree == other.degree
                and self._terms == other._terms)

    def __hash__(self):
        return hash((self.chart, self.degree, tuple(self._terms.items())))

    def _check(self, other: "KForm"):
        _check_same_chart(self.chart, other.chart)
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")

    def __add__(self, other: "KForm") -> "KForm":
        self._check(other)
        return KForm._accumulate(self.chart, self.degree,
                                 list(self.items()) + list(other.items()))

    def __neg__(self) -> "KForm":
        return KForm(self.chart, self.degree, {k: neg(c) for k, c in self.items()})

    def __sub__(self, other: "KForm") -> "KForm":
        return self + (-other)

    def scale(self, f: Expr) -> "KForm":
        """Multiply every coefficient by a function."""
        return KForm(self.chart, self.degree, {k: mul(f, c) for k, c in self.items()})

    def __repr__(self):
        if not self._terms:
            return f"KForm({self.degree}, 0)"
        names = self.chart.names
        parts = []
        for key, c in self._terms.items():
            basis = "^".join("d" + names[i] for i in key) or "1"
            parts.append(f"({c})*{basis}")
        return f"KForm({self.degree}, " + " + ".join(parts) + ")"


def scalar_form(chart: Chart, f: Expr) -> KForm:
    return KForm(chart, 0, {(): f})


def _parity(seq: Sequence[int]) -> int:
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


def wedge(a: KForm, b: KForm) -> KForm:
    _check_same_chart(a.chart, b.chart)
    degree = a.degree + b.degree
    if degree > a.chart.dim:
        return KForm.zero(a.chart, degree)
    pieces = []
    for ka, ca in a.items():
        for kb, cb in b.items():
            if set(ka) & set(kb):
                continue
            merged = ka + kb
            sign = _parity(merged)
            coeff = mul(ca, cb)
            pieces.append((tuple(sorted(merged)), coeff if sign > 0 else neg(coeff)))
    return KForm._accumulate(a.chart, degree, pieces)


def exterior_derivative(a: KForm) -> KForm:
    dim = a.chart.dim
    pieces = []
    for key, c in a.items():
        for s in sorted(free_indices(c)):
            if s in key or s >= dim:
                continue
            dc = differentiate(c, s)
            if dc == ZERO:
                continue
            new_key = tuple(sorted(key + (s,)))
            pos = new_key.index(s)
            pieces.append((new_key, dc if pos % 2 == 0 else neg(dc)))
    return KForm._accumulate(a.chart, a.degree + 1, pieces)


def differential(chart: Chart, f: Expr) -> KForm:
    """``df`` as a 1-form."""
    return exterior_derivative(scalar_form(chart, f))


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ValueError("vector field needs one component per coordinate")

    @classmethod
    def coordinate(cls, chart: Chart, name: str) -> "VectorField":
        i = chart.index(name)
        return cls(chart, tuple(ONE if k == i else ZERO for k in range(chart.dim)))

    def normalized(self) -> "VectorField":
        return VectorField(self.chart, tuple(normalize(c) for c in self.components))

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_same_chart(self.chart, other.chart)
        return VectorField(self.chart, tuple(
            normalize(add(a, b)) for a, b in zip(self.components, other.components)))

    def scale(self, f: Expr) -> "VectorField":
        return VectorField(self.chart, tuple(normalize(mul(f, c)) for c in self.components))


def interior_product(X: VectorField, a: KForm) -> KForm:
    _check_same_chart(X.chart, a.chart)
    if a.degree == 0:
        raise ValueError("cannot contract a 0-form")
    pieces = []
    for key, c in a.items():
        for pos, t in enumerate(key):
            comp = X.components[t]
            if comp == ZERO:
                continue
            term = mul(comp, c)
            pieces.append((key[:pos] + key[pos + 1:], term if pos % 2 == 0 else neg(term)))
    return KForm._accumulate(a.chart, a.degree - 1, pieces)


@dataclass(frozen=True)
class SmoothMap:
    """Map ``source -> target`` given by one source-coordinate expression per target coordinate."""

    source: Chart
    target: Chart
    components: tuple

    def __post_init__(self):
        if len(self.components) != self.target.dim:
            raise ValueError("smooth map needs one expression per target coordinate")
        for c in self.components:
            if any(i >= self.source.dim for i in free_indices(c)):
                raise ValueError("map components may only reference source coordinates")

    @classmethod
    def identity(cls, chart: Chart) -> "SmoothMap":
        return cls(chart, chart, tuple(chart.var(n) for n in chart.names))

    def compose(self, first: "SmoothMap") -> "SmoothMap":
        """``self o first``."""
        _check_same_chart(first.target, self.source)
        mapping = dict(enumerate(first.components))
        return SmoothMap(first.source, self.target,
                         tuple(normalize(substitute(c, mapping)) for c in self.components))


def pullback(f: SmoothMap, a: KForm) -> KForm:
    _check_same_chart(f.target, a.chart)
    mapping = dict(enumerate(f.components))
    differentials: dict[int, KForm] = {}

    def d_component(i: int) -> KForm:
        if i not in differentials:
            differentials[i] = differential(f.source, f.components[i])
        return differentials[i]

    result = KForm.zero(f.source, a.degree)
    for key, c in a.items():
        term = scalar_form(f.source, substitute(c, mapping))
        for i in key:
            term = wedge(term, d_component(i))
            if not term.terms:
                break
        else:
            result = result + term
    return result


def matrices_at(a: KForm, points: np.ndarray) -> np.ndarray:
    """Antisymmetric matrices of a 2-form at each row of ``points``: shape ``(N, dim, dim)``."""
    if a.degree != 2:
        raise ValueError(f"matrix_at needs a 2-form, got degree {a.degree}")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    dim = a.chart.dim
    if points.shape[1] != dim:
        raise ValueError(f"points have dimension {points.shape[1]}, chart has {dim}")
    out = np.zeros((points.shape[0], dim, dim))
    for (i, j), values in a.evaluate_coefficients(points).items():
        out[:, i, j] = values
        out[:, j, i] = -values
    return out


def matrix_at(a: KForm, point: Sequence[float]) -> np.ndarray:
    return matrices_at(a, np.asarray(point, dtype=float)[None, :])[0]
