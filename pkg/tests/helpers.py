"""Generators and independent oracles shared by the test modules."""

import itertools
import math
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from presymp.expr import Chart, Const, Func, Neg, Pow, Prod, Sum, Var
from presymp.forms import KForm

BASE_11 = Chart.base(1, 1)
THICK_11 = Chart.thickened(1, 1)


# -- random expressions -------------------------------------------------------

def random_expr_text(rng, names, depth=3):
    """Grammar-valid text; the shape mirrors the productions one to one."""
    def atom(d):
        k = rng.integers(0, 6 if d > 0 else 2)
        if k == 0:
            return str(rng.choice(["0", "1", "2", "3", "0.5", "1.25", "7"]))
        if k == 1:
            return str(rng.choice(names))
        if k == 2:
            return "(" + expr(d - 1) + ")"
        if k == 3:
            return f"{rng.choice(['sin', 'cos', 'exp'])}({expr(d - 1)})"
        if k == 4:
            return "-" + atom(d - 1)
        return str(rng.choice(names))

    def factor(d):
        a = atom(d)
        if rng.random() < 0.25:
            a += f"^{rng.integers(0, 4)}"
        return a

    def term(d):
        return "*".join(factor(d) for _ in range(rng.integers(1, 3)))

    def expr(d):
        out = term(d)
        for _ in range(rng.integers(0, 3)):
            out += f" {rng.choice(['+', '-'])} {term(d)}"
        return out

    return expr(depth)


def random_expr(rng, chart, depth=3, polynomial=False):
    """Random tree built directly from nodes (not via the parser)."""
    names = chart.names

    def go(d):
        choices = 4 if polynomial else 5
        k = rng.integers(0, choices if d > 0 else 2)
        if k == 0:
            return Const(Fraction(int(rng.integers(-3, 4)), int(rng.choice([1, 2]))))
        if k == 1:
            n = str(rng.choice(names))
            return Var(chart.index(n), n)
        if k == 2:
            return Sum(tuple(go(d - 1) for _ in range(rng.integers(2, 4))))
        if k == 3:
            kids = [go(d - 1) for _ in range(rng.integers(2, 3))]
            if rng.random() < 0.3:
                kids[0] = Pow(kids[0], int(rng.integers(0, 3)))
            if rng.random() < 0.2:
                kids[-1] = Neg(kids[-1])
            return Prod(tuple(kids))
        return Func(str(rng.choice(["sin", "cos", "exp"])), go(d - 1))

    return go(depth)


def exprs(chart, polynomial=False, max_leaves=12):
    """Hypothesis strategy for expression trees over ``chart``."""
    leaves = st.one_of(
        st.builds(lambda v: Const(Fraction(v)), st.integers(-4, 4)),
        st.sampled_from([Var(i, n) for i, n in enumerate(chart.names)]),
    )

    def extend(children):
        options = [
            st.builds(lambda xs: Sum(tuple(xs)), st.lists(children, min_size=2, max_size=3)),
            st.builds(lambda xs: Prod(tuple(xs)), st.lists(children, min_size=2, max_size=3)),
            st.builds(Pow, children, st.integers(0, 3)),
            st.builds(Neg, children),
        ]
        if not polynomial:
            options.append(st.builds(Func, st.sampled_from(["sin", "cos", "exp"]), children))
        return st.one_of(*options)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def random_form(rng, chart, degree, polynomial=True, max_terms=4):
    keys = list(itertools.combinations(range(chart.dim), degree))
    terms = {}
    for _ in range(rng.integers(1, max_terms + 1)):
        key = keys[rng.integers(0, len(keys))]
        terms[key] = random_expr(rng, chart, depth=2, polynomial=polynomial)
    return KForm(chart, degree, terms)


# -- dense alternating tensors ------------------------------------------------

def _perm_sign(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def dense_form(form, point):
    """Fully antisymmetric array of a form at a point (component on sorted keys = coefficient)."""
    dim, k = form.chart.dim, form.degree
    T = np.zeros((dim,) * k)
    values = {key: v[0] for key, v in form.evaluate_coefficients(np.asarray(point)[None, :]).items()}
    for key, c in values.items():
        for perm in itertools.permutations(range(k)):
            T[tuple(key[p] for p in perm)] += _perm_sign(perm) * c
    return T


def dense_wedge(A, B):
    """Antisymmetrization of the outer product, normalized by 1/(k! l!)."""
    k, l = A.ndim, B.ndim
    outer = np.multiply.outer(A, B)
    out = np.zeros_like(outer)
    for perm in itertools.permutations(range(k + l)):
        out += _perm_sign(perm) * np.transpose(outer, perm)
    return out / (math.factorial(k) * math.factorial(l))


# -- Pfaffian by perfect matchings ---------------------------------------------

def _matchings(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for i, partner in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield [(first, partner)] + tail


def pfaffian_by_matchings(A):
    """Sum over perfect matchings with the sign of the flattened permutation."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    total = 0.0
    for matching in _matchings(list(range(n))):
        flat = [i for pair in matching for i in pair]
        prod = 1.0
        for i, j in matching:
            prod *= A[i, j]
        total += _perm_sign(flat) * prod
    return total


def random_antisymmetric(rng, n):
    M = rng.normal(size=(n, n))
    return M - M.T


def central_difference(f, point, i, h=1e-5):
    plus = np.array(point, dtype=float)
    minus = np.array(point, dtype=float)
    plus[i] += h
    minus[i] -= h
    return (f(plus) - f(minus)) / (2 * h)
