import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from presymp.expr import ONE, ZERO, Chart, const, normalize, parse
from presymp.forms import (
    ChartMismatchError,
    KForm,
    SmoothMap,
    VectorField,
    exterior_derivative,
    interior_product,
    matrix_at,
    pullback,
    wedge,
)

from helpers import BASE_11, THICK_11, dense_form, dense_wedge, random_expr, random_form

COT_11 = Chart.cotangent(1, 1)
seeds = st.integers(0, 2**32 - 1)


def d(chart, *names):
    return KForm.basis(chart, *names)


def form(chart, degree, table):
    """Build a form from {names-tuple: text}."""
    terms = {}
    for names, text in table.items():
        terms[tuple(chart.index(n) for n in names)] = parse(text, chart)
    return KForm(chart, degree, terms)


class TestKForm:
    def test_basis_sign(self):
        assert d(BASE_11, "y1", "x1") == -d(BASE_11, "x1", "y1")
        assert d(BASE_11, "x1", "x1").terms == {}

    def test_zero_coefficients_pruned(self):
        f = form(BASE_11, 1, {("x1",): "y1 - y1", ("z1",): "1"})
        assert list(f.terms) == [(2,)]

    def test_rejects_unsorted_key(self):
        with pytest.raises(ValueError):
            KForm(BASE_11, 2, {(1, 0): ONE})

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            KForm(BASE_11, 2, {(0,): ONE})

    def test_addition_cancels(self):
        a = d(BASE_11, "x1", "y1")
        assert (a - a).terms == {}

    def test_chart_mismatch(self):
        with pytest.raises(ChartMismatchError):
            d(BASE_11, "x1") + d(THICK_11, "x1")


class TestWedge:
    def test_basis(self):
        assert wedge(d(BASE_11, "x1"), d(BASE_11, "y1")) == KForm(BASE_11, 2, {(0, 1): ONE})

    def test_antisymmetry(self):
        assert wedge(d(BASE_11, "x1"), d(BASE_11, "x1")).terms == {}

    def test_volume_form_on_thickened_chart(self):
        # (x1,y1,z1,p1): the merged tuple is already sorted, parity even
        vol = wedge(d(THICK_11, "x1", "y1"), d(THICK_11, "z1", "p1"))
        assert vol == KForm(THICK_11, 4, {(0, 1, 2, 3): ONE})

    def test_degree_beyond_dimension(self):
        a = d(BASE_11, "x1", "y1")
        assert wedge(a, a).degree == 4 and wedge(a, a).terms == {}

    def test_chart_mismatch(self):
        with pytest.raises(ChartMismatchError):
            wedge(d(BASE_11, "x1"), d(THICK_11, "y1"))

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.integers(0, 2), st.integers(0, 2))
    def test_graded_commutativity(self, seed, k, l):
        rng = np.random.default_rng(seed)
        a = random_form(rng, THICK_11, k)
        b = random_form(rng, THICK_11, l)
        lhs = wedge(a, b)
        rhs = wedge(b, a)
        assert lhs == (rhs if (k * l) % 2 == 0 else -rhs)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.integers(1, 2), st.integers(1, 2))
    def test_matches_dense_antisymmetrization(self, seed, k, l):
        rng = np.random.default_rng(seed)
        a = random_form(rng, THICK_11, k)
        b = random_form(rng, THICK_11, l)
        pt = rng.uniform(-1, 1, THICK_11.dim)
        expected = dense_wedge(dense_form(a, pt), dense_form(b, pt))
        assert np.allclose(dense_form(wedge(a, b), pt), expected, atol=1e-12)


class TestExteriorDerivative:
    def test_leibniz_on_monomial(self):
        assert exterior_derivative(form(BASE_11, 1, {("y1",): "x1"})) == d(BASE_11, "x1", "y1")

    def test_constant_form(self):
        assert exterior_derivative(d(BASE_11, "x1", "y1")).terms == {}

    def test_theta_of_worked_example(self):
        # d(p1 (dz1 - y1 dx1)) = dp1^dz1 - y1 dp1^dx1 - p1 dy1^dx1
        theta = form(THICK_11, 1, {("z1",): "p1", ("x1",): "-(y1*p1)"})
        expected = (d(THICK_11, "p1", "z1") - d(THICK_11, "p1", "x1").scale(THICK_11.var("y1"))
                    - d(THICK_11, "y1", "x1").scale(THICK_11.var("p1")))
        assert exterior_derivative(theta) == expected

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_d_squared_vanishes(self, k):
        rng = np.random.default_rng(100 + k)
        for _ in range(200 // 3 + 1):
            f = random_form(rng, THICK_11, k)
            assert exterior_derivative(exterior_derivative(f)).terms == {}

    def test_d_squared_with_transcendental_coefficients(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            f = random_form(rng, THICK_11, 1, polynomial=False)
            assert exterior_derivative(exterior_derivative(f)).is_zero()

    def test_matches_dense_derivative_numerically(self):
        # (da)_{ij} = d_i a_j - d_j a_i for a 1-form, via finite differences
        rng = np.random.default_rng(3)
        a = random_form(rng, BASE_11, 1)
        da = exterior_derivative(a)
        pt = rng.uniform(-1, 1, 3)
        h = 1e-6
        grad = np.zeros((3, 3))
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            grad[i] = (dense_form(a, pt + e) - dense_form(a, pt - e)) / (2 * h)
        expected = grad - grad.T
        assert np.allclose(dense_form(da, pt), expected, atol=1e-7)


class TestInteriorProduct:
    def test_basis_contraction(self):
        X = VectorField.coordinate(BASE_11, "x1")
        assert interior_product(X, d(BASE_11, "x1", "y1")) == d(BASE_11, "y1")

    def test_kernel_direction(self):
        X = VectorField.coordinate(BASE_11, "z1")
        assert interior_product(X, d(BASE_11, "x1", "y1")).terms == {}

    def test_declared_sign_convention(self):
        X = VectorField.coordinate(COT_11, "z1")
        assert interior_product(X, d(COT_11, "pz1", "z1")) == -d(COT_11, "pz1")

    def test_zero_form_rejected(self):
        X = VectorField.coordinate(BASE_11, "z1")
        with pytest.raises(ValueError):
            interior_product(X, KForm(BASE_11, 0, {(): ONE}))

    def test_chart_mismatch(self):
        with pytest.raises(ChartMismatchError):
            interior_product(VectorField.coordinate(THICK_11, "x1"), d(BASE_11, "x1"))

    def test_graded_leibniz_pointwise(self):
        # i_X(a ^ b) = a(X) b - b(X) a for 1-forms, checked on dense arrays
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(50):
            a = random_form(rng, THICK_11, 1)
            b = random_form(rng, THICK_11, 1)
            X = VectorField(THICK_11, tuple(random_expr(rng, THICK_11, 2, polynomial=True) for _ in range(4)))
            pt = rng.uniform(-1, 1, 4)
            Xv = np.array([float(dense_form(KForm(THICK_11, 0, {(): c}), pt)) for c in X.components])
            A, B = dense_form(a, pt), dense_form(b, pt)
            expected = (A @ Xv) * B - (B @ Xv) * A
            got = dense_form(interior_product(X, wedge(a, b)), pt)
            worst = max(worst, float(np.max(np.abs(got - expected))))
        assert worst < 1e-10

    def test_contraction_is_tensor_slot(self):
        rng = np.random.default_rng(5)
        w = random_form(rng, THICK_11, 3)
        X = VectorField(THICK_11, tuple(const(int(v)) for v in rng.integers(-2, 3, 4)))
        pt = rng.uniform(-1, 1, 4)
        Xv = np.array([float(c.value) for c in X.components])
        expected = np.tensordot(Xv, dense_form(w, pt), axes=(0, 0))
        assert np.allclose(dense_form(interior_product(X, w), pt), expected, atol=1e-12)


def _random_map(rng, source, target):
    return SmoothMap(source, target, tuple(
        normalize(random_expr(rng, source, 2, polynomial=True)) for _ in range(target.dim)))


class TestPullback:
    def test_identity(self):
        rng = np.random.default_rng(0)
        f = random_form(rng, THICK_11, 2)
        assert pullback(SmoothMap.identity(THICK_11), f) == f

    def test_projection(self):
        tau = SmoothMap(THICK_11, BASE_11, tuple(THICK_11.var(n) for n in BASE_11.names))
        assert pullback(tau, d(BASE_11, "x1", "y1")) == d(THICK_11, "x1", "y1")

    def test_momentum_substitution(self):
        # px1 = -y1 p1: d(-y1 p1) ^ dx1 = p1 dx1^dy1 - y1 dp1^dx1
        comps = [THICK_11.var(n) for n in BASE_11.names]
        comps += [parse("-(y1*p1)", THICK_11), ZERO, THICK_11.var("p1")]
        emb = SmoothMap(THICK_11, COT_11, tuple(comps))
        expected = (d(THICK_11, "x1", "y1").scale(THICK_11.var("p1"))
                    - d(THICK_11, "p1", "x1").scale(THICK_11.var("y1")))
        assert pullback(emb, d(COT_11, "px1", "x1")) == expected

    def test_chart_mismatch(self):
        with pytest.raises(ChartMismatchError):
            pullback(SmoothMap.identity(BASE_11), d(THICK_11, "x1"))

    def test_map_must_use_source_coordinates(self):
        with pytest.raises(ValueError):
            SmoothMap(BASE_11, BASE_11, (THICK_11.var("p1"), ONE, ONE))

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(0, 2))
    def test_functorial(self, seed, k):
        rng = np.random.default_rng(seed)
        f = _random_map(rng, BASE_11, THICK_11)
        g = _random_map(rng, THICK_11, BASE_11)
        a = random_form(rng, BASE_11, k)
        assert pullback(g.compose(f), a) == pullback(f, pullback(g, a))

    @settings(max_examples=25, deadline=None)
    @given(seeds, st.integers(0, 2))
    def test_commutes_with_d(self, seed, k):
        rng = np.random.default_rng(seed)
        f = _random_map(rng, BASE_11, THICK_11)
        a = random_form(rng, THICK_11, k)
        assert pullback(f, exterior_derivative(a)) == exterior_derivative(pullback(f, a))

    def test_matches_jacobian_pointwise(self):
        # (f^* w)(u, v) = w(J u, J v) with J the numerical Jacobian
        rng = np.random.default_rng(9)
        f = _random_map(rng, BASE_11, THICK_11)
        w = random_form(rng, THICK_11, 2)
        pt = rng.uniform(-1, 1, 3)
        from presymp.expr import evaluate
        image = np.array([evaluate(c, pt) for c in f.components])
        J = np.zeros((4, 3))
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            J[:, i] = [(evaluate(c, pt + e) - evaluate(c, pt - e)) / (2 * h) for c in f.components]
        expected = J.T @ matrix_at(w, image) @ J
        assert np.allclose(matrix_at(pullback(f, w), pt), expected, atol=1e-6)


class TestMatrixAt:
    def test_canonical(self):
        M = matrix_at(d(BASE_11, "x1", "y1"), [0.3, -0.2, 0.9])
        assert M.tolist() == [[0, 1, 0], [-1, 0, 0], [0, 0, 0]]

    def test_zero_form(self):
        assert not matrix_at(KForm.zero(THICK_11, 2), np.zeros(4)).any()

    def test_worked_example_at_zero_section(self):
        # (1+p1) dx1^dy1 + y1 dx1^dp1 - dz1^dp1 at (x, y, z, p) = (0.5, 0.25, -1, 0)
        w = form(THICK_11, 2, {("x1", "y1"): "1 + p1", ("x1", "p1"): "y1", ("z1", "p1"): "-1"})
        M = matrix_at(w, [0.5, 0.25, -1.0, 0.0])
        expected = np.array([[0, 1, 0, 0.25], [-1, 0, 0, 0], [0, 0, 0, -1], [-0.25, 0, 1, 0]])
        assert np.array_equal(M, expected)

    def test_degree_mismatch(self):
        with pytest.raises(ValueError):
            matrix_at(d(BASE_11, "x1"), [0, 0, 0])

    def test_point_dimension(self):
        with pytest.raises(ValueError):
            matrix_at(d(BASE_11, "x1", "y1"), [0, 0])

    def test_bilinear_form_convention(self):
        w = form(THICK_11, 2, {("x1", "p1"): "2", ("y1", "z1"): "x1"})
        M = matrix_at(w, [3.0, 0, 0, 0])
        e = np.eye(4)
        assert e[0] @ M @ e[3] == 2 and e[1] @ M @ e[2] == 3
        assert list(itertools.chain(*(M + M.T))) == [0] * 16
