import numpy as np
import pytest

from presymp.expr import ONE, ZERO, Chart, const, evaluate, normalize, parse
from presymp.forms import KForm, SmoothMap, VectorField, exterior_derivative, matrices_at, pullback
from presymp.pfaffian import pfaffian
from presymp.presymplectic import cotangent_projection, darboux_presymplectic
from presymp.thickening import (
    CLASSICAL,
    COTANGENT,
    Connection,
    classical_thickening,
    connection_one_forms,
    contraction_sign,
    cotangent_lifts,
    cotangent_thickening,
    fiber_projection,
    kernel_hamiltonians,
    momentum_embedding,
    projector,
    random_polynomial_connection,
    restrict_to_zero_section,
    theta_P,
    worked_example,
    zero_section,
)

from helpers import THICK_11


def basis(chart, *names):
    return KForm.basis(chart, *names)


def field_equal(X, Y):
    return all(normalize(a - b) == ZERO for a, b in zip(X.components, Y.components))


class TestConnection:
    def test_rejects_fiber_dependence(self):
        with pytest.raises(ValueError):
            Connection(1, 1, ((parse("p1", THICK_11),),), ((ZERO,),))

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            Connection(1, 2, ((ZERO,),), ((ZERO, ZERO),))

    def test_flat(self):
        assert Connection.flat(2, 1).is_flat
        assert not worked_example()[1].is_flat

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            connection_one_forms(Connection.flat(1, 1), darboux_presymplectic(1, 2))

    def test_maximal_rank_query(self):
        _, c = worked_example()
        pts = np.array([[0.0, 0.5, 0.0], [0.0, 0.0, 0.0]])
        assert c.has_maximal_rank(pts[:1]) and not c.has_maximal_rank(pts)


class TestOneForms:
    def test_worked_example(self):
        model, c = worked_example()
        (P,) = connection_one_forms(c, model)
        chart = model.chart
        assert P == basis(chart, "z1") - basis(chart, "x1").scale(chart.var("y1"))

    @pytest.mark.parametrize("seed", range(5))
    def test_dual_to_kernel(self, seed):
        rng = np.random.default_rng(seed)
        model = darboux_presymplectic(2, 2)
        c = random_polynomial_connection(2, 2, rng)
        from presymp.forms import interior_product
        for a, P in enumerate(connection_one_forms(c, model), start=1):
            for b in range(1, 3):
                K = VectorField.coordinate(model.chart, f"z{b}")
                value = interior_product(K, P).coefficient(())
                assert value == (ONE if a == b else ZERO)


class TestProjector:
    def test_worked_example(self):
        model, c = worked_example()
        P = projector(c, model)
        chart = model.chart
        got = P(VectorField.coordinate(chart, "x1"))
        expected = VectorField.coordinate(chart, "z1").scale(parse("-y1", chart))
        assert field_equal(got, expected)
        assert field_equal(P(VectorField.coordinate(chart, "y1")), VectorField(chart, (ZERO,) * 3))

    @pytest.mark.parametrize("seed", range(10))
    def test_idempotent_and_identity_on_kernel(self, seed):
        rng = np.random.default_rng(seed)
        m, r = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        model = darboux_presymplectic(m, r)
        P = projector(random_polynomial_connection(m, r, rng), model)
        chart = model.chart
        for name in chart.names:
            X = VectorField.coordinate(chart, name)
            assert field_equal(P(P(X)), P(X))
        for a in range(1, r + 1):
            K = VectorField.coordinate(chart, f"z{a}")
            assert field_equal(P(K), K)


class TestTheta:
    def test_worked_example(self):
        model, c = worked_example()
        ch = Chart.thickened(1, 1)
        p1, y1 = ch.var("p1"), ch.var("y1")
        expected = basis(ch, "z1").scale(p1) - basis(ch, "x1").scale(normalize(y1 * p1))
        assert theta_P(c, model) == expected

    def test_flat_thickening(self):
        model = darboux_presymplectic(1, 1)
        tm = classical_thickening(Connection.flat(1, 1), model)
        ch = tm.chart
        assert tm.omega == basis(ch, "x1", "y1") + basis(ch, "p1", "z1")
        assert tm.provenance == CLASSICAL


class TestWorkedExample:
    def expected(self):
        ch = THICK_11
        return (basis(ch, "x1", "y1").scale(parse("1 + p1", ch))
                + basis(ch, "x1", "p1").scale(ch.var("y1"))
                - basis(ch, "z1", "p1"))

    def test_classical(self):
        model, c = worked_example()
        assert classical_thickening(c, model).omega == self.expected()

    def test_cotangent(self):
        model, c = worked_example()
        tm = cotangent_thickening(c, model)
        assert tm.omega == self.expected() and tm.provenance == COTANGENT

    def test_pfaffian_is_minus_one_minus_p(self):
        model, c = worked_example()
        tm = classical_thickening(c, model)
        pts = np.random.default_rng(0).uniform(-2, 2, (40, 4))
        for p, M in zip(pts, matrices_at(tm.omega, pts)):
            assert pfaffian(M) == pytest.approx(-(1 + p[3]), abs=1e-12)

    def test_embedding_components(self):
        model, c = worked_example()
        f = momentum_embedding(c, model)
        ch = f.source
        assert normalize(f.components[3] - parse("-(y1*p1)", ch)) == ZERO
        assert f.components[4] == ZERO
        assert f.components[5] == ch.var("p1")


class TestCotangentRoute:
    def test_lifts_are_z_directions(self):
        model = darboux_presymplectic(2, 2)
        lifts = cotangent_lifts(model)
        assert [K.components.index(ONE) for K in lifts] == [4, 5]

    def test_contraction_sign(self):
        assert contraction_sign() == -1

    @pytest.mark.parametrize("m,r", [(1, 1), (2, 1), (2, 2), (0, 1)])
    def test_hamiltonians(self, m, r):
        model = darboux_presymplectic(m, r)
        hams, sign = kernel_hamiltonians(model)
        assert sign == -1
        assert [h.name for h in hams] == [f"pz{a}" for a in range(1, r + 1)]

    def test_no_kernel(self):
        assert kernel_hamiltonians(darboux_presymplectic(1, 0))[0] == []

    @pytest.mark.parametrize("seed", range(5))
    def test_embedding_covers_projection(self, seed):
        rng = np.random.default_rng(seed)
        model = darboux_presymplectic(2, 1)
        c = random_polynomial_connection(2, 1, rng)
        composed = cotangent_projection(model).compose(momentum_embedding(c, model))
        assert composed == fiber_projection(model)


class TestEquivalence:
    @pytest.mark.parametrize("seed", range(12))
    def test_random_polynomial(self, seed):
        rng = np.random.default_rng(seed)
        m, r = int(rng.integers(0, 3)), int(rng.integers(1, 3))
        model = darboux_presymplectic(m, r)
        c = random_polynomial_connection(m, r, rng)
        assert classical_thickening(c, model).omega == cotangent_thickening(c, model).omega

    def test_transcendental(self):
        model = darboux_presymplectic(1, 2)
        ch = model.chart
        c = Connection.from_tables(
            [[parse("sin(y1)", ch), parse("exp(z2)*x1", ch)]],
            [[parse("cos(z1)", ch), ZERO]])
        a = classical_thickening(c, model).omega
        b = cotangent_thickening(c, model).omega
        assert (a - b).is_zero()
        assert exterior_derivative(a).is_zero()

    @pytest.mark.parametrize("seed", range(6))
    def test_zero_section_recovers_omega(self, seed):
        rng = np.random.default_rng(seed)
        model = darboux_presymplectic(2, 2)
        c = random_polynomial_connection(2, 2, rng)
        assert restrict_to_zero_section(classical_thickening(c, model)) == model.omega

    def test_zero_section_map(self):
        model = darboux_presymplectic(1, 1)
        s = zero_section(model)
        assert fiber_projection(model).compose(s) == SmoothMap.identity(model.chart)


def test_flat_pfaffian_constant_at_large_momenta():
    model = darboux_presymplectic(2, 2)
    tm = classical_thickening(Connection.flat(2, 2), model)
    pts = np.random.default_rng(3).uniform(-100, 100, (30, tm.chart.dim))
    values = [pfaffian(M) for M in matrices_at(tm.omega, pts)]
    assert np.allclose(values, values[0], rtol=0, atol=1e-12) and abs(values[0]) == 1


def test_random_connection_is_deterministic():
    a = random_polynomial_connection(2, 2, np.random.default_rng(42))
    b = random_polynomial_connection(2, 2, np.random.default_rng(42))
    assert a == b and a.is_polynomial()


def test_random_connection_entries_are_small_integers():
    c = random_polynomial_connection(2, 2, np.random.default_rng(1), degree=2)
    pts = np.random.default_rng(0).integers(-3, 4, (5, 6)).astype(float)
    for row in c.px + c.py:
        for e in row:
            for p in pts:
                v = evaluate(e, p)
                assert v == round(v)


def test_constant_scaling_of_theta_derivative():
    # d(theta) is linear in the connection
    model = darboux_presymplectic(1, 1)
    ch = model.chart
    c1 = Connection.from_tables([[ch.var("y1")]])
    c2 = Connection.from_tables([[normalize(const(2) * ch.var("y1"))]])
    t1 = exterior_derivative(theta_P(c1, model))
    t2 = exterior_derivative(theta_P(c2, model))
    tau = pullback(fiber_projection(model), basis(ch, "z1"))
    flat = exterior_derivative(tau.scale(Chart.thickened(1, 1).var("p1")))
    assert t2 - flat == (t1 - flat).scale(const(2))
