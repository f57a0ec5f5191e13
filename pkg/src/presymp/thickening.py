"""Symplectic thickening of a Darboux pre-symplectic model, built two ways.

The classical route picks a connection ``P^a = dz_a - Px[j][a] dx_j - Py[j][a] dy_j``
and sets ``w~ = tau^* w + d(p_a P^a)`` on the thickened chart ``(x, y, z, p)``.
The cotangent route embeds the thickened chart into ``T*M`` by
``px_j = -Px[j][a] p_a``, ``py_j = -Py[j][a] p_a``, ``pz_a = p_a`` and pulls
back ``w' = w_T*M + rho^* w``.  Both produce the same table.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Chart,
    Expr,
    add,
    const,
    free_indices,
    mul,
    neg,
    normalize,
)
from .forms import (
    KForm,
    SmoothMap,
    VectorField,
    exterior_derivative,
    interior_product,
    pullback,
    scalar_form,
)
from .presymplectic import (
    PresymplecticModel,
    ambient_form,
    canonical_cotangent_form,
    cotangent_chart,
    darboux_presymplectic,
)

__all__ = [
    "Connection",
    "ThickenedModel",
    "Projector",
    "CLASSICAL",
    "COTANGENT",
    "thickened_chart",
    "fiber_projection",
    "zero_section",
    "connection_one_forms",
    "projector",
    "theta_P",
    "classical_thickening",
    "cotangent_lifts",
    "contraction_sign",
    "kernel_hamiltonians",
    "momentum_embedding",
    "cotangent_thickening",
    "restrict_to_zero_section",
    "random_polynomial_connection",
    "worked_example",
]

CLASSICAL = "classical"
COTANGENT = "cotangent-pullback"


@dataclass(frozen=True)
class Connection:
    """Coefficient tables ``Px[j][a]`` and ``Py[j][a]`` over the base chart (0-based here)."""

    m: int
    r: int
    px: tuple
    py: tuple

    def __post_init__(self):
        for name, table in (("Px", self.px), ("Py", self.py)):
            if len(table) != self.m or any(len(row) != self.r for row in table):
                raise ValueError(f"{name} must be an {self.m}x{self.r} table")
        n = 2 * self.m + self.r
        for row in self.px + self.py:
            for e in row:
                if any(i >= n for i in free_indices(e)):
                    raise ValueError("connection coefficients must depend on the base coordinates only")

    @classmethod
    def flat(cls, m: int, r: int) -> "Connection":
        zeros = tuple(tuple(ZERO for _ in range(r)) for _ in range(m))
        return cls(m, r, zeros, zeros)

    @classmethod
    def from_tables(cls, px: Sequence[Sequence[Expr]], py: Sequence[Sequence[Expr]] | None = None):
        px = tuple(tuple(normalize(e) for e in row) for row in px)
        m = len(px)
        r = len(px[0]) if m else 0
        if py is None:
            py = tuple(tuple(ZERO for _ in range(r)) for _ in range(m))
        else:
            py = tuple(tuple(normalize(e) for e in row) for row in py)
        return cls(m, r, px, py)

    @property
    def is_flat(self) -> bool:
        return all(e == ZERO for row in self.px + self.py for e in row)

    def is_polynomial(self) -> bool:
        from .expr import is_polynomial
        return all(is_polynomial(e) for row in self.px + self.py for e in row)

    def has_maximal_rank(self, points: np.ndarray) -> bool:
        """Whether the stacked (2m x r) coefficient matrix has rank min(2m, r) at every point."""
        from .expr import evaluate_batch
        if self.m == 0 or self.r == 0:
            return True
        values = np.stack([
            np.stack([evaluate_batch(e, points) for e in row], axis=-1)
            for row in self.px + self.py
        ], axis=-2)
        target = min(2 * self.m, self.r)
        return bool(all(np.linalg.matrix_rank(v) == target for v in values))


@dataclass(frozen=True)
class ThickenedModel:
    source: PresymplecticModel
    chart: Chart
    omega: KForm
    connection: Connection
    provenance: str


@dataclass(frozen=True)
class Projector:
    """``P = sum_a P^a (x) d/dz_a`` as (1-form, vector field) pairs."""

    pairs: tuple

    def __call__(self, X: VectorField) -> VectorField:
        chart = X.chart
        out = VectorField(chart, tuple(ZERO for _ in range(chart.dim)))
        for one_form, field in self.pairs:
            value = interior_product(X, one_form).coefficient(())
            if value != ZERO:
                out = out + field.scale(value)
        return out


def _check_dims(c: Connection, model: PresymplecticModel):
    if (c.m, c.r) != (model.m, model.r):
        raise ValueError(f"connection is {c.m}x{c.r} but model has m={model.m}, r={model.r}")


def thickened_chart(model: PresymplecticModel) -> Chart:
    return Chart.thickened(model.m, model.r)


def fiber_projection(model: PresymplecticModel) -> SmoothMap:
    """tau: thickened chart -> base chart."""
    source = thickened_chart(model)
    return SmoothMap(source, model.chart, tuple(source.var(n) for n in model.chart.names))


def zero_section(model: PresymplecticModel) -> SmoothMap:
    """Base chart -> thickened chart, p_a = 0."""
    base = model.chart
    comps = tuple(base.var(n) for n in base.names) + tuple(ZERO for _ in range(model.r))
    return SmoothMap(base, thickened_chart(model), comps)


def connection_one_forms(c: Connection, model: PresymplecticModel) -> list[KForm]:
    _check_dims(c, model)
    chart = model.chart
    forms = []
    for a in range(model.r):
        terms = {(chart.index(f"z{a + 1}"),): ONE}
        for j in range(model.m):
            terms[(chart.index(f"x{j + 1}"),)] = neg(c.px[j][a])
            terms[(chart.index(f"y{j + 1}"),)] = neg(c.py[j][a])
        forms.append(KForm(chart, 1, terms))
    return forms


def projector(c: Connection, model: PresymplecticModel) -> Projector:
    kernel = [VectorField.coordinate(model.chart, f"z{a}") for a in range(1, model.r + 1)]
    return Projector(tuple(zip(connection_one_forms(c, model), kernel)))


def theta_P(c: Connection, model: PresymplecticModel) -> KForm:
    """``p_a P^a`` on the thickened chart."""
    tau = fiber_projection(model)
    chart = tau.source
    theta = KForm.zero(chart, 1)
    for a, P in enumerate(connection_one_forms(c, model), start=1):
        theta = theta + pullback(tau, P).scale(chart.var(f"p{a}"))
    return theta


def classical_thickening(c: Connection, model: PresymplecticModel) -> ThickenedModel:
    tau = fiber_projection(model)
    omega = pullback(tau, model.omega) + exterior_derivative(theta_P(c, model))
    return ThickenedModel(model, tau.source, omega, c, CLASSICAL)


def cotangent_lifts(model: PresymplecticModel) -> list[VectorField]:
    """d/dz_a on T*M, each checked to preserve the canonical form via Cartan's formula."""
    chart = cotangent_chart(model)
    canonical = canonical_cotangent_form(model)
    d_canonical = exterior_derivative(canonical)
    lifts = []
    for a in range(1, model.r + 1):
        K = VectorField.coordinate(chart, f"z{a}")
        lie = exterior_derivative(interior_product(K, canonical))
        if d_canonical.terms:
            lie = lie + interior_product(K, d_canonical)
        if not lie.is_zero():
            raise AssertionError(f"lift of d/dz{a} does not preserve the canonical form")
        lifts.append(K)
    return lifts


@functools.lru_cache(maxsize=None)
def contraction_sign() -> int:
    """Sign s with ``i_K w' = s dpz`` under this package's contraction convention.

    Determined once on the smallest model with a kernel direction.
    """
    model = darboux_presymplectic(0, 1)
    chart = cotangent_chart(model)
    K = VectorField.coordinate(chart, "z1")
    contracted = interior_product(K, ambient_form(model))
    dp = KForm.basis(chart, "pz1")
    if contracted == dp:
        return 1
    if contracted == -dp:
        return -1
    raise AssertionError("contraction of the kernel lift is not +-dpz")


def kernel_hamiltonians(model: PresymplecticModel) -> tuple[list[Expr], int]:
    """Fiber-linear functions H_a with ``i_K_a w' = sign * dH_a``; returns (H, sign)."""
    sign = contraction_sign()
    chart = cotangent_chart(model)
    omega_prime = ambient_form(model)
    momenta = set(chart.indices("px") + chart.indices("py") + chart.indices("pz"))
    hams = []
    for a, K in enumerate(cotangent_lifts(model), start=1):
        H = chart.var(f"pz{a}")
        dH = exterior_derivative(scalar_form(chart, H))
        residual = interior_product(K, omega_prime) - dH.scale(const(sign))
        if not residual.is_zero():
            raise AssertionError(f"i_K{a} w' is not exact with H = pz{a}")
        # fiber linearity: d/dp of H is base-only, and H vanishes on the zero section
        for i in momenta:
            dHi = dH.coefficient((i,))
            if any(k in momenta for k in free_indices(dHi)):
                raise AssertionError("Hamiltonian is not linear on the fibers")
        hams.append(H)
    return hams, sign


def momentum_embedding(c: Connection, model: PresymplecticModel) -> SmoothMap:
    _check_dims(c, model)
    source = thickened_chart(model)
    target = cotangent_chart(model)
    p = [source.var(f"p{a}") for a in range(1, model.r + 1)]
    base = [source.var(n) for n in model.chart.names]
    px = [normalize(neg(add(*(mul(c.px[j][a], p[a]) for a in range(model.r)))))
          for j in range(model.m)]
    py = [normalize(neg(add(*(mul(c.py[j][a], p[a]) for a in range(model.r)))))
          for j in range(model.m)]
    return SmoothMap(source, target, tuple(base + px + py + p))


def cotangent_thickening(c: Connection, model: PresymplecticModel) -> ThickenedModel:
    embedding = momentum_embedding(c, model)
    omega = pullback(embedding, ambient_form(model))
    return ThickenedModel(model, embedding.source, omega, c, COTANGENT)


def restrict_to_zero_section(tm: ThickenedModel) -> KForm:
    return pullback(zero_section(tm.source), tm.omega)


def random_polynomial_connection(m: int, r: int, rng: np.random.Generator,
                                 degree: int = 2, max_terms: int = 3) -> Connection:
    """Connection with small integer-coefficient polynomial entries over the base coordinates."""
    chart = Chart.base(m, r)
    n = chart.dim

    def entry() -> Expr:
        terms = []
        for _ in range(int(rng.integers(0, max_terms + 1))):
            coeff = int(rng.integers(-3, 4))
            if coeff == 0:
                continue
            factors = [const(coeff)]
            for _ in range(int(rng.integers(0, degree + 1))):
                factors.append(chart.var(chart.names[int(rng.integers(0, n))]))
            terms.append(mul(*factors))
        return normalize(add(*terms))

    px = tuple(tuple(entry() for _ in range(r)) for _ in range(m))
    py = tuple(tuple(entry() for _ in range(r)) for _ in range(m))
    return Connection(m, r, px, py)


def worked_example() -> tuple[PresymplecticModel, Connection]:
    """m = r = 1 with Px = [[y1]], Py = [[0]]."""
    model = darboux_presymplectic(1, 1)
    return model, Connection.from_tables([[model.chart.var("y1")]], [[ZERO]])
