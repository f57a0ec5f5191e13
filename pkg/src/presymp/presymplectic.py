"""Constant-rank pre-symplectic models in Darboux coordinates and their cotangent data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Chart
from .forms import (
    KForm,
    SmoothMap,
    VectorField,
    exterior_derivative,
    interior_product,
    matrix_at,
    pullback,
)

__all__ = [
    "NotDarbouxError",
    "PresymplecticModel",
    "darboux_presymplectic",
    "canonical_omega",
    "rank_at",
    "numerical_rank",
    "kernel_basis",
    "cotangent_chart",
    "cotangent_projection",
    "canonical_cotangent_form",
    "ambient_form",
    "RANK_TOL",
]

RANK_TOL = 1e-9


class NotDarbouxError(ValueError):
    """Raised when an operation needs the form to read sum_j dx_j ^ dy_j."""


def canonical_omega(chart: Chart) -> KForm:
    """``sum_j dx_j ^ dy_j`` on any chart carrying the base block."""
    omega = KForm.zero(chart, 2)
    for j in range(1, chart.m + 1):
        omega = omega + KForm.basis(chart, f"x{j}", f"y{j}")
    return omega


@dataclass(frozen=True)
class PresymplecticModel:
    """Pre-symplectic manifold of dimension ``2m + r`` given by its 2-form on the base chart.

    ``omega`` defaults to the Darboux form.  Non-Darboux forms are accepted
    for diagnostics (rank, closedness) only.
    """

    m: int
    r: int
    omega: KForm = field(default=None)
    require_closed: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.m < 0 or self.r < 0:
            raise ValueError("m and r must be non-negative")
        if self.m + self.r == 0:
            raise ValueError("model must have positive dimension")
        if self.omega is None:
            object.__setattr__(self, "omega", canonical_omega(self.chart))
        if self.omega.chart != self.chart or self.omega.degree != 2:
            raise ValueError("omega must be a 2-form on the base chart")
        if self.require_closed and not self.is_closed():
            raise ValueError("omega is not closed")

    @property
    def chart(self) -> Chart:
        return Chart.base(self.m, self.r)

    @property
    def dim(self) -> int:
        return 2 * self.m + self.r

    def is_closed(self) -> bool:
        return exterior_derivative(self.omega).is_zero()

    def is_darboux(self) -> bool:
        return self.omega == canonical_omega(self.chart)

    def require_darboux(self):
        if not self.is_darboux():
            raise NotDarbouxError(
                "operation requires Darboux shape: omega must equal sum_j dx_j ^ dy_j")


def darboux_presymplectic(m: int, r: int) -> PresymplecticModel:
    return PresymplecticModel(m, r)


def numerical_rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    """Count of singular values above ``tol * sigma_max``."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def rank_at(model: PresymplecticModel, point, tol: float = RANK_TOL) -> int:
    return numerical_rank(matrix_at(model.omega, point), tol)


def kernel_basis(model: PresymplecticModel) -> list[VectorField]:
    """The coordinate fields d/dz_a, checked to contract omega to zero."""
    model.require_darboux()
    basis = [VectorField.coordinate(model.chart, f"z{a}") for a in range(1, model.r + 1)]
    for k in basis:
        if not interior_product(k, model.omega).is_zero():
            raise AssertionError("kernel field does not annihilate omega")
    return basis


def cotangent_chart(model: PresymplecticModel) -> Chart:
    return Chart.cotangent(model.m, model.r)


def cotangent_projection(model: PresymplecticModel) -> SmoothMap:
    """The bundle projection T*M -> M; drops the momenta."""
    source = cotangent_chart(model)
    return SmoothMap(source, model.chart, tuple(source.var(n) for n in model.chart.names))


def canonical_cotangent_form(model: PresymplecticModel) -> KForm:
    """``dpx_j ^ dx_j + dpy_j ^ dy_j + dpz_a ^ dz_a``."""
    chart = cotangent_chart(model)
    form = KForm.zero(chart, 2)
    for j in range(1, model.m + 1):
        form = form + KForm.basis(chart, f"px{j}", f"x{j}") + KForm.basis(chart, f"py{j}", f"y{j}")
    for a in range(1, model.r + 1):
        form = form + KForm.basis(chart, f"pz{a}", f"z{a}")
    return form


def ambient_form(model: PresymplecticModel) -> KForm:
    """Canonical cotangent form plus the pulled-back pre-symplectic form."""
    return canonical_cotangent_form(model) + pullback(cotangent_projection(model), model.omega)
