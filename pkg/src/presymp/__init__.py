"""Symplectic thickening of constant-rank pre-symplectic manifolds.

Builds the thickened form by the connection route and by pulling back a
modified cotangent-bundle form, and checks the two against each other.
"""

from .expr import Chart, Expr, differentiate, evaluate, normalize, parse, to_string
from .forms import (
    KForm,
    SmoothMap,
    VectorField,
    exterior_derivative,
    interior_product,
    matrix_at,
    pullback,
    wedge,
)
from .pfaffian import pfaffian
from .presymplectic import (
    PresymplecticModel,
    ambient_form,
    canonical_cotangent_form,
    cotangent_chart,
    darboux_presymplectic,
    kernel_basis,
    rank_at,
)
from .thickening import (
    Connection,
    ThickenedModel,
    classical_thickening,
    connection_one_forms,
    cotangent_lifts,
    cotangent_thickening,
    kernel_hamiltonians,
    momentum_embedding,
    projector,
    theta_P,
    worked_example,
)
from .verify import VerificationReport, full_report

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "Expr",
    "differentiate",
    "evaluate",
    "normalize",
    "parse",
    "to_string",
    "KForm",
    "SmoothMap",
    "VectorField",
    "exterior_derivative",
    "interior_product",
    "matrix_at",
    "pullback",
    "wedge",
    "pfaffian",
    "PresymplecticModel",
    "ambient_form",
    "canonical_cotangent_form",
    "cotangent_chart",
    "darboux_presymplectic",
    "kernel_basis",
    "rank_at",
    "Connection",
    "ThickenedModel",
    "classical_thickening",
    "connection_one_forms",
    "cotangent_lifts",
    "cotangent_thickening",
    "kernel_hamiltonians",
    "momentum_embedding",
    "projector",
    "theta_P",
    "worked_example",
    "VerificationReport",
    "full_report",
]
