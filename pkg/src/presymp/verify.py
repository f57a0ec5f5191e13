"""Numeric and symbolic verdicts on pre-symplectic models and their thickenings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import subspace_angles

from .expr import ZERO, Expr, const, evaluate_batch, is_polynomial, normalize
from .forms import KForm, VectorField, exterior_derivative, interior_product, matrices_at, wedge
from .pfaffian import pfaffian
from .presymplectic import (
    RANK_TOL,
    PresymplecticModel,
    ambient_form,
    canonical_cotangent_form,
    numerical_rank,
)
from .thickening import (
    Connection,
    ThickenedModel,
    classical_thickening,
    contraction_sign,
    cotangent_thickening,
    kernel_hamiltonians,
    projector,
    restrict_to_zero_section,
)

__all__ = [
    "PASS",
    "FAIL",
    "WARN",
    "DEFAULT_TOLERANCES",
    "CheckRecord",
    "VerificationReport",
    "ScanResult",
    "StageError",
    "symplectic_orthogonal",
    "principal_angles",
    "check_closed",
    "check_rank",
    "check_projector",
    "check_equivalence",
    "check_zero_section",
    "check_wedge_power",
    "check_hamiltonians",
    "check_coisotropic",
    "degeneracy_scan",
    "fiber_direction",
    "full_report",
    "sample_points",
    "zero_section_points",
]

PASS, FAIL, WARN = "pass", "fail", "warn"

DEFAULT_TOLERANCES = {
    "closed": 1e-8,
    "rank": RANK_TOL,
    "projector": 1e-10,
    "equivalence": 1e-10,
    "zero_section": 1e-12,
    "wedge_power": 1e-9,
    "hamiltonian": 1e-10,
    "coisotropy": 1e-8,
    "orthogonal": 1e-9,
    "degeneracy": 1e-9,
}

BISECTION_STEPS = 50


@dataclass(frozen=True)
class CheckRecord:
    name: str
    status: str
    residual: float
    tolerance: float
    samples: int
    seed: int
    note: str = ""

    @classmethod
    def judge(cls, name, residual, tolerance, samples, seed, note="") -> "CheckRecord":
        status = PASS if residual <= tolerance else FAIL
        return cls(name, status, float(residual), float(tolerance), samples, seed, note)


@dataclass
class VerificationReport:
    records: list = field(default_factory=list)

    def add(self, record: CheckRecord) -> CheckRecord:
        self.records.append(record)
        return record

    @property
    def passed(self) -> bool:
        return all(r.status != FAIL for r in self.records)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if r.status == FAIL]

    def __getitem__(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------------------
# Sampling helpers


def sample_points(dim: int, samples: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-1.0, 1.0, size=(samples, dim))


def zero_section_points(tm: ThickenedModel, samples: int, seed: int) -> np.ndarray:
    n = tm.source.dim
    pts = np.zeros((samples, tm.chart.dim))
    pts[:, :n] = sample_points(n, samples, seed)
    return pts


def _symbolic_residual(exprs: Iterable[Expr], points: np.ndarray, tol: float):
    """Residual of a family that should vanish.

    Polynomial families are judged exactly (tolerance 0, residual is the
    sampled magnitude, forced to inf if the sampling happens to miss a
    nonzero polynomial).  Others fall back to the sampled magnitude at ``tol``.
    """
    exprs = [normalize(e) for e in exprs]
    nonzero = [e for e in exprs if e != ZERO]
    numeric = 0.0
    for e in nonzero:
        numeric = max(numeric, float(np.max(np.abs(evaluate_batch(e, points)))))
    if all(is_polynomial(e) for e in nonzero):
        if nonzero and numeric == 0.0:
            numeric = math.inf
        return numeric, 0.0, "symbolic"
    return numeric, tol, "numeric"


# ---------------------------------------------------------------------------
# Linear algebra


def _as_rows(B, dim: int) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.size == 0:
        return np.zeros((0, dim))
    return np.atleast_2d(B)


def symplectic_orthogonal(Omega: np.ndarray, B, tol: float = DEFAULT_TOLERANCES["orthogonal"]) -> np.ndarray:
    """Orthonormal rows spanning ``{v : b^T Omega v = 0 for all rows b of B}``."""
    Omega = np.asarray(Omega, dtype=float)
    dim = Omega.shape[0]
    B = _as_rows(B, dim)
    if B.shape[1] != dim:
        raise ValueError("basis vectors do not match the matrix dimension")
    if B.shape[0] and numerical_rank(B, tol) < B.shape[0]:
        raise ValueError("basis vectors are linearly dependent")
    if B.shape[0] == 0:
        return np.eye(dim)
    constraints = B @ Omega
    _, s, vt = np.linalg.svd(constraints)
    rank = 0 if s[0] == 0.0 else int(np.sum(s > tol * s[0]))
    return vt[rank:]


def principal_angles(U, V) -> np.ndarray:
    """Principal angles between row spans; empty if either span is trivial."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if U.size == 0 or V.size == 0:
        return np.zeros(0)
    return subspace_angles(U.T, V.T)


def _subspace_distance(U: np.ndarray, V: np.ndarray) -> float:
    """Largest principal angle, or inf when the dimensions differ."""
    if U.shape[0] != V.shape[0]:
        return math.inf
    angles = principal_angles(U, V)
    return float(np.max(angles)) if angles.size else 0.0


# ---------------------------------------------------------------------------
# Individual checks


def check_closed(form: KForm, name: str = "closed", samples: int = 100, seed: int = 0,
                 tol: float = DEFAULT_TOLERANCES["closed"]) -> CheckRecord:
    d = exterior_derivative(form)
    pts = sample_points(form.chart.dim, samples, seed)
    residual, tolerance, mode = _symbolic_residual((c for _, c in d.items()), pts, tol)
    return CheckRecord.judge(name, residual, tolerance, samples, seed, f"{mode}; d has {len(d.terms)} terms")


def check_rank(model: PresymplecticModel, samples: int = 100, seed: int = 0,
               tol: float = DEFAULT_TOLERANCES["rank"]) -> CheckRecord:
    """Numerical rank of omega equals 2m at every sample; residual is the worst deviation."""
    pts = sample_points(model.dim, samples, seed)
    ranks = [numerical_rank(M, tol) for M in matrices_at(model.omega, pts)]
    worst = max(abs(k - 2 * model.m) for k in ranks)
    return CheckRecord.judge("constant-rank", worst, 0, samples, seed,
                             f"expected rank {2 * model.m}; sv threshold {tol:.3g}*sigma_max")


def check_projector(c: Connection, model: PresymplecticModel, samples: int = 100, seed: int = 0,
                    tol: float = DEFAULT_TOLERANCES["projector"]) -> CheckRecord:
    """P o P = P on every coordinate field and P fixes each d/dz_a."""
    P = projector(c, model)
    chart = model.chart
    pts = sample_points(chart.dim, samples, seed)
    diffs = []
    for name in chart.names:
        X = VectorField.coordinate(chart, name)
        once = P(X)
        twice = P(once)
        diffs.extend(a - b for a, b in zip(twice.components, once.components))
        if name.startswith("z"):
            diffs.extend(a - b for a, b in zip(once.components, X.components))
    residual, tolerance, mode = _symbolic_residual(diffs, pts, tol)
    note = mode
    if not c.has_maximal_rank(pts):
        note += "; connection tables are not of maximal rank (informational)"
    return CheckRecord.judge("projector", residual, tolerance, samples, seed, note)


def _form_difference(a: KForm, b: KForm) -> list[Expr]:
    keys = set(a.terms) | set(b.terms)
    return [a.coefficient(k) - b.coefficient(k) for k in sorted(keys)]


def check_equivalence(a: ThickenedModel, b: ThickenedModel, samples: int = 100, seed: int = 0,
                      tol: float = DEFAULT_TOLERANCES["equivalence"]) -> CheckRecord:
    """Both thickenings carry the same coefficient table and agree pointwise."""
    if a.source != b.source or a.connection != b.connection:
        raise ValueError("equivalence check needs the same model and connection")
    pts = sample_points(a.chart.dim, samples, seed)
    numeric = 0.0
    for e in _form_difference(a.omega, b.omega):
        numeric = max(numeric, float(np.max(np.abs(evaluate_batch(e, pts)))))
    identical = a.omega == b.omega
    status = PASS if identical and numeric <= tol else FAIL
    residual = numeric if identical or numeric > 0 else math.inf
    note = "identical tables" if identical else "tables differ"
    return CheckRecord("equivalence", status, residual, tol, samples, seed,
                       f"{note}; {a.provenance} vs {b.provenance}")


def check_zero_section(tm: ThickenedModel, samples: int = 100, seed: int = 0,
                       tol: float = DEFAULT_TOLERANCES["zero_section"]) -> CheckRecord:
    restricted = restrict_to_zero_section(tm)
    pts = sample_points(tm.source.dim, samples, seed)
    residual, tolerance, mode = _symbolic_residual(
        _form_difference(restricted, tm.source.omega), pts, tol)
    return CheckRecord.judge(f"zero-section({tm.provenance})", residual, tolerance, samples, seed, mode)


def check_wedge_power(model: PresymplecticModel, samples: int = 100, seed: int = 0,
                      tol: float = DEFAULT_TOLERANCES["wedge_power"]) -> CheckRecord:
    """Top wedge powers of w' and the canonical cotangent form coincide; both determinants are 1."""
    canonical = canonical_cotangent_form(model)
    ambient = ambient_form(model)
    n = model.dim
    top_a, top_c = ambient, canonical
    for _ in range(n - 1):
        top_a = wedge(top_a, ambient)
        top_c = wedge(top_c, canonical)
    symbolic_equal = top_a == top_c and bool(top_c.terms)
    pts = sample_points(canonical.chart.dim, samples, seed)
    mats_a = matrices_at(ambient, pts)
    mats_c = matrices_at(canonical, pts)
    residual = 0.0
    for Ma, Mc in zip(mats_a, mats_c):
        da, dc = np.linalg.det(Ma), np.linalg.det(Mc)
        residual = max(residual, abs(da - dc), abs(da - 1.0), abs(dc - 1.0),
                       abs(pfaffian(Ma) - pfaffian(Mc)))
    if not symbolic_equal:
        residual = max(residual, math.inf)
    note = f"w'^{n} {'==' if symbolic_equal else '!='} w_T*M^{n} symbolically; det and pfaffian sampled"
    return CheckRecord.judge("wedge-power", residual, tol, samples, seed, note)


def check_hamiltonians(model: PresymplecticModel, samples: int = 100, seed: int = 0,
                       tol: float = DEFAULT_TOLERANCES["hamiltonian"]) -> CheckRecord:
    """``i_K_a w' - sign * dH_a`` vanishes for H_a = pz_a."""
    sign = contraction_sign()
    hams, _ = kernel_hamiltonians(model)
    omega_prime = ambient_form(model)
    chart = omega_prime.chart
    diffs = []
    for a, H in enumerate(hams, start=1):
        K = VectorField.coordinate(chart, f"z{a}")
        dH = exterior_derivative(KForm(chart, 0, {(): H}))
        residual_form = interior_product(K, omega_prime) - dH.scale(const(sign))
        diffs.extend(c for _, c in residual_form.items())
    pts = sample_points(chart.dim, samples, seed)
    residual, tolerance, mode = _symbolic_residual(diffs, pts, tol)
    names = ", ".join(str(H) for H in hams) or "none"
    return CheckRecord.judge("kernel-hamiltonians", residual, tolerance, samples, seed,
                             f"{mode}; sign={sign:+d}; H = {names}")


def check_coisotropic(tm: ThickenedModel, points: np.ndarray | None = None, samples: int = 50,
                      seed: int = 0, tol: float = DEFAULT_TOLERANCES["coisotropy"]) -> CheckRecord:
    """At zero-section points the orthogonal of T(zero section) is span{d/dz_a}."""
    if points is None:
        points = zero_section_points(tm, samples, seed)
    points = np.atleast_2d(points)
    n = tm.source.dim
    dim = tm.chart.dim
    if np.any(points[:, n:] != 0.0):
        raise ValueError("coisotropy points must lie on the zero section")
    tangent = np.eye(dim)[:n]
    kernel = np.eye(dim)[[tm.chart.index(f"z{a}") for a in range(1, tm.source.r + 1)]]
    kernel = kernel.reshape(-1, dim)
    worst = 0.0
    for Omega in matrices_at(tm.omega, points):
        orth = symplectic_orthogonal(Omega, tangent)
        worst = max(worst, _subspace_distance(orth, kernel))
        angles = principal_angles(orth, tangent)
        if angles.size:
            worst = max(worst, float(np.max(angles)))
    return CheckRecord.judge(f"coisotropic({tm.provenance})", worst, tol, len(points), seed,
                             f"orthogonal == span of {kernel.shape[0]} kernel fields")


@dataclass(frozen=True)
class ScanResult:
    record: CheckRecord
    zeros: tuple
    safe_radius: float
    scale: float


def fiber_direction(tm: ThickenedModel, a: int, sign: float = 1.0) -> np.ndarray:
    v = np.zeros(tm.chart.dim)
    v[tm.chart.index(f"p{a}")] = sign
    return v


def _bisect(f: Callable[[float], float], lo: float, hi: float, flo: float) -> float:
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def degeneracy_scan(tm: ThickenedModel, base_point: Sequence[float], direction: Sequence[float],
                    t_max: float = 2.0, steps: int = 200,
                    tol: float = DEFAULT_TOLERANCES["degeneracy"], seed: int = 0) -> ScanResult:
    """Scan the Pfaffian of w~ along ``base_point + t * direction`` for t in [0, t_max].

    Zeros are grid points with ``|pf| < tol * scale`` (scale = max |pf| on the
    grid) and sign changes between neighbours, refined by bisection.
    """
    base_point = np.asarray(base_point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    n = tm.source.dim
    if np.any(direction[:n] != 0.0) or not np.any(direction[n:]):
        raise ValueError("scan direction must be a nonzero fiber vector")
    direction = direction / np.linalg.norm(direction)

    def pf(t: float) -> float:
        M = matrices_at(tm.omega, (base_point + t * direction)[None, :])[0]
        return pfaffian(M)

    ts = np.linspace(0.0, t_max, steps + 1)
    values = np.array([pf(t) for t in ts])
    scale = float(np.max(np.abs(values))) or 1.0
    threshold = tol * scale
    near = np.abs(values) < threshold

    zeros = []
    i = 0
    while i < len(ts):
        if near[i]:
            j = i
            while j + 1 < len(ts) and near[j + 1]:
                j += 1
            k = i + int(np.argmin(np.abs(values[i:j + 1])))
            zeros.append(float(ts[k]))
            i = j + 1
            continue
        if i > 0 and not near[i - 1] and np.sign(values[i]) != np.sign(values[i - 1]):
            zeros.append(_bisect(pf, float(ts[i - 1]), float(ts[i]), float(values[i - 1])))
        i += 1

    safe_radius = min(zeros) if zeros else float(t_max)
    if near[0]:
        residual = math.inf
    else:
        residual = max((abs(pf(t)) / scale for t in zeros), default=0.0)
    axis = ", ".join(f"{sgn}{tm.chart.names[k]}" for k, sgn in
                     ((k, "+" if direction[k] > 0 else "-") for k in range(n, tm.chart.dim))
                     if direction[k] != 0.0)
    if zeros:
        locus = "; ".join(
            ", ".join(f"{tm.chart.names[k]}={(base_point + t * direction)[k]:.17g}"
                      for k in range(n, tm.chart.dim) if direction[k] != 0.0)
            for t in zeros)
        note = f"along {axis} on [0, {t_max:g}]: zeros at t={[float(f'{t:.17g}') for t in zeros]} ({locus}); safe radius {safe_radius:.17g}"
    else:
        note = f"along {axis} on [0, {t_max:g}]: no zero; safe radius {safe_radius:.17g}"
    record = CheckRecord.judge(f"degeneracy-scan({axis})", residual, tol, len(ts), seed, note)
    return ScanResult(record, tuple(zeros), safe_radius, scale)


# ---------------------------------------------------------------------------
# Aggregate


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage attached
        raise StageError(name, exc) from exc


def full_report(model: PresymplecticModel, connection: Connection, samples: int = 100, seed: int = 0,
                coisotropy_points: int = 50, scan_range: float = 2.0, scan_steps: int = 200,
                tolerances: dict | None = None) -> VerificationReport:
    """Run every check in a fixed order; deterministic for a fixed seed."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    report = VerificationReport()

    report.add(_stage("closed(omega)", check_closed, model.omega, "closed(omega)", samples, seed, tol["closed"]))
    report.add(_stage("constant-rank", check_rank, model, samples, seed, tol["rank"]))
    if not model.is_darboux():
        report.add(CheckRecord("darboux-shape", FAIL, math.inf, 0.0, 0, seed,
                               "thickening requires Darboux shape; remaining checks skipped"))
        return report

    report.add(_stage("projector", check_projector, connection, model, samples, seed, tol["projector"]))
    classical = _stage("classical thickening", classical_thickening, connection, model)
    cotangent = _stage("cotangent thickening", cotangent_thickening, connection, model)
    for tm in (classical, cotangent):
        name = f"closed(omega~ {tm.provenance})"
        report.add(_stage(name, check_closed, tm.omega, name, samples, seed, tol["closed"]))
    report.add(_stage("equivalence", check_equivalence, classical, cotangent, samples, seed,
                      tol["equivalence"]))
    for tm in (classical, cotangent):
        report.add(_stage("zero-section", check_zero_section, tm, samples, seed, tol["zero_section"]))
    report.add(_stage("wedge-power", check_wedge_power, model, samples, seed, tol["wedge_power"]))
    report.add(_stage("kernel-hamiltonians", check_hamiltonians, model, samples, seed, tol["hamiltonian"]))
    for tm in (classical, cotangent):
        report.add(_stage("coisotropy", check_coisotropic, tm, None, coisotropy_points, seed,
                          tol["coisotropy"]))
    origin = np.zeros(classical.chart.dim)
    for a in range(1, model.r + 1):
        for sign in (1.0, -1.0):
            scan = _stage("degeneracy scan", degeneracy_scan, classical, origin,
                          fiber_direction(classical, a, sign), scan_range, scan_steps, tol["degeneracy"], seed)
            report.add(scan.record)
    return report
