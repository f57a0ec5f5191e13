"""Manifest files: flat key-value text with [manifold], [connection], [omega] and [verify] sections.

Example::

    [manifold]
    m = 1
    r = 1

    [connection]
    Px[1][1] = y1      # absent entries are zero

    [verify]
    samples = 100
    seed = 0

See README.md for every key.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from .expr import ZERO, Chart, ParseError, free_indices, parse
from .forms import KForm
from .presymplectic import PresymplecticModel, canonical_omega
from .thickening import Connection
from .verify import DEFAULT_TOLERANCES

__all__ = ["Manifest", "ManifestError", "load_manifest", "parse_manifest", "PROBES"]

PROBES = ("non-closed",)

_ENTRY = re.compile(r"^(Px|Py)\[(\d+)\]\[(\d+)\]$")
_SECTIONS = {"manifold", "connection", "omega", "verify"}
_VERIFY_KEYS = {"samples", "seed", "coisotropy_points", "scan_range", "scan_steps", "probe"}


class ManifestError(ValueError):
    pass


@dataclass
class Manifest:
    m: int
    r: int
    connection: Connection
    model: PresymplecticModel
    samples: int = 100
    seed: int = 0
    coisotropy_points: int = 50
    scan_range: float = 2.0
    scan_steps: int = 200
    tolerances: dict = field(default_factory=dict)
    probe: str | None = None
    source: str = "<string>"

    def verify_options(self) -> dict:
        return dict(samples=self.samples, seed=self.seed, coisotropy_points=self.coisotropy_points,
                    scan_range=self.scan_range, scan_steps=self.scan_steps,
                    tolerances=self.tolerances)


def _line_of(text: str, section: str, key: str) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
        elif current == section and re.match(r"\s*" + re.escape(key) + r"\s*[=:]", raw):
            return lineno
    return None


def parse_manifest(text: str, source: str = "<string>") -> Manifest:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ManifestError(f"{source}: {exc}") from None

    def fail(section, key, message):
        line = _line_of(text, section, key)
        where = f"line {line}, " if line else ""
        raise ManifestError(f"{source}: {where}[{section}] {key}: {message}")

    unknown = set(parser.sections()) - _SECTIONS
    if unknown:
        raise ManifestError(f"{source}: unknown section(s) {sorted(unknown)}")
    if not parser.has_section("manifold"):
        raise ManifestError(f"{source}: missing [manifold] section")

    def get_int(section, key, default=None, minimum=0):
        if not parser.has_option(section, key):
            if default is None:
                fail(section, key, "required")
            return default
        try:
            value = int(parser.get(section, key))
        except ValueError:
            fail(section, key, "expected an integer")
        if value < minimum:
            fail(section, key, f"must be >= {minimum}")
        return value

    def get_float(section, key, default):
        if not parser.has_option(section, key):
            return default
        try:
            return float(parser.get(section, key))
        except ValueError:
            fail(section, key, "expected a number")

    extra = set(parser.options("manifold")) - {"m", "r"}
    if extra:
        fail("manifold", sorted(extra)[0], "unknown key")
    m = get_int("manifold", "m")
    r = get_int("manifold", "r")
    if m + r == 0:
        fail("manifold", "m", "m and r cannot both be zero")

    base = Chart.base(m, r)
    thick = Chart.thickened(m, r)

    def parse_base_expr(section, key, text_value):
        try:
            e = parse(text_value, thick)
        except ParseError as exc:
            fail(section, key, str(exc))
        fiber = sorted(i for i in free_indices(e) if i >= base.dim)
        if fiber:
            fail(section, key, f"references fiber coordinate {thick.names[fiber[0]]}; "
                               "connection entries must depend on the base coordinates only")
        return e

    px = [[ZERO] * r for _ in range(m)]
    py = [[ZERO] * r for _ in range(m)]
    if parser.has_section("connection"):
        for key, value in parser.items("connection"):
            match = _ENTRY.match(key)
            if not match:
                fail("connection", key, "expected a key of the form Px[j][a] or Py[j][a]")
            table, j, a = match.group(1), int(match.group(2)), int(match.group(3))
            if not (1 <= j <= m and 1 <= a <= r):
                fail("connection", key, f"index out of range 1..{m} x 1..{r}")
            (px if table == "Px" else py)[j - 1][a - 1] = parse_base_expr("connection", key, value)
    connection = Connection.from_tables(px, py) if m else Connection.flat(m, r)

    omega = canonical_omega(base)
    if parser.has_section("omega"):
        terms = {}
        for key, value in parser.items("omega"):
            names = [s.strip() for s in key.strip("()").split(",")]
            try:
                idx = [base.index(n) for n in names]
            except KeyError as exc:
                fail("omega", key, f"unknown coordinate {exc.args[0]!r}")
            if len(idx) != 2 or idx[0] == idx[1]:
                fail("omega", key, "expected two distinct base coordinates, e.g. x1,y1")
            e = parse_base_expr("omega", key, value)
            if idx[0] > idx[1]:
                idx.reverse()
                e = -e
            terms[tuple(idx)] = e
        omega = KForm(base, 2, terms)

    samples = coisotropy_points = scan_steps = seed = None
    scan_range = 2.0
    probe = None
    tolerances = {}
    if parser.has_section("verify"):
        for key in parser.options("verify"):
            if key.startswith("tol."):
                name = key[4:]
                if name not in DEFAULT_TOLERANCES:
                    fail("verify", key, f"unknown tolerance; known: {sorted(DEFAULT_TOLERANCES)}")
                tolerances[name] = get_float("verify", key, None)
            elif key not in _VERIFY_KEYS:
                fail("verify", key, "unknown key")
        samples = get_int("verify", "samples", 100, minimum=1)
        seed = get_int("verify", "seed", 0)
        coisotropy_points = get_int("verify", "coisotropy_points", 50, minimum=1)
        scan_steps = get_int("verify", "scan_steps", 200, minimum=1)
        scan_range = get_float("verify", "scan_range", 2.0)
        if scan_range <= 0:
            fail("verify", "scan_range", "must be positive")
        if parser.has_option("verify", "probe"):
            probe = parser.get("verify", "probe").strip()
            if probe not in PROBES:
                fail("verify", "probe", f"unknown probe; known: {list(PROBES)}")

    if probe == "non-closed":
        if m < 1 or r < 1:
            fail("verify", "probe", "non-closed probe needs m >= 1 and r >= 1")
        # z1 dx1^dy1 has d = dx1^dy1^dz1 with coefficient 1
        omega = omega + KForm(base, 2, {(base.index("x1"), base.index("y1")): base.var("z1")})

    model = PresymplecticModel(m, r, omega, require_closed=False)
    return Manifest(
        m=m, r=r, connection=connection, model=model,
        samples=samples or 100, seed=seed or 0,
        coisotropy_points=coisotropy_points or 50,
        scan_range=scan_range, scan_steps=scan_steps or 200,
        tolerances=tolerances, probe=probe, source=source,
    )


def load_manifest(path) -> Manifest:
    path = Path(path)
    text = path.read_text()
    return parse_manifest(text, source=str(path))
