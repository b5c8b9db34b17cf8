"""Run configuration: a strict JSON schema with materialized defaults.

Config files are flat JSON objects.  Shared keys: ``experiment`` (may be
omitted when the CLI subcommand supplies it), ``constants``, ``seed``.  The
remaining keys belong to the selected experiment; unknown keys are rejected
so typos fail loudly.  Flux values in configs are given in units of the flux
quantum 2 pi hbar c / |charge| of the relevant carrier.

Structural problems (bad JSON, wrong types, unknown keys) raise SchemaError
with line or key diagnostics; well-formed values that violate a documented
constraint raise RangeError naming the constraint.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

from .errors import RangeError, SchemaError
from .experiments import DoubleSlitGeometry, _validate_slit_spec
from .gauge_fields import FieldSpec, FluxLine, PhysConstants, spec_from_dict, spec_to_dict
from .schrodinger import Absorber

__all__ = [
    "EXPERIMENTS",
    "RunConfig",
    "DoubleSlitParams",
    "FluxQuantParams",
    "MonopoleParams",
    "GaugeCheckParams",
    "parse_config",
]

EXPERIMENTS = ("double-slit", "flux-quant", "monopole", "gauge-check")


class _Section:
    """Typed access to one JSON object; tracks consumed keys for strictness."""

    def __init__(self, data, where: str):
        if not isinstance(data, dict):
            raise SchemaError(f"{where or 'config'} must be a JSON object")
        self._data = data
        self._where = where
        self._seen = set()

    def _label(self, key: str) -> str:
        return f"{self._where}.{key}" if self._where else key

    def raw(self, key: str, default=None):
        self._seen.add(key)
        return self._data.get(key, default)

    def string(self, key: str, default: Optional[str]) -> Optional[str]:
        v = self.raw(key, default)
        if v is not None and not isinstance(v, str):
            raise SchemaError(f"{self._label(key)} must be a string")
        return v

    def number(self, key: str, default: float) -> float:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{self._label(key)} must be a number")
        if not math.isfinite(v):
            raise SchemaError(f"{self._label(key)} must be finite")
        return float(v)

    def integer(self, key: str, default: int) -> int:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{self._label(key)} must be an integer")
        return int(v)

    def numbers(self, key: str, default, *, length: Optional[int] = None) -> tuple:
        v = self.raw(key, default)
        if not isinstance(v, (list, tuple)) or any(
            isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x)
            for x in v
        ):
            raise SchemaError(f"{self._label(key)} must be a list of finite numbers")
        if length is not None and len(v) != length:
            raise SchemaError(f"{self._label(key)} must have exactly {length} entries")
        return tuple(float(x) for x in v)

    def integers(self, key: str, default, *, length: Optional[int] = None) -> tuple:
        v = self.raw(key, default)
        if not isinstance(v, (list, tuple)) or any(
            isinstance(x, bool) or not isinstance(x, int) for x in v
        ):
            raise SchemaError(f"{self._label(key)} must be a list of integers")
        if length is not None and len(v) != length:
            raise SchemaError(f"{self._label(key)} must have exactly {length} entries")
        return tuple(int(x) for x in v)

    def section(self, key: str) -> "_Section":
        v = self.raw(key, {})
        return _Section(v if v is not None else {}, self._label(key))

    def close(self) -> None:
        unknown = sorted(set(self._data) - self._seen)
        if unknown:
            allowed = ", ".join(sorted(self._seen))
            raise SchemaError(
                f'unknown key "{unknown[0]}" in {self._where or "config"} (known keys: {allowed})'
            )


def _positive(value: float, label: str) -> float:
    if not value > 0:
        raise RangeError(f"{label} must be positive")
    return value


@dataclass(frozen=True)
class DoubleSlitParams:
    geometry: DoubleSlitGeometry
    field: FieldSpec
    flux_quanta: tuple
    dt: float
    absorber: Absorber
    max_steps: int
    saturation_interval: int
    saturation_rtol: float

    def to_dict(self) -> dict:
        g = self.geometry
        return {
            "geometry": {
                "nx": g.nx,
                "ny": g.ny,
                "barrier_col": g.barrier_col,
                "barrier_thickness": g.barrier_thickness,
                "slit_centers": list(g.slit_centers),
                "slit_widths": [int(w) for w in g.slit_widths],
                "flux_center": list(g.flux_center),
                "detector_col": g.detector_col,
                "source_center": list(g.source_center),
                "source_sigma": g.source_sigma,
                "source_k": list(g.source_k),
            },
            "field": spec_to_dict(self.field),
            "flux_quanta": list(self.flux_quanta),
            "dt": self.dt,
            "absorber": {"width": self.absorber.width, "strength": self.absorber.strength},
            "max_steps": self.max_steps,
            "saturation": {"interval": self.saturation_interval, "rtol": self.saturation_rtol},
        }


@dataclass(frozen=True)
class FluxQuantParams:
    radius: float
    n_nodes: int
    q_pair: float
    applied_quanta: tuple

    def to_dict(self) -> dict:
        return {
            "ring": {"radius": self.radius, "n_nodes": self.n_nodes, "q_pair": self.q_pair},
            "applied_flux_quanta": list(self.applied_quanta),
        }


@dataclass(frozen=True)
class MonopoleParams:
    charges: tuple
    poles: tuple
    contour_radius: float
    contour_z: float
    contour_n: int

    def to_dict(self) -> dict:
        return {
            "charges": list(self.charges),
            "poles": list(self.poles),
            "contour": {"radius": self.contour_radius, "z": self.contour_z, "n": self.contour_n},
        }


@dataclass(frozen=True)
class GaugeCheckParams:
    chi_samples: int
    contour_samples: int
    path_samples: int

    def to_dict(self) -> dict:
        return {
            "samples": {
                "chi": self.chi_samples,
                "contours": self.contour_samples,
                "paths": self.path_samples,
            }
        }


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description with every default materialized."""

    experiment: str
    constants: PhysConstants
    seed: int
    params: object
    out_dir: Optional[str] = None
    threads: int = 1

    def to_dict(self) -> dict:
        c = self.constants
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "constants": {"hbar": c.hbar, "c": c.c, "mass": c.mass, "charge": c.charge},
            **self.params.to_dict(),
        }


def _parse_constants(sect: _Section) -> PhysConstants:
    hbar = _positive(sect.number("hbar", 1.0), "constants.hbar")
    c = _positive(sect.number("c", 1.0), "constants.c")
    mass = _positive(sect.number("mass", 1.0), "constants.mass")
    charge = sect.number("charge", -1.0)
    if charge == 0.0:
        raise RangeError("constants.charge must be nonzero")
    sect.close()
    return PhysConstants(hbar=hbar, c=c, mass=mass, charge=charge)


def _parse_double_slit(root: _Section, constants: PhysConstants) -> DoubleSlitParams:
    g = root.section("geometry")
    geometry = DoubleSlitGeometry(
        nx=g.integer("nx", 512),
        ny=g.integer("ny", 384),
        barrier_col=g.integer("barrier_col", 176),
        barrier_thickness=g.integer("barrier_thickness", 3),
        slit_centers=g.numbers("slit_centers", [166.5, 216.5], length=2),
        slit_widths=g.integers("slit_widths", [8, 8], length=2),
        flux_center=g.numbers("flux_center", [177.5, 191.5], length=2),
        detector_col=g.integer("detector_col", 460),
        source_center=g.numbers("source_center", [85.0, 192.0], length=2),
        source_sigma=g.number("source_sigma", 16.0),
        source_k=g.numbers("source_k", [1.0, 0.0], length=2),
    )
    g.close()

    raw_field = root.raw("field", None)
    if raw_field is None:
        field = FluxLine(center=tuple(geometry.flux_center), flux=0.0)
    else:
        if not isinstance(raw_field, dict):
            raise SchemaError("field must be a JSON object (a field-spec record)")
        try:
            field = spec_from_dict(raw_field)
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"field: {exc}") from exc
    try:
        _validate_slit_spec(geometry, field)
    except TypeError as exc:
        raise SchemaError(str(exc)) from exc

    flux_quanta = root.numbers("flux_quanta", [0.0, 0.25, 0.5, 0.75, 1.0])
    if not flux_quanta:
        raise RangeError("flux_quanta must list at least one value")
    dt = _positive(root.number("dt", 0.1), "dt")

    a = root.section("absorber")
    width = a.integer("width", 24)
    if width < 1:
        raise RangeError("absorber.width must be at least one cell")
    strength = _positive(a.number("strength", 0.05), "absorber.strength")
    a.close()

    max_steps = root.integer("max_steps", 9000)
    if max_steps < 1:
        raise RangeError("max_steps must be positive")
    s = root.section("saturation")
    interval = s.integer("interval", 100)
    if interval < 1:
        raise RangeError("saturation.interval must be positive")
    rtol = _positive(s.number("rtol", 1e-6), "saturation.rtol")
    s.close()

    return DoubleSlitParams(
        geometry=geometry,
        field=field,
        flux_quanta=flux_quanta,
        dt=dt,
        absorber=Absorber(width, strength),
        max_steps=max_steps,
        saturation_interval=interval,
        saturation_rtol=rtol,
    )


def _parse_flux_quant(root: _Section, constants: PhysConstants) -> FluxQuantParams:
    ring = root.section("ring")
    radius = _positive(ring.number("radius", 5.0), "ring.radius")
    n_nodes = ring.integer("n_nodes", 256)
    if n_nodes < 64:
        raise RangeError("ring.n_nodes must be at least 64")
    q_pair = ring.number("q_pair", -2.0)
    if q_pair == 0.0:
        raise RangeError("ring.q_pair must be nonzero")
    ring.close()
    applied = root.numbers("applied_flux_quanta", [0.0, 0.5, 1.0, 1.4, 2.0, 2.4])
    if not applied:
        raise RangeError("applied_flux_quanta must list at least one value")
    return FluxQuantParams(radius=radius, n_nodes=n_nodes, q_pair=q_pair, applied_quanta=applied)


def _parse_monopole(root: _Section, constants: PhysConstants) -> MonopoleParams:
    charges = root.numbers("charges", [0.5 * i for i in range(1, 21)])
    poles = root.numbers("poles", [0.5 * j for j in range(1, 21)])
    if not charges or not poles:
        raise RangeError("charges and poles must each list at least one value")
    if any(q == 0.0 for q in charges):
        raise RangeError("charges must be nonzero")
    c = root.section("contour")
    radius = _positive(c.number("radius", 1.0), "contour.radius")
    z = c.number("z", -1000.0)
    if abs(z) < 10.0 * radius:
        raise RangeError("contour must sit far from the monopole: |z| >= 10 * radius")
    n = c.integer("n", 256)
    if n < 16:
        raise RangeError("contour.n must be at least 16")
    c.close()
    return MonopoleParams(charges=charges, poles=poles, contour_radius=radius, contour_z=z, contour_n=n)


def _parse_gauge_check(root: _Section, constants: PhysConstants) -> GaugeCheckParams:
    s = root.section("samples")
    chi = s.integer("chi", 5)
    contours = s.integer("contours", 200)
    paths = s.integer("paths", 50)
    s.close()
    for label, v in (("samples.chi", chi), ("samples.contours", contours), ("samples.paths", paths)):
        if v < 1:
            raise RangeError(f"{label} must be at least 1")
    return GaugeCheckParams(chi_samples=chi, contour_samples=contours, path_samples=paths)


_PARSERS = {
    "double-slit": _parse_double_slit,
    "flux-quant": _parse_flux_quant,
    "monopole": _parse_monopole,
    "gauge-check": _parse_gauge_check,
}


def parse_config(text: str, *, experiment: Optional[str] = None) -> RunConfig:
    """Parse and validate a JSON config, materializing every default.

    ``experiment`` (usually the CLI subcommand) fills in a missing
    ``experiment`` key and must agree with it when both are present.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"config is not valid JSON: line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    root = _Section(data, "")

    named = root.string("experiment", None)
    chosen = named if named is not None else experiment
    if chosen is None:
        raise SchemaError('missing "experiment" key (or pass an experiment subcommand)')
    if chosen not in EXPERIMENTS:
        raise SchemaError(f'unknown experiment "{chosen}"; expected one of {", ".join(EXPERIMENTS)}')
    if named is not None and experiment is not None and named != experiment:
        raise SchemaError(
            f'config says experiment "{named}" but the "{experiment}" subcommand was invoked'
        )

    constants = _parse_constants(root.section("constants"))
    seed = root.integer("seed", 0)
    if seed < 0:
        raise RangeError("seed must be non-negative")
    params = _PARSERS[chosen](root, constants)
    root.close()
    return RunConfig(experiment=chosen, constants=constants, seed=seed, params=params)
