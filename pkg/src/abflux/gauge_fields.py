"""Analytic electromagnetic potentials and gauge transformations.

Conventions
-----------
Gaussian units throughout.  The charge-field coupling that appears in every
phase in this package is ``q / (hbar * c)``; it is exposed as
:attr:`PhysConstants.coupling` so the factor is written once.

Points are accepted as arrays of shape ``(..., 2)`` or ``(..., 3)``; planar
points are promoted to 3D with ``z = 0``.  Vector results always have shape
``(..., 3)``.

Every specification knows its own singular set through
``singular_distance``; the module-level evaluation helpers refuse to sample
closer than ``eps`` (default :data:`EPS_STRING`) to it and raise
:class:`~abflux.errors.SingularPoint` instead of returning infinities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import SingularPoint

__all__ = [
    "EPS_STRING",
    "PhysConstants",
    "FieldSpec",
    "FluxLine",
    "FiniteSolenoid",
    "UniformB",
    "MonopoleStringSouth",
    "MonopoleStringNorth",
    "GaugeShifted",
    "GaugeFunction",
    "EMSample",
    "polynomial_gauge",
    "eval_vector_potential",
    "eval_magnetic_field",
    "numeric_curl",
    "derive_fields",
    "gauge_transform_potentials",
    "spec_to_dict",
    "spec_from_dict",
]

# Exclusion distance around string/filament singularities, in grid units.
EPS_STRING = 1e-9

TWO_PI = 2.0 * np.pi


def _as_points(r) -> np.ndarray:
    """Return ``r`` as a float array of shape ``(..., 3)``.

    Planar input ``(..., 2)`` is padded with ``z = 0``.
    """
    p = np.asarray(r, dtype=float)
    if p.ndim == 0 or p.shape[-1] not in (2, 3):
        raise ValueError(f"points must have 2 or 3 components, got shape {p.shape}")
    if p.shape[-1] == 2:
        p = np.concatenate([p, np.zeros(p.shape[:-1] + (1,))], axis=-1)
    return p


@dataclass(frozen=True)
class PhysConstants:
    """Physical constants of a run.

    ``hbar``, ``c`` and ``mass`` must be positive; ``charge`` is signed and
    defaults to -1 (an electron-like particle in natural units).
    """

    hbar: float = 1.0
    c: float = 1.0
    mass: float = 1.0
    charge: float = -1.0

    def __post_init__(self):
        for name in ("hbar", "c", "mass"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not np.isfinite(self.charge):
            raise ValueError("charge must be finite")

    @property
    def coupling(self) -> float:
        """The phase prefactor q / (hbar c)."""
        return self.charge / (self.hbar * self.c)

    @property
    def flux_quantum(self) -> float:
        """Flux periodicity 2 pi hbar c / |q| for this carrier."""
        if self.charge == 0.0:
            raise ValueError("flux quantum undefined for zero charge")
        return TWO_PI * self.hbar * self.c / abs(self.charge)


class FieldSpec:
    """Base class for analytic electromagnetic potential specifications.

    Subclasses implement ``vector_potential(p, t)``, ``magnetic_field(p)``,
    ``scalar_potential(p, t, c)`` and ``singular_distance(p)`` on promoted
    point arrays of shape ``(..., 3)``, vectorized over leading axes.
    """

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def magnetic_field(self, r) -> np.ndarray:
        raise NotImplementedError

    def scalar_potential(self, r, t: float = 0.0, c: float = 1.0) -> np.ndarray:
        p = _as_points(r)
        return np.zeros(p.shape[:-1])

    def singular_distance(self, r) -> np.ndarray:
        """Distance from each point to the spec's singular set (inf if none)."""
        p = _as_points(r)
        return np.full(p.shape[:-1], np.inf)


def _azimuthal(pref, dx_, dy_):
    """Assemble ``pref * (-dy, dx, 0)``, the azimuthal unit direction times rho."""
    out = np.stack([-pref * dy_, pref * dx_, np.zeros_like(dx_)], axis=-1)
    return out


@dataclass(frozen=True)
class FluxLine(FieldSpec):
    """Idealized flux filament along z through ``center``.

    A = flux / (2 pi rho) in the azimuthal direction; the magnetic field is
    confined to the excluded filament itself, so ``magnetic_field`` is zero
    everywhere it may legally be sampled.
    """

    center: tuple[float, float] = (0.0, 0.0)
    flux: float = 0.0

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        dx_ = p[..., 0] - self.center[0]
        dy_ = p[..., 1] - self.center[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            pref = self.flux / (TWO_PI * (dx_ * dx_ + dy_ * dy_))
        return _azimuthal(pref, dx_, dy_)

    def magnetic_field(self, r) -> np.ndarray:
        p = _as_points(r)
        return np.zeros(p.shape)

    def singular_distance(self, r) -> np.ndarray:
        p = _as_points(r)
        return np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])


@dataclass(frozen=True)
class FiniteSolenoid(FieldSpec):
    """Solenoid of radius ``radius`` along z through ``center``, total flux ``flux``.

    Interior: A = flux * rho / (2 pi radius^2), uniform B = flux / (pi radius^2).
    Exterior: identical to :class:`FluxLine`.  A is continuous at the shell.
    """

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    flux: float = 0.0

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        dx_ = p[..., 0] - self.center[0]
        dy_ = p[..., 1] - self.center[1]
        rho2 = dx_ * dx_ + dy_ * dy_
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(rho2 <= self.radius**2, 1.0 / self.radius**2, 1.0 / rho2)
        pref = self.flux / TWO_PI * inv
        return _azimuthal(pref, dx_, dy_)

    def magnetic_field(self, r) -> np.ndarray:
        p = _as_points(r)
        dx_ = p[..., 0] - self.center[0]
        dy_ = p[..., 1] - self.center[1]
        inside = dx_ * dx_ + dy_ * dy_ < self.radius**2
        bz = np.where(inside, self.flux / (np.pi * self.radius**2), 0.0)
        out = np.zeros(p.shape)
        out[..., 2] = bz
        return out


@dataclass(frozen=True)
class UniformB(FieldSpec):
    """Uniform field B = b0 in z, in the symmetric gauge A = B x r / 2."""

    b0: float = 0.0

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        return _azimuthal(0.5 * self.b0, p[..., 0], p[..., 1])

    def magnetic_field(self, r) -> np.ndarray:
        p = _as_points(r)
        out = np.zeros(p.shape)
        out[..., 2] = self.b0
        return out


def _monopole_b(g: float, p: np.ndarray) -> np.ndarray:
    r2 = np.sum(p * p, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pref = g / (r2 * np.sqrt(r2))
    return pref[..., None] * p


@dataclass(frozen=True)
class MonopoleStringSouth(FieldSpec):
    """Monopole of charge ``g`` at the origin, gauge string along the -z half-axis.

    A has only an azimuthal component, g (1 - cos theta) / (r sin theta),
    regular everywhere except the lower half-axis.
    """

    g: float = 1.0

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho2 = x * x + y * y
        rr = np.sqrt(rho2 + z * z)
        with np.errstate(divide="ignore", invalid="ignore"):
            pref = self.g * (rr - z) / (rr * rho2)
        return _azimuthal(pref, x, y)

    def magnetic_field(self, r) -> np.ndarray:
        return _monopole_b(self.g, _as_points(r))

    def singular_distance(self, r) -> np.ndarray:
        p = _as_points(r)
        rho = np.hypot(p[..., 0], p[..., 1])
        rr = np.sqrt(rho * rho + p[..., 2] ** 2)
        return np.where(p[..., 2] <= 0.0, rho, rr)


@dataclass(frozen=True)
class MonopoleStringNorth(FieldSpec):
    """Monopole of charge ``g`` at the origin, gauge string along the +z half-axis.

    A has only an azimuthal component, -g (1 + cos theta) / (r sin theta),
    regular everywhere except the upper half-axis.
    """

    g: float = 1.0

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        rho2 = x * x + y * y
        rr = np.sqrt(rho2 + z * z)
        with np.errstate(divide="ignore", invalid="ignore"):
            pref = -self.g * (rr + z) / (rr * rho2)
        return _azimuthal(pref, x, y)

    def magnetic_field(self, r) -> np.ndarray:
        return _monopole_b(self.g, _as_points(r))

    def singular_distance(self, r) -> np.ndarray:
        p = _as_points(r)
        rho = np.hypot(p[..., 0], p[..., 1])
        rr = np.sqrt(rho * rho + p[..., 2] ** 2)
        return np.where(p[..., 2] >= 0.0, rho, rr)


@dataclass(frozen=True)
class GaugeFunction:
    """A gauge function chi with analytic derivatives.

    ``value``, ``gradient`` and ``time_derivative`` are callables taking a
    promoted point array of shape ``(..., 3)`` and a scalar time.  ``value``
    and ``time_derivative`` return shape ``(...)``, ``gradient`` returns
    ``(..., 3)``.  ``time_derivative`` may be None for static gauges.
    ``poly`` carries serializable monomial coefficients when the gauge was
    built by :func:`polynomial_gauge`.
    """

    value: Callable[[np.ndarray, float], np.ndarray]
    gradient: Callable[[np.ndarray, float], np.ndarray]
    time_derivative: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    poly: Optional[tuple] = None

    def __call__(self, r, t: float = 0.0) -> np.ndarray:
        return self.value(_as_points(r), t)

    def grad(self, r, t: float = 0.0) -> np.ndarray:
        return self.gradient(_as_points(r), t)

    def dt(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        if self.time_derivative is None:
            return np.zeros(p.shape[:-1])
        return self.time_derivative(p, t)

    def check_gradient(self, points, t: float = 0.0, h: float = 1e-5, tol: float = 1e-6) -> float:
        """Cross-check the analytic gradient against centered differences.

        Returns the maximum absolute deviation; raises ValueError above ``tol``.
        """
        p = _as_points(points)
        fd = np.empty(p.shape)
        for ax in range(3):
            q_plus = p.copy()
            q_minus = p.copy()
            q_plus[..., ax] += h
            q_minus[..., ax] -= h
            fd[..., ax] = (self.value(q_plus, t) - self.value(q_minus, t)) / (2.0 * h)
        dev = float(np.max(np.abs(fd - self.gradient(p, t))))
        if dev > tol:
            raise ValueError(f"analytic gradient deviates from finite differences by {dev:.3e}")
        return dev


def polynomial_gauge(coeffs) -> GaugeFunction:
    """Build a gauge function chi = sum c * x**i * y**j * t**k.

    ``coeffs`` maps exponent triples ``(i, j, k)`` to coefficients.  The
    gradient and time derivative are exact, which keeps lattice gauge checks
    at roundoff level.
    """
    terms = tuple(
        (int(i), int(j), int(k), float(c)) for (i, j, k), c in sorted(coeffs.items())
    )
    for i, j, k, _ in terms:
        if min(i, j, k) < 0:
            raise ValueError("polynomial exponents must be non-negative")

    def value(p, t=0.0):
        x, y = p[..., 0], p[..., 1]
        out = np.zeros(p.shape[:-1])
        for i, j, k, c in terms:
            out += c * x**i * y**j * t**k
        return out

    def gradient(p, t=0.0):
        x, y = p[..., 0], p[..., 1]
        out = np.zeros(p.shape)
        for i, j, k, c in terms:
            if i > 0:
                out[..., 0] += i * c * x ** (i - 1) * y**j * t**k
            if j > 0:
                out[..., 1] += j * c * x**i * y ** (j - 1) * t**k
        return out

    def time_derivative(p, t=0.0):
        x, y = p[..., 0], p[..., 1]
        out = np.zeros(p.shape[:-1])
        for i, j, k, c in terms:
            if k > 0:
                out += k * c * x**i * y**j * t ** (k - 1)
        return out

    return GaugeFunction(value, gradient, time_derivative, poly=terms)


@dataclass(frozen=True)
class GaugeShifted(FieldSpec):
    """``base`` seen in a different gauge: A' = A + grad chi, phi' = phi - (1/c) dchi/dt.

    E and B are unchanged by construction; the wavefunction picks up the
    matching factor exp(i q chi / hbar c) (see the lattice module).
    """

    base: FieldSpec
    chi: GaugeFunction

    def vector_potential(self, r, t: float = 0.0) -> np.ndarray:
        p = _as_points(r)
        return self.base.vector_potential(p, t) + self.chi.gradient(p, t)

    def magnetic_field(self, r) -> np.ndarray:
        return self.base.magnetic_field(r)

    def scalar_potential(self, r, t: float = 0.0, c: float = 1.0) -> np.ndarray:
        p = _as_points(r)
        return self.base.scalar_potential(p, t, c) - self.chi.dt(p, t) / c

    def singular_distance(self, r) -> np.ndarray:
        return self.base.singular_distance(r)


def gauge_transform_potentials(spec: FieldSpec, chi: GaugeFunction, *, check_points=None, t: float = 0.0) -> GaugeShifted:
    """Wrap ``spec`` in the gauge defined by ``chi``.

    If ``check_points`` is given, the analytic gradient of ``chi`` is verified
    against finite differences there first (tolerance 1e-6).
    """
    if check_points is not None:
        chi.check_gradient(check_points, t=t)
    return GaugeShifted(spec, chi)


@dataclass(frozen=True)
class EMSample:
    """Fields and potentials evaluated at one set of points."""

    E: np.ndarray
    B: np.ndarray
    A: np.ndarray
    phi: np.ndarray


def _check_singular(spec: FieldSpec, p: np.ndarray, eps: float) -> None:
    d = spec.singular_distance(p)
    dmin = float(np.min(d)) if np.size(d) else np.inf
    if dmin < eps:
        raise SingularPoint(
            f"evaluation point within {dmin:.3e} of the singular set of {type(spec).__name__} (eps={eps:.1e})"
        )


def eval_vector_potential(spec: FieldSpec, r, t: float = 0.0, *, eps: float = EPS_STRING) -> np.ndarray:
    """Sample A(r, t), refusing points within ``eps`` of the singular set."""
    p = _as_points(r)
    _check_singular(spec, p, eps)
    return spec.vector_potential(p, t)


def eval_magnetic_field(spec: FieldSpec, r, *, eps: float = EPS_STRING) -> np.ndarray:
    """Sample B(r), refusing points within ``eps`` of the singular set."""
    p = _as_points(r)
    _check_singular(spec, p, eps)
    return spec.magnetic_field(p)


def numeric_curl(sampler: Callable[[np.ndarray], np.ndarray], r, h: float = 1e-4) -> np.ndarray:
    """Centered-difference curl of a vector sampler.

    ``sampler`` takes promoted points ``(..., 3)`` and returns ``(..., 3)``;
    six displaced evaluations per point.
    """
    p = _as_points(r)
    d = []
    for ax in range(3):
        q_plus = p.copy()
        q_minus = p.copy()
        q_plus[..., ax] += h
        q_minus[..., ax] -= h
        d.append((np.asarray(sampler(q_plus)) - np.asarray(sampler(q_minus))) / (2.0 * h))
    return np.stack(
        [
            d[1][..., 2] - d[2][..., 1],
            d[2][..., 0] - d[0][..., 2],
            d[0][..., 1] - d[1][..., 0],
        ],
        axis=-1,
    )


def derive_fields(
    spec: FieldSpec,
    r,
    t: float = 0.0,
    constants: Optional[PhysConstants] = None,
    *,
    h: float = 1e-4,
    eps: float = EPS_STRING,
) -> EMSample:
    """Evaluate E, B, A and phi at ``r``.

    E = -grad phi - (1/c) dA/dt with the gradient by centered differences and
    the time derivative by a centered difference of the analytic A(t); both
    are exact for the supported specs (static, or gauge shifts linear in t).
    """
    constants = constants or PhysConstants()
    p = _as_points(r)
    _check_singular(spec, p, eps)
    c = constants.c

    A = spec.vector_potential(p, t)
    B = spec.magnetic_field(p)
    phi = spec.scalar_potential(p, t, c)

    grad_phi = np.empty(p.shape)
    for ax in range(3):
        q_plus = p.copy()
        q_minus = p.copy()
        q_plus[..., ax] += h
        q_minus[..., ax] -= h
        grad_phi[..., ax] = (
            spec.scalar_potential(q_plus, t, c) - spec.scalar_potential(q_minus, t, c)
        ) / (2.0 * h)

    dA_dt = (spec.vector_potential(p, t + h) - spec.vector_potential(p, t - h)) / (2.0 * h)
    E = -grad_phi - dA_dt / c
    return EMSample(E=E, B=B, A=A, phi=phi)


# serialization for run configs


def spec_to_dict(spec: FieldSpec) -> dict:
    """Serialize a spec to a plain dict (inverse of :func:`spec_from_dict`).

    Gauge shifts are only serializable when chi was built by
    :func:`polynomial_gauge`.
    """
    if isinstance(spec, FluxLine):
        return {"kind": "flux_line", "center": list(spec.center), "flux": spec.flux}
    if isinstance(spec, FiniteSolenoid):
        return {
            "kind": "solenoid",
            "center": list(spec.center),
            "radius": spec.radius,
            "flux": spec.flux,
        }
    if isinstance(spec, UniformB):
        return {"kind": "uniform_b", "b0": spec.b0}
    if isinstance(spec, MonopoleStringSouth):
        return {"kind": "monopole_string_south", "g": spec.g}
    if isinstance(spec, MonopoleStringNorth):
        return {"kind": "monopole_string_north", "g": spec.g}
    if isinstance(spec, GaugeShifted):
        if spec.chi.poly is None:
            raise ValueError("only polynomial gauge functions are serializable")
        return {
            "kind": "gauge_shifted",
            "base": spec_to_dict(spec.base),
            "chi_poly": [[i, j, k, c] for i, j, k, c in spec.chi.poly],
        }
    raise ValueError(f"cannot serialize spec of type {type(spec).__name__}")


def spec_from_dict(d: dict) -> FieldSpec:
    """Build a spec from its dict form.  Raises ValueError on unknown kinds."""
    kind = d.get("kind")
    if kind == "flux_line":
        return FluxLine(center=tuple(d.get("center", (0.0, 0.0))), flux=float(d.get("flux", 0.0)))
    if kind == "solenoid":
        return FiniteSolenoid(
            center=tuple(d.get("center", (0.0, 0.0))),
            radius=float(d.get("radius", 1.0)),
            flux=float(d.get("flux", 0.0)),
        )
    if kind == "uniform_b":
        return UniformB(b0=float(d.get("b0", 0.0)))
    if kind == "monopole_string_south":
        return MonopoleStringSouth(g=float(d.get("g", 1.0)))
    if kind == "monopole_string_north":
        return MonopoleStringNorth(g=float(d.get("g", 1.0)))
    if kind == "gauge_shifted":
        coeffs = {(i, j, k): c for i, j, k, c in d["chi_poly"]}
        return GaugeShifted(spec_from_dict(d["base"]), polynomial_gauge(coeffs))
    raise ValueError(f"unknown field spec kind: {kind!r}")


def with_flux(spec: FieldSpec, flux: float) -> FieldSpec:
    """Return a copy of ``spec`` carrying ``flux``, descending through gauge shifts."""
    if isinstance(spec, (FluxLine, FiniteSolenoid)):
        return replace(spec, flux=flux)
    if isinstance(spec, GaugeShifted):
        return GaugeShifted(with_flux(spec.base, flux), spec.chi)
    raise TypeError(f"{type(spec).__name__} does not carry a sweepable flux")
