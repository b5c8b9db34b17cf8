"""Line integrals, loop phases, winding numbers and enclosed flux.

Paths are polylines.  All quadrature here is deterministic: fixed-order
Gauss-Legendre panels per segment with recursive bisection until successive
estimates agree to tolerance (or the depth cap trips
:class:`~abflux.errors.NoConvergence`).

``line_integral`` and ``enclosed_flux_stokes`` accept either a
:class:`~abflux.gauge_fields.FieldSpec` or a bare callable.  Given a spec they can
also account for flux that quadrature cannot see: the idealized filament of
:class:`~abflux.gauge_fields.FluxLine` carries all of its flux in the single
excluded point, so its contribution enters analytically as
``flux * winding_number(contour, center)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import NoConvergence, NonPlanarContour, PointOnContour, SingularPoint
from .gauge_fields import (
    EPS_STRING,
    FieldSpec,
    FiniteSolenoid,
    FluxLine,
    GaugeShifted,
    MonopoleStringNorth,
    MonopoleStringSouth,
    PhysConstants,
    _as_points,
)

__all__ = [
    "Path",
    "QuadratureSpec",
    "DEFAULT_QUADRATURE",
    "line_integral",
    "ab_phase",
    "winding_number",
    "enclosed_flux_stokes",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Path:
    """A polyline through 2D or 3D space.

    ``closed`` paths close themselves implicitly; do not repeat the first
    vertex at the end.  Consecutive duplicate vertices are rejected because
    they produce zero-length segments.
    """

    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] not in (2, 3):
            raise ValueError(f"vertices must have shape (n, 2) or (n, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        n = v.shape[0]
        if n < 2:
            raise ValueError("a path needs at least two vertices")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg == 0.0):
            raise ValueError("consecutive duplicate vertices are not allowed")
        if self.closed:
            if n < 3:
                raise ValueError("a closed path needs at least three vertices")
            if np.linalg.norm(v[0] - v[-1]) == 0.0:
                raise ValueError("closed paths must not repeat the first vertex")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def points3(self) -> np.ndarray:
        """Vertices promoted to shape (n, 3)."""
        return _as_points(self.vertices)

    def segments(self) -> np.ndarray:
        """Segment endpoint pairs, shape (nseg, 2, 3), closing segment included."""
        p = self.points3()
        if self.closed:
            p = np.vstack([p, p[:1]])
        return np.stack([p[:-1], p[1:]], axis=1)

    @classmethod
    def circle(cls, center=(0.0, 0.0), radius: float = 1.0, n: int = 64, z: Optional[float] = None, ccw: bool = True) -> "Path":
        """Regular n-gon inscribed in a circle; 3D when ``z`` is given."""
        if n < 3:
            raise ValueError("need at least three vertices for a circle")
        ang = np.linspace(0.0, TWO_PI, n, endpoint=False)
        if not ccw:
            ang = -ang
        x = center[0] + radius * np.cos(ang)
        y = center[1] + radius * np.sin(ang)
        if z is None:
            verts = np.column_stack([x, y])
        else:
            verts = np.column_stack([x, y, np.full(n, float(z))])
        return cls(verts, closed=True)


@dataclass(frozen=True)
class QuadratureSpec:
    """Controls for segment quadrature.

    ``samples_per_segment`` is the panel order; ``tolerance`` bounds the whole
    path (split evenly across segments); refinement bisects a segment until
    successive estimates agree or ``max_depth`` levels are exhausted.
    """

    rule: str = "gauss-legendre"
    samples_per_segment: int = 8
    tolerance: float = 1e-10
    max_depth: int = 12

    def __post_init__(self):
        if self.rule not in ("gauss-legendre", "midpoint"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.samples_per_segment < 2 and self.rule == "gauss-legendre":
            raise ValueError("gauss-legendre needs at least 2 samples per segment")
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be positive")
        if not self.tolerance > 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")

    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and weights on the unit interval."""
        if self.rule == "midpoint":
            return np.array([0.5]), np.array([1.0])
        x, w = np.polynomial.legendre.leggauss(self.samples_per_segment)
        return 0.5 * (x + 1.0), 0.5 * w


DEFAULT_QUADRATURE = QuadratureSpec()


def _resolve_vector_sampler(field, t: float):
    """Split a FieldSpec-or-callable into (sampler, spec-or-None)."""
    if isinstance(field, FieldSpec):
        return (lambda p: field.vector_potential(p, t)), field
    if callable(field):
        return field, None
    raise TypeError("expected a FieldSpec or a callable sampler")


def _segment_point_distance_2d(a: np.ndarray, b: np.ndarray, point) -> float:
    """Distance in the xy-plane from segment ab to a point."""
    a2, b2 = a[:2], np.asarray(b[:2])
    p2 = np.asarray(point, dtype=float)[:2]
    d = b2 - a2
    L2 = float(d @ d)
    if L2 == 0.0:
        return float(np.linalg.norm(p2 - a2))
    s = float(np.clip((p2 - a2) @ d / L2, 0.0, 1.0))
    return float(np.linalg.norm(a2 + s * d - p2))


def _filament_centers(spec) -> list:
    """In-plane filament positions whose crossing must be excluded exactly."""
    if isinstance(spec, FluxLine):
        return [spec.center]
    if isinstance(spec, GaugeShifted):
        return _filament_centers(spec.base)
    return []


def _segment_integral(sampler, a, b, nodes, weights) -> float:
    pts = a[None, :] + nodes[:, None] * (b - a)[None, :]
    vals = np.asarray(sampler(pts))
    return float(weights @ (vals @ (b - a)))


def _adaptive_segment(sampler, a, b, nodes, weights, tol, depth, spec, eps, seg_index):
    coarse = _segment_integral(sampler, a, b, nodes, weights)
    mid = 0.5 * (a + b)
    fine = _segment_integral(sampler, a, mid, nodes, weights) + _segment_integral(
        sampler, mid, b, nodes, weights
    )
    if abs(fine - coarse) <= tol:
        return fine
    if depth <= 0:
        raise NoConvergence(
            f"segment {seg_index}: estimates differ by {abs(fine - coarse):.3e} (> {tol:.3e}) at the depth cap"
        )
    left = _adaptive_segment(sampler, a, mid, nodes, weights, 0.5 * tol, depth - 1, spec, eps, seg_index)
    right = _adaptive_segment(sampler, mid, b, nodes, weights, 0.5 * tol, depth - 1, spec, eps, seg_index)
    return left + right


def line_integral(
    field: Union[FieldSpec, Callable],
    path: Path,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    t: float = 0.0,
    eps: float = EPS_STRING,
) -> float:
    """Integral of A . dl along ``path`` (closing segment included when closed).

    Raises SingularPoint if the path passes within ``eps`` of the field's
    singular set and NoConvergence if refinement stalls.
    """
    sampler, spec = _resolve_vector_sampler(field, t)
    segs = path.segments()
    nodes, weights = quad.nodes_weights()
    nseg = len(segs)
    tol_per_seg = quad.tolerance / nseg

    if spec is not None:
        # sampled-node exclusion check, plus exact segment distance for filaments
        all_pts = segs[:, 0, None, :] + nodes[None, :, None] * (segs[:, 1] - segs[:, 0])[:, None, :]
        d = spec.singular_distance(all_pts.reshape(-1, 3))
        dmin = float(np.min(d))
        if dmin < eps:
            raise SingularPoint(f"path samples within {dmin:.3e} of a singular point (eps={eps:.1e})")
        for center in _filament_centers(spec):
            for k, (a, b) in enumerate(segs):
                if _segment_point_distance_2d(a, b, center) < eps:
                    raise SingularPoint(f"segment {k} passes within eps={eps:.1e} of the flux filament")

    total = 0.0
    for k, (a, b) in enumerate(segs):
        total += _adaptive_segment(sampler, a, b, nodes, weights, tol_per_seg, quad.max_depth, spec, eps, k)
    return total


def ab_phase(
    constants: PhysConstants,
    field: Union[FieldSpec, Callable],
    path: Path,
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    *,
    t: float = 0.0,
    eps: float = EPS_STRING,
) -> float:
    """Accumulated phase (q / hbar c) * integral of A . dl, not reduced mod 2 pi."""
    return constants.coupling * line_integral(field, path, quad, t=t, eps=eps)


def winding_number(contour: Path, point, *, tol: float = 1e-9) -> int:
    """Signed number of times a closed planar contour winds around ``point``.

    Computed from nearest-neighbor angle increments re-wrapped to (-pi, pi].
    Raises PointOnContour when ``point`` sits within ``tol`` of the contour.
    """
    if not contour.closed:
        raise ValueError("winding number needs a closed contour")
    v = contour.points3()
    p = _as_points(np.asarray(point, dtype=float))
    segs = contour.segments()
    dmin = min(_segment_point_distance_2d(a, b, p[:2]) for a, b in segs)
    if dmin < tol:
        raise PointOnContour(f"point lies within {dmin:.3e} of the contour (tol={tol:.1e})")

    z = (v[:, 0] - p[0]) + 1j * (v[:, 1] - p[1])
    z = np.append(z, z[0])
    increments = np.angle(z[1:] * np.conj(z[:-1]))
    total = float(np.sum(increments))
    w = int(np.round(total / TWO_PI))
    if abs(total / TWO_PI - w) > 1e-6:
        raise PointOnContour(f"winding sum {total / TWO_PI:.6f} is not close to an integer")
    return w


def _signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# degree-5 symmetric triangle rule (7 points, barycentric)
_SQ15 = np.sqrt(15.0)
_TRI_A = (6.0 - _SQ15) / 21.0
_TRI_B = (6.0 + _SQ15) / 21.0
_TRI_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_TRI_A, _TRI_A, 1 - 2 * _TRI_A],
        [_TRI_A, 1 - 2 * _TRI_A, _TRI_A],
        [1 - 2 * _TRI_A, _TRI_A, _TRI_A],
        [_TRI_B, _TRI_B, 1 - 2 * _TRI_B],
        [_TRI_B, 1 - 2 * _TRI_B, _TRI_B],
        [1 - 2 * _TRI_B, _TRI_B, _TRI_B],
    ]
)
_TRI_W = np.array(
    [
        9.0 / 40.0,
        (155.0 - _SQ15) / 1200.0,
        (155.0 - _SQ15) / 1200.0,
        (155.0 - _SQ15) / 1200.0,
        (155.0 + _SQ15) / 1200.0,
        (155.0 + _SQ15) / 1200.0,
        (155.0 + _SQ15) / 1200.0,
    ]
)


def _subdivide(tris: np.ndarray) -> np.ndarray:
    """Split each triangle (n, 3, 2) into its four midpoint triangles."""
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )


def _planar_quadrature(bz_sampler, xy: np.ndarray, z0: float, levels: int) -> float:
    """Integrate a z-directed field over the chain spanned by a closed polygon.

    Fan triangles from the first vertex carry signed areas, so interior points
    are weighted by the contour's winding number about them.
    """
    n = len(xy)
    if n < 3:
        return 0.0
    tris = np.stack(
        [np.broadcast_to(xy[0], (n - 2, 2)), xy[1:-1], xy[2:]], axis=1
    ).astype(float)
    for _ in range(levels):
        tris = _subdivide(tris)
    # signed area of each triangle keeps orientation and multiplicity
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts2 = np.einsum("kb,nbd->nkd", _TRI_BARY, tris)
    pts3 = np.concatenate([pts2, np.full(pts2.shape[:-1] + (1,), z0)], axis=-1)
    vals = np.asarray(bz_sampler(pts3.reshape(-1, 3))).reshape(pts2.shape[:2])
    return float(np.sum(areas * (vals @ _TRI_W)))


def _cap_geometry(v: np.ndarray) -> Optional[tuple[float, float]]:
    """Detect a constant-colatitude circle on an origin-centered sphere.

    Returns (R, theta0) or None.
    """
    r = np.linalg.norm(v, axis=1)
    R = float(np.mean(r))
    if R == 0.0 or np.max(np.abs(r - R)) > 1e-9 * R:
        return None
    z = v[:, 2]
    z0 = float(np.mean(z))
    if np.max(np.abs(z - z0)) > 1e-9 * R:
        return None
    theta0 = float(np.arccos(np.clip(z0 / R, -1.0, 1.0)))
    if theta0 <= 0.0:
        return None
    return R, theta0


def _cap_quadrature(b_sampler, R: float, theta0: float, resolution: int) -> float:
    """Outward flux of a sampled field through the polar cap theta in [0, theta0]."""
    ntheta = 24 * (resolution + 1)
    nphi = 2 * ntheta
    xg, wg = np.polynomial.legendre.leggauss(ntheta)
    theta = 0.5 * theta0 * (xg + 1.0)
    wtheta = 0.5 * theta0 * wg
    phi = np.linspace(0.0, TWO_PI, nphi, endpoint=False)
    st, ct = np.sin(theta), np.cos(theta)
    nx = st[:, None] * np.cos(phi)[None, :]
    ny = st[:, None] * np.sin(phi)[None, :]
    nz = np.broadcast_to(ct[:, None], nx.shape)
    normals = np.stack([nx, ny, nz], axis=-1)
    pts = R * normals
    vals = np.asarray(b_sampler(pts.reshape(-1, 3))).reshape(pts.shape)
    radial = np.sum(vals * normals, axis=-1)
    return float(R * R * (TWO_PI / nphi) * np.sum(wtheta[:, None] * st[:, None] * radial))


def _spec_planar_flux(spec: FieldSpec, contour: Path, xy: np.ndarray, z0: float, levels: int):
    """Analytic accounting for specs whose field quadrature cannot resolve."""
    if isinstance(spec, GaugeShifted):
        return _spec_planar_flux(spec.base, contour, xy, z0, levels)
    if isinstance(spec, (MonopoleStringSouth, MonopoleStringNorth)):
        raise NonPlanarContour("monopole flux needs a spherical-cap contour")
    if isinstance(spec, FluxLine):
        return spec.flux * winding_number(contour, spec.center)
    if isinstance(spec, FiniteSolenoid):
        c = np.asarray(spec.center, dtype=float)
        seg_d = [
            _segment_point_distance_2d(np.append(a, 0.0), np.append(b, 0.0), c)
            for a, b in zip(xy, np.roll(xy, -1, axis=0))
        ]
        if min(seg_d) >= spec.radius:
            # contour never enters the core, so the enclosed field is whole multiples
            return spec.flux * winding_number(contour, spec.center)
        if np.all(np.linalg.norm(xy - c[None, :], axis=1) <= spec.radius):
            # entirely inside the core, where B is uniform
            return spec.flux / (np.pi * spec.radius**2) * _signed_area(xy)
        return None  # straddles the shell; fall back to quadrature
    return None


def enclosed_flux_stokes(
    field: Union[FieldSpec, Callable],
    contour: Path,
    surface_resolution: int = 3,
    *,
    surface: str = "auto",
) -> float:
    """Flux of B through the surface spanned by a closed contour.

    Planar contours (2D, or 3D with constant z) span their interior with
    signed fan triangles, so multiply-wound contours count flux with
    multiplicity.  Monopole specs instead require a contour at constant
    colatitude on an origin-centered sphere and return the closed-form flux
    through the spanned polar cap.

    ``surface`` may be "auto", "planar" or "spherical_cap".  For field specs
    the value is surface-independent and the request only picks the route; a
    bare sampler is integrated literally over the requested surface, with
    "spherical_cap" demanding cap geometry.
    """
    if not contour.closed:
        raise ValueError("enclosed flux needs a closed contour")
    if surface not in ("auto", "planar", "spherical_cap"):
        raise ValueError(f"unknown surface {surface!r}")
    v = contour.points3()
    spec = field if isinstance(field, FieldSpec) else None

    base = spec
    while isinstance(base, GaugeShifted):
        base = base.base
    is_monopole = isinstance(base, (MonopoleStringSouth, MonopoleStringNorth))

    # for a known spec the flux is surface-independent, so the surface request
    # only picks the computation route; bare samplers integrate literally
    want_cap = is_monopole or (spec is None and surface == "spherical_cap")
    if want_cap:
        cap = _cap_geometry(v)
        if cap is None:
            raise NonPlanarContour("contour is not a constant-colatitude circle on an origin-centered sphere")
        R, theta0 = cap
        w = winding_number(Path(v[:, :2], closed=True), (0.0, 0.0))
        if is_monopole:
            return float(w * TWO_PI * base.g * (1.0 - np.cos(theta0)))
        return w * _cap_quadrature(field, R, theta0, surface_resolution)

    z = v[:, 2]
    z0 = float(z[0])
    if np.max(np.abs(z - z0)) > 1e-12 * (1.0 + np.max(np.abs(v))):
        raise NonPlanarContour("contour does not lie in a constant-z plane")
    xy = v[:, :2]

    if spec is not None:
        analytic = _spec_planar_flux(spec, contour, xy, z0, surface_resolution)
        if analytic is not None:
            return float(analytic)
        bz = lambda p: spec.magnetic_field(p)[..., 2]
    else:
        bz = lambda p: np.asarray(field(p))[..., 2]
    return _planar_quadrature(bz, xy, z0, surface_resolution)
