"""Line integrals, winding numbers, enclosed flux.

Oracles: a pure azimuthal 1/rho potential integrates to flux x winding around
any polygon avoiding the filament (the integrand is a gradient off the
filament, so polygon chords introduce no error); the uniform-field loop
integral is b0 x shoelace area; the monopole cap flux is 2 pi g (1 - cos
theta0).
"""

import numpy as np
import pytest

from abflux import (
    FiniteSolenoid,
    FluxLine,
    MonopoleStringNorth,
    MonopoleStringSouth,
    NoConvergence,
    NonPlanarContour,
    Path,
    PhysConstants,
    PointOnContour,
    QuadratureSpec,
    SingularPoint,
    UniformB,
    ab_phase,
    enclosed_flux_stokes,
    gauge_transform_potentials,
    line_integral,
    polynomial_gauge,
    winding_number,
)

CONST = PhysConstants()
SQUARE = Path(np.array([[2.0, 2.0], [-2.0, 2.0], [-2.0, -2.0], [2.0, -2.0]]), closed=True)


def shoelace(xy):
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def random_loop(rng, center=(0.0, 0.0), rmin=0.5, rmax=4.0, nmax=12):
    """Random star-shaped polygon that winds once around center."""
    n = int(rng.integers(4, nmax))
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    if np.min(np.diff(ang)) < 1e-3:
        ang = np.linspace(0, 2 * np.pi, n, endpoint=False)
    rad = rng.uniform(rmin, rmax, n)
    xy = np.stack([center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang)], axis=-1)
    return Path(xy, closed=True)


# ---------------------------------------------------------------- paths


def test_path_validation():
    with pytest.raises(ValueError):
        Path(np.array([[0.0, 0.0]]))
    with pytest.raises(ValueError):
        Path(np.array([[0.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        Path(np.array([[0.0, 0.0], [1.0, 0.0]]), closed=True)
    with pytest.raises(ValueError):
        Path(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.0, 0.0]]), closed=True)
    with pytest.raises(ValueError):
        Path(np.array([[0.0, np.nan], [1.0, 0.0]]))


def test_path_segments_include_closure():
    segs = SQUARE.segments()
    assert segs.shape == (4, 2, 3)
    np.testing.assert_allclose(segs[-1, 1], [2.0, 2.0, 0.0])


def test_circle_constructor():
    c = Path.circle(radius=2.0, n=6, z=1.5)
    assert c.dim == 3 and c.closed
    np.testing.assert_allclose(np.hypot(c.vertices[:, 0], c.vertices[:, 1]), 2.0)
    cw = Path.circle(radius=1.0, n=8, ccw=False)
    assert winding_number(cw, (0.0, 0.0)) == -1


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rule="simpson")
    with pytest.raises(ValueError):
        QuadratureSpec(tolerance=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_depth=-1)


# ---------------------------------------------------------------- line integrals


def test_flux_line_loop_integral_equals_flux():
    fl = FluxLine(center=(0.0, 0.0), flux=2.5)
    assert line_integral(fl, Path.circle(radius=1.3, n=16)) == pytest.approx(2.5, abs=1e-10)
    assert line_integral(fl, SQUARE) == pytest.approx(2.5, abs=1e-10)


def test_loop_integral_scales_with_winding_and_orientation():
    fl = FluxLine(center=(0.0, 0.0), flux=1.0)
    rev = Path(SQUARE.vertices[::-1], closed=True)
    assert line_integral(fl, rev) == pytest.approx(-1.0, abs=1e-10)
    ang = 2.0 * (2 * np.pi) * np.arange(25) / 25  # two turns, 25 distinct vertices
    two = Path(np.stack([np.cos(ang), np.sin(ang)], axis=-1), closed=True)
    assert line_integral(fl, two) == pytest.approx(2.0, abs=1e-10)


def test_open_path_additivity():
    ub = UniformB(b0=0.8)
    rng = np.random.default_rng(21)
    for _ in range(20):
        pts = rng.normal(scale=2.0, size=(5, 2))
        whole = line_integral(ub, Path(pts))
        first = line_integral(ub, Path(pts[:3]))
        second = line_integral(ub, Path(pts[2:]))
        assert whole == pytest.approx(first + second, abs=1e-12)


def test_same_side_paths_agree_opposite_sides_differ_by_flux():
    fl = FluxLine(center=(0.0, 0.0), flux=1.7)
    rng = np.random.default_rng(4)
    start, end = np.array([-3.0, 0.0]), np.array([3.0, 0.0])
    for _ in range(20):
        y1, y2 = rng.uniform(0.5, 2.5, 2)
        above1 = Path(np.array([start, [-1.0, y1], [1.0, y1], end]))
        above2 = Path(np.array([start, [-1.5, y2], [0.0, y2 + 1.0], [1.5, y2], end]))
        below = Path(np.array([start, [-1.0, -y1], [1.0, -y2], end]))
        p1 = line_integral(fl, above1)
        p2 = line_integral(fl, above2)
        p3 = line_integral(fl, below)
        assert abs(p1 - p2) < 1e-10
        # below-then-reversed-above winds the filament once counterclockwise
        assert p3 - p1 == pytest.approx(1.7, abs=1e-10)


def test_loop_integral_is_gauge_invariant():
    fl = FluxLine(center=(0.0, 0.0), flux=1.3)
    chi = polynomial_gauge({(2, 1, 0): 0.4, (0, 3, 0): -0.1, (1, 0, 0): 2.0})
    shifted = gauge_transform_potentials(fl, chi)
    for loop in (SQUARE, Path.circle(radius=2.0, n=7)):
        assert line_integral(shifted, loop) == pytest.approx(line_integral(fl, loop), abs=1e-10)


def test_midpoint_rule_exact_for_linear_potential():
    ub = UniformB(b0=0.8)
    quad = QuadratureSpec(rule="midpoint", tolerance=1e-12)
    assert line_integral(ub, SQUARE, quad) == pytest.approx(0.8 * 16.0, abs=1e-10)


def test_singular_path_rejected():
    fl = FluxLine(center=(0.0, 0.0), flux=1.0)
    with pytest.raises(SingularPoint):
        line_integral(fl, Path(np.array([[-1.0, 1e-12], [1.0, 1e-12]])))
    # passing between quadrature nodes is still caught by the segment check
    with pytest.raises(SingularPoint):
        line_integral(fl, Path(np.array([[-1.0, 0.0], [1.0, 1e-11]])))


def test_refinement_cap_raises():
    rough = lambda p: np.stack(
        [np.sqrt(np.abs(p[..., 0])), np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1])], axis=-1
    )
    seg = Path(np.array([[-1.0, 0.0], [1.0, 0.0]]))
    quad = QuadratureSpec(tolerance=1e-14, max_depth=2)
    with pytest.raises(NoConvergence):
        line_integral(rough, seg, quad)
    # a milder kink converges with depth to spare
    milder = lambda p: np.stack(
        [np.abs(p[..., 0]) ** 1.5, np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1])], axis=-1
    )
    got = line_integral(milder, seg, QuadratureSpec(tolerance=1e-10, max_depth=12))
    assert got == pytest.approx(2.0 / 2.5, abs=1e-8)


def test_ab_phase_applies_coupling():
    fl = FluxLine(center=(0.0, 0.0), flux=2.5)
    assert ab_phase(CONST, fl, SQUARE) == pytest.approx(-2.5, abs=1e-10)
    half = PhysConstants(charge=0.5)
    assert ab_phase(half, fl, SQUARE) == pytest.approx(1.25, abs=1e-10)


# ---------------------------------------------------------------- winding


def test_winding_number_basic():
    c = Path.circle(radius=1.3, n=16)
    assert winding_number(c, (0.1, -0.2)) == 1
    assert winding_number(c, (5.0, 0.0)) == 0
    ang = 2.0 * (2 * np.pi) * np.arange(25) / 25
    two = Path(np.stack([np.cos(ang), np.sin(ang)], axis=-1), closed=True)
    assert winding_number(two, (0.0, 0.0)) == 2


def test_winding_point_on_contour_rejected():
    with pytest.raises(PointOnContour):
        winding_number(SQUARE, (2.0, 0.0))
    with pytest.raises(PointOnContour):
        winding_number(SQUARE, (2.0, 2.0))


# ---------------------------------------------------------------- enclosed flux


def test_stokes_flux_line_against_loop_phase():
    fl = FluxLine(center=(0.3, -0.4), flux=2.5)
    rng = np.random.default_rng(17)
    for _ in range(50):
        loop = random_loop(rng, center=(0.3, -0.4))
        flux = enclosed_flux_stokes(fl, loop)
        assert ab_phase(CONST, fl, loop) == pytest.approx(CONST.coupling * flux, abs=1e-8)


def test_stokes_uniform_field_matches_shoelace_area():
    ub = UniformB(b0=0.8)
    rng = np.random.default_rng(23)
    for _ in range(20):
        loop = random_loop(rng)
        want = 0.8 * shoelace(np.asarray(loop.vertices))
        assert enclosed_flux_stokes(ub, loop) == pytest.approx(want, abs=1e-10)


def test_stokes_solenoid_inside_outside_and_straddling():
    sol = FiniteSolenoid(center=(0.0, 0.0), radius=0.5, flux=2.5)
    assert enclosed_flux_stokes(sol, SQUARE) == pytest.approx(2.5, abs=1e-12)
    inner = Path.circle(radius=0.2, n=64)
    b_in = 2.5 / (np.pi * 0.25)
    assert enclosed_flux_stokes(sol, inner) == pytest.approx(
        b_in * shoelace(np.asarray(inner.vertices)), abs=1e-12
    )
    straddle = Path.circle(radius=0.5 * 1.1, n=256)
    got = enclosed_flux_stokes(straddle and sol, straddle, surface_resolution=6)
    assert got == pytest.approx(line_integral(sol, straddle), abs=1e-6)


def test_stokes_matches_line_integral_for_smooth_sampler():
    # A = (0, x cos y, 0) <-> Bz = cos y
    a_sampler = lambda p: np.stack(
        [np.zeros(p.shape[:-1]), p[..., 0] * np.cos(p[..., 1]), np.zeros(p.shape[:-1])], axis=-1
    )
    b_sampler = lambda p: np.stack(
        [np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1]), np.cos(p[..., 1])], axis=-1
    )
    rng = np.random.default_rng(29)
    for _ in range(10):
        loop = random_loop(rng, rmax=2.5)
        circ = line_integral(a_sampler, loop)
        flux = enclosed_flux_stokes(b_sampler, loop, surface_resolution=5)
        assert circ == pytest.approx(flux, abs=1e-8)


def test_monopole_cap_flux_analytic_and_sampled():
    g = 0.5
    south = MonopoleStringSouth(g=g)
    theta0 = np.pi / 3
    cap = Path.circle(radius=2.0 * np.sin(theta0), n=128, z=2.0 * np.cos(theta0))
    want = 2 * np.pi * g * (1 - np.cos(theta0))
    assert enclosed_flux_stokes(south, cap) == pytest.approx(want, abs=1e-12)
    sampled = enclosed_flux_stokes(south.magnetic_field, cap, surface="spherical_cap")
    assert sampled == pytest.approx(want, abs=1e-9)


def test_near_full_sphere_flux_approaches_4_pi_g():
    g = 0.5
    north = MonopoleStringNorth(g=g)
    theta0 = np.pi - 1e-4
    cap = Path.circle(radius=3.0 * np.sin(theta0), n=64, z=3.0 * np.cos(theta0))
    got = enclosed_flux_stokes(north.magnetic_field, cap, surface="spherical_cap")
    assert got == pytest.approx(4 * np.pi * g, rel=1e-6)


def test_stokes_contour_rules():
    fl = FluxLine(center=(0.0, 0.0), flux=1.0)
    with pytest.raises(ValueError):
        enclosed_flux_stokes(fl, Path(np.array([[0.0, 0.0], [1.0, 0.0]])))
    tilted = Path(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.3], [-1.0, 0.0, 0.0]]), closed=True)
    with pytest.raises(NonPlanarContour):
        enclosed_flux_stokes(fl, tilted)
    # monopole contours must sit on an origin-centered sphere
    with pytest.raises(NonPlanarContour):
        enclosed_flux_stokes(MonopoleStringSouth(g=1.0), Path.circle(center=(3.0, 0.0), radius=1.0, n=16))
    # spec fluxes are surface-independent, so a cap request still resolves
    assert enclosed_flux_stokes(fl, SQUARE, surface="spherical_cap") == pytest.approx(1.0)
    # an origin-centered circle at z = 0 is the equator cap: half the monopole flux
    got = enclosed_flux_stokes(MonopoleStringSouth(g=1.0), Path.circle(radius=1.0, n=16))
    assert got == pytest.approx(2 * np.pi, abs=1e-12)


def test_planar_contour_at_height_uses_plane_points():
    # sampler returns Bz = z, so flux = z0 * area
    b_sampler = lambda p: np.stack(
        [np.zeros(p.shape[:-1]), np.zeros(p.shape[:-1]), p[..., 2]], axis=-1
    )
    loop = Path.circle(radius=1.0, n=32, z=2.0)
    area = shoelace(np.asarray(loop.vertices)[:, :2])
    assert enclosed_flux_stokes(b_sampler, loop) == pytest.approx(2.0 * area, abs=1e-10)
