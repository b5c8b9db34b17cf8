"""Potentials, fields, gauge machinery.

Expected values are closed forms evaluated by hand, not re-derived from the
implementation: the flux-line potential Phi/(2 pi rho) in the azimuthal
direction, the monopole field g r/|r|^3, the string-gauge difference
grad(2 g * azimuth), and the uniform-field symmetric gauge A = B x r / 2.
"""

import numpy as np
import pytest

from abflux import (
    EPS_STRING,
    FiniteSolenoid,
    FluxLine,
    GaugeShifted,
    MonopoleStringNorth,
    MonopoleStringSouth,
    PhysConstants,
    SingularPoint,
    UniformB,
    derive_fields,
    eval_magnetic_field,
    eval_vector_potential,
    gauge_transform_potentials,
    numeric_curl,
    polynomial_gauge,
    spec_from_dict,
    spec_to_dict,
    with_flux,
)

CONST = PhysConstants()


def test_constants_defaults_and_derived():
    assert CONST.hbar == 1.0 and CONST.c == 1.0 and CONST.mass == 1.0
    assert CONST.charge == -1.0
    assert CONST.coupling == -1.0
    assert CONST.flux_quantum == pytest.approx(2.0 * np.pi)
    pair = PhysConstants(charge=-2.0)
    assert pair.flux_quantum == pytest.approx(np.pi)


def test_constants_validation():
    with pytest.raises(ValueError):
        PhysConstants(hbar=0.0)
    with pytest.raises(ValueError):
        PhysConstants(c=-1.0)
    with pytest.raises(ValueError):
        PhysConstants(mass=0.0)
    with pytest.raises(ValueError):
        PhysConstants(charge=np.inf)


def test_flux_line_potential_value():
    fl = FluxLine(center=(0.0, 0.0), flux=2.5)
    A = fl.vector_potential(np.array([2.0, 0.0, 0.0]), 0.0)
    # Phi/(2 pi rho) azimuthal: 2.5/(4 pi) in +y at (2, 0)
    np.testing.assert_allclose(A, [0.0, 0.1989436788648692, 0.0], atol=1e-15)
    # 2D input accepted
    A2 = fl.vector_potential(np.array([0.0, -3.0]), 0.0)
    np.testing.assert_allclose(A2, [2.5 / (6.0 * np.pi), 0.0, 0.0], atol=1e-15)


def test_flux_line_field_is_zero_off_filament():
    fl = FluxLine(center=(0.5, -0.25), flux=1.7)
    rng = np.random.default_rng(3)
    pts = rng.normal(scale=3.0, size=(200, 3))
    B = fl.magnetic_field(pts)
    assert np.all(B == 0.0)


def test_flux_line_singular_distance_and_error():
    fl = FluxLine(center=(1.0, 2.0), flux=1.0)
    assert fl.singular_distance(np.array([4.0, 6.0, 9.0])) == pytest.approx(5.0)
    with pytest.raises(SingularPoint):
        eval_vector_potential(fl, np.array([1.0 + 1e-12, 2.0, 0.0]))
    # just outside the exclusion radius is fine
    eval_vector_potential(fl, np.array([1.0 + 10 * EPS_STRING, 2.0, 0.0]))


def test_solenoid_matches_flux_line_outside():
    sol = FiniteSolenoid(center=(0.0, 0.0), radius=0.5, flux=2.5)
    fl = FluxLine(center=(0.0, 0.0), flux=2.5)
    rng = np.random.default_rng(7)
    ang = rng.uniform(0, 2 * np.pi, 100)
    rad = rng.uniform(0.5, 5.0, 100)
    pts = np.stack([rad * np.cos(ang), rad * np.sin(ang), rng.normal(size=100)], axis=-1)
    np.testing.assert_allclose(
        sol.vector_potential(pts, 0.0), fl.vector_potential(pts, 0.0), atol=1e-12
    )
    assert np.all(sol.magnetic_field(pts) == 0.0)


def test_solenoid_interior_field_and_shell_continuity():
    sol = FiniteSolenoid(center=(0.0, 0.0), radius=0.5, flux=2.5)
    B = sol.magnetic_field(np.array([0.1, 0.1, 0.0]))
    np.testing.assert_allclose(B, [0.0, 0.0, 2.5 / (np.pi * 0.25)], rtol=1e-15)
    a_in = sol.vector_potential(np.array([0.5 - 1e-12, 0.0, 0.0]), 0.0)
    a_out = sol.vector_potential(np.array([0.5 + 1e-12, 0.0, 0.0]), 0.0)
    np.testing.assert_allclose(a_in, a_out, atol=1e-9)
    # interior potential grows linearly: A_phi = Phi rho / (2 pi R^2)
    a = sol.vector_potential(np.array([0.2, 0.0, 0.0]), 0.0)
    np.testing.assert_allclose(a, [0.0, 2.5 * 0.2 / (2 * np.pi * 0.25), 0.0], atol=1e-15)


def test_uniform_b_symmetric_gauge():
    ub = UniformB(b0=0.8)
    A = ub.vector_potential(np.array([2.0, -1.0, 3.0]), 0.0)
    np.testing.assert_allclose(A, [0.4, 0.8, 0.0], atol=1e-15)
    np.testing.assert_allclose(ub.magnetic_field(np.zeros(3)), [0.0, 0.0, 0.8])


def test_monopole_equator_and_axis_values():
    g = 0.7
    south = MonopoleStringSouth(g=g)
    A = south.vector_potential(np.array([1.0, 0.0, 0.0]), 0.0)
    np.testing.assert_allclose(A, [0.0, g, 0.0], atol=1e-15)
    B = south.magnetic_field(np.array([0.0, 0.0, 2.0]))
    np.testing.assert_allclose(B, [0.0, 0.0, g / 4.0], atol=1e-15)
    north = MonopoleStringNorth(g=g)
    np.testing.assert_allclose(
        north.magnetic_field(np.array([0.0, 0.0, -2.0])), [0.0, 0.0, -g / 4.0], atol=1e-15
    )


def test_monopole_curl_matches_field_off_string():
    rng = np.random.default_rng(11)
    for spec in (MonopoleStringSouth(g=0.5), MonopoleStringNorth(g=0.5)):
        for _ in range(20):
            r = rng.normal(scale=2.0, size=3)
            if spec.singular_distance(r) < 0.3:
                continue
            curl = numeric_curl(lambda p: spec.vector_potential(p, 0.0), r)
            B = spec.magnetic_field(r)
            assert np.linalg.norm(curl - B) < 1e-5 * np.linalg.norm(B)


def test_monopole_string_gauges_differ_by_azimuth_gradient():
    g = 0.5
    south = MonopoleStringSouth(g=g)
    north = MonopoleStringNorth(g=g)
    rng = np.random.default_rng(5)
    pts = rng.normal(scale=2.0, size=(200, 3))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.1]
    dA = south.vector_potential(pts, 0.0) - north.vector_potential(pts, 0.0)
    rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    grad_az = np.stack([-pts[:, 1] / rho2, pts[:, 0] / rho2, np.zeros(len(pts))], axis=-1)
    np.testing.assert_allclose(dA, 2.0 * g * grad_az, atol=1e-12)


def test_monopole_singular_distance_follows_the_string():
    south = MonopoleStringSouth(g=1.0)
    # below the equator the string is the nearest singular set
    assert south.singular_distance(np.array([3.0, 4.0, -10.0])) == pytest.approx(5.0)
    # above it the origin is
    assert south.singular_distance(np.array([0.0, 0.0, 2.0])) == pytest.approx(2.0)
    north = MonopoleStringNorth(g=1.0)
    assert north.singular_distance(np.array([3.0, 4.0, 10.0])) == pytest.approx(5.0)
    with pytest.raises(SingularPoint):
        eval_magnetic_field(south, np.array([0.0, 0.0, 0.0]))


def test_polynomial_gauge_gradient_and_time_derivative():
    chi = polynomial_gauge({(2, 0, 0): 1.5, (1, 1, 0): -0.5, (0, 0, 1): 2.0, (0, 2, 1): 1.0})
    r = np.array([1.2, -0.7, 0.0])
    assert chi(r, 0.3) == pytest.approx(1.5 * 1.44 + 0.5 * 1.2 * 0.7 + 0.6 + 0.3 * 0.49)
    grad = chi.grad(r, 0.3)
    np.testing.assert_allclose(grad, [3.0 * 1.2 - 0.5 * -0.7, -0.5 * 1.2 + 0.3 * 2 * -0.7, 0.0], atol=1e-14)
    assert chi.dt(r, 0.3) == pytest.approx(2.0 + 0.49)
    chi.check_gradient(np.array([[0.3, 0.4, 0.0], [2.0, -1.0, 0.0]]), t=0.1)


def test_gauge_function_check_catches_wrong_gradient():
    chi = polynomial_gauge({(2, 0, 0): 1.0})
    bad = type(chi)(value=chi.value, gradient=lambda r, t: 0.5 * chi.gradient(r, t), time_derivative=chi.time_derivative)
    with pytest.raises(ValueError):
        bad.check_gradient(np.array([[1.0, 0.0, 0.0]]), t=0.0)


def test_gauge_shift_preserves_b_and_shifts_a():
    fl = FluxLine(center=(0.0, 0.0), flux=1.3)
    chi = polynomial_gauge({(1, 0, 0): 0.4, (0, 2, 0): -0.2, (1, 1, 1): 0.7})
    shifted = gauge_transform_potentials(fl, chi, check_points=np.array([[1.0, 1.0, 0.0]]))
    rng = np.random.default_rng(2)
    pts = rng.normal(scale=2.0, size=(50, 3))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) > 0.2]
    t = 0.6
    np.testing.assert_allclose(
        shifted.vector_potential(pts, t),
        fl.vector_potential(pts, t) + chi.grad(pts, t),
        atol=1e-13,
    )
    np.testing.assert_allclose(shifted.magnetic_field(pts), fl.magnetic_field(pts), atol=0)
    # phi' = phi - (1/c) dchi/dt
    np.testing.assert_allclose(shifted.scalar_potential(pts, t, c=1.0), -chi.dt(pts, t), atol=1e-13)


def test_derived_em_fields_are_gauge_invariant():
    base = UniformB(b0=0.6)
    rng = np.random.default_rng(9)
    for seed in range(5):
        chi_rng = np.random.default_rng(seed)
        coeffs = {}
        for _ in range(4):
            key = tuple(chi_rng.integers(0, 3, size=3))
            coeffs[key] = float(chi_rng.normal())
        chi = polynomial_gauge(coeffs)
        shifted = gauge_transform_potentials(base, chi)
        r = rng.normal(scale=1.5, size=3)
        t = float(rng.uniform(0, 2))
        s0 = derive_fields(base, r, t, CONST)
        s1 = derive_fields(shifted, r, t, CONST)
        np.testing.assert_allclose(s1.E, s0.E, atol=1e-6)
        np.testing.assert_allclose(s1.B, s0.B, atol=1e-10)


def test_static_specs_have_zero_electric_field():
    for spec in (FluxLine(center=(0, 0), flux=1.0), UniformB(b0=1.0), MonopoleStringSouth(g=1.0)):
        s = derive_fields(spec, np.array([1.0, 0.5, 0.3]), 0.0, CONST)
        assert np.all(s.E == 0.0)


def test_spec_serialization_round_trip():
    chi = polynomial_gauge({(1, 0, 0): 0.3, (0, 1, 2): -1.1})
    specs = [
        FluxLine(center=(0.5, -1.0), flux=2.5),
        FiniteSolenoid(center=(0.0, 0.0), radius=0.7, flux=-1.0),
        UniformB(b0=0.25),
        MonopoleStringSouth(g=0.5),
        MonopoleStringNorth(g=-0.5),
        GaugeShifted(base=FluxLine(center=(0.0, 0.0), flux=1.0), chi=chi),
    ]
    rng = np.random.default_rng(13)
    pts = rng.normal(scale=2.0, size=(20, 3)) + np.array([3.0, 0.0, 0.0])
    for spec in specs:
        clone = spec_from_dict(spec_to_dict(spec))
        np.testing.assert_allclose(
            clone.vector_potential(pts, 0.4), spec.vector_potential(pts, 0.4), atol=1e-14
        )
        np.testing.assert_allclose(clone.magnetic_field(pts), spec.magnetic_field(pts), atol=1e-14)


def test_serialization_rejects_non_polynomial_gauge():
    chi = polynomial_gauge({(1, 0, 0): 1.0})
    opaque = type(chi)(value=chi.value, gradient=chi.gradient, time_derivative=chi.time_derivative)
    shifted = GaugeShifted(base=UniformB(b0=1.0), chi=opaque)
    with pytest.raises(ValueError):
        spec_to_dict(shifted)


def test_with_flux_swaps_flux_and_descends_gauge_wrappers():
    fl = FluxLine(center=(1.0, 2.0), flux=1.0)
    assert with_flux(fl, 3.0).flux == 3.0
    assert with_flux(fl, 3.0).center == fl.center
    sol = FiniteSolenoid(center=(0.0, 0.0), radius=0.5, flux=1.0)
    assert with_flux(sol, -2.0).flux == -2.0
    chi = polynomial_gauge({(1, 1, 0): 0.2})
    wrapped = GaugeShifted(base=fl, chi=chi)
    out = with_flux(wrapped, 4.0)
    assert isinstance(out, GaugeShifted) and out.base.flux == 4.0
    with pytest.raises(TypeError):
        with_flux(UniformB(b0=1.0), 1.0)


def test_numeric_curl_on_known_potential():
    # A = (0, x cos y, 0) has curl (0, 0, cos y) exactly
    sampler = lambda p: np.stack(
        [np.zeros(p.shape[:-1]), p[..., 0] * np.cos(p[..., 1]), np.zeros(p.shape[:-1])], axis=-1
    )
    r = np.array([0.8, -0.3, 0.2])
    np.testing.assert_allclose(numeric_curl(sampler, r), [0.0, 0.0, np.cos(-0.3)], atol=1e-9)
