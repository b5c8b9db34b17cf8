"""End-to-end guarantees, one test per numbered criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line per
criterion.  The flagship interference sweep (512 x 384 lattice, five flux
values sharing one zero-flux reference) executes once in a module fixture and
feeds the first two criteria; everything else builds its own scene.  Each
test asserts at the tolerance this package commits to, no looser.
"""

import json
import time

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from abflux import (
    Absorber,
    DoubleSlitGeometry,
    FiniteSolenoid,
    FluxLine,
    GaugeShifted,
    Grid,
    MonopoleStringNorth,
    MonopoleStringSouth,
    Path,
    PhysConstants,
    Propagator,
    PropagatorConfig,
    RingModel,
    ab_phase,
    born_density,
    build_link_phases,
    classical_trajectory,
    construct_ab_solution,
    dirac_quantization_check,
    enclosed_flux_stokes,
    gauge_transform_wavefunction,
    init_gaussian_packet,
    line_integral,
    main,
    monopole_interference_phase,
    numeric_curl,
    polynomial_gauge,
    ring_fluxoid,
    run_double_slit,
    schrodinger_residual,
    trap_flux,
    winding_number,
)

CONST = PhysConstants(hbar=1.0, c=1.0, mass=1.0, charge=-1.0)
TWO_PI = 2.0 * np.pi

# loop-phase targets q Phi / hbar c for the interference sweep
TARGETS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2, TWO_PI)


def wrap(a):
    return (np.asarray(a) + np.pi) % TWO_PI - np.pi


@pytest.fixture(scope="module")
def slit_sweep():
    """Five full propagations on the flagship lattice, with wall-clock time."""
    geometry = DoubleSlitGeometry()
    spec = FluxLine(center=geometry.flux_center, flux=0.0)
    config = PropagatorConfig(constants=CONST, dt=0.1, absorber=Absorber(24, 0.05))
    fluxes = [t / CONST.coupling for t in TARGETS]
    t0 = time.perf_counter()
    records = run_double_slit(geometry, spec, config, fluxes)
    elapsed = time.perf_counter() - t0
    return geometry, dict(zip(TARGETS, records)), elapsed


def test_criterion_01_fringe_shift_tracks_enclosed_flux(slit_sweep):
    geometry, records, elapsed = slit_sweep
    assert geometry.nx == 512 and geometry.ny == 384
    for target in TARGETS:
        rec = records[target]
        assert rec.flux == target / CONST.coupling
        deviation = abs(float(wrap(rec.delta - target)))
        assert deviation < 0.1, f"target {target:.4f}: fringe shift off by {deviation:.4f}"
    ref = records[0.0].intensity
    full = records[TWO_PI].intensity
    l2 = np.linalg.norm(full - ref) / np.linalg.norm(ref)
    assert l2 < 0.01, f"one full flux quantum moved the pattern by {l2:.2e} L2"
    assert elapsed < 600.0, f"sweep took {elapsed:.0f} s"


def test_criterion_02_half_quantum_shift_with_no_classical_force(slit_sweep):
    geometry, records, _ = slit_sweep
    rec = records[np.pi]
    assert abs(float(wrap(rec.delta - np.pi))) < 0.1
    # a classical charge on the straight path through the lower slit: E = B = 0
    spec = FluxLine(center=geometry.flux_center, flux=np.pi / CONST.coupling)
    y0 = geometry.slit_centers[0]
    traj = classical_trajectory(
        spec, CONST, (geometry.source_center[0], y0, 0.0), (1.0, 0.0, 0.0), t_end=380.0, dt=0.25
    )
    assert traj.positions[-1, 0] > geometry.detector_col
    assert np.abs(traj.positions[:, 1] - y0).max() < 1e-10
    assert np.abs(traj.positions[:, 2]).max() < 1e-10
    assert np.abs(traj.velocities[:, 1:]).max() < 1e-10


def test_criterion_03_lattice_gauge_covariance_is_exact():
    nx, ny = 96, 64
    mask = np.zeros((nx, ny), dtype=bool)
    mask[47:49, 31:33] = True
    grid = Grid(nx, ny, mask=mask)
    spec = FluxLine(center=(47.5, 31.5), flux=1.7)
    packet = init_gaussian_packet(grid, (26.0, 32.0), 4.5, (0.6, 0.15))
    cfg = PropagatorConfig(constants=CONST, dt=0.1)
    steps = 150
    rho = born_density(Propagator(build_link_phases(grid, spec, CONST), cfg).run(packet, steps))

    rng = np.random.default_rng(3)
    for _ in range(5):
        coeffs = {}
        for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
            coeffs[(i, j, 0)] = rng.uniform(-1.0, 1.0) * 3.0 / (float(nx) ** i * float(ny) ** j)
        chi = polynomial_gauge(coeffs)
        shifted = GaugeShifted(base=spec, chi=chi)
        start = gauge_transform_wavefunction(packet, chi, CONST)
        moved = Propagator(build_link_phases(grid, shifted, CONST), cfg).run(start, steps)
        assert np.abs(born_density(moved) - rho).max() < 1e-12


def test_criterion_04_constructed_solution_and_residual_order():
    g = Grid(64, 64)
    spec = FluxLine(flux=1.9, center=(31.5, 7.5))
    region = np.zeros((64, 64), dtype=bool)
    region[:, 16:] = True
    links0 = build_link_phases(g, FluxLine(flux=0.0, center=(31.5, 7.5)), CONST)
    links1 = build_link_phases(g, spec, CONST)
    cfg = PropagatorConfig(constants=CONST, dt=0.1)
    f = init_gaussian_packet(g, center=(32, 40), sigma=4.5, k0=(0.3, 0.1))
    prop = Propagator(links0, cfg)
    s1 = prop.step(f, 5)
    s2 = prop.step(s1, 1)
    s3 = prop.step(s2, 1)
    r_free = schrodinger_residual([s1, s2, s3], links0, cfg, region=region)
    built = [construct_ab_solution(s, spec, (32, 40), region, CONST) for s in (s1, s2, s3)]
    r_ab = schrodinger_residual(built, links1, cfg, region=region)
    assert 0.5 * r_free <= r_ab <= 2.0 * r_free

    f2 = init_gaussian_packet(g, center=(22, 32), sigma=4, k0=(0.4, 0.15))

    def residual_at(dt, nsteps):
        c = PropagatorConfig(constants=CONST, dt=dt)
        p = Propagator(links1, c)
        a = p.step(f2, nsteps)
        b = p.step(a, 1)
        c_ = p.step(b, 1)
        return schrodinger_residual([a, b, c_], links1, c)

    order = np.log2(residual_at(0.2, 10) / residual_at(0.1, 20))
    assert 1.8 <= order <= 2.2


def test_criterion_05_unitarity_and_potential_offset():
    g = Grid(64, 64)
    links = build_link_phases(g, FluxLine(flux=1.7, center=(31.5, 31.5)), CONST)
    f = init_gaussian_packet(g, center=(20, 32), sigma=4, k0=(0.4, 0.1))
    out = Propagator(links, PropagatorConfig(constants=CONST, dt=0.1)).step(f, 1000)
    assert abs(out.norm() - f.norm()) < 1e-10

    def well(pos):
        return 0.05 * ((pos[..., 0] - 31.5) ** 2 + (pos[..., 1] - 31.5) ** 2)

    def well_plus(pos):
        return well(pos) + 7.3

    a = Propagator(links, PropagatorConfig(constants=CONST, dt=0.05, potential=well)).step(f, 200)
    b = Propagator(links, PropagatorConfig(constants=CONST, dt=0.05, potential=well_plus)).step(f, 200)
    assert np.abs(born_density(a) - born_density(b)).max() < 1e-10


def test_criterion_06_stokes_and_path_independence():
    rng = np.random.default_rng(6)
    filament = FluxLine(center=(0.0, 0.0), flux=2.7)
    solenoid = FiniteSolenoid(center=(0.0, 0.0), radius=0.8, flux=-1.9)
    worst = 0.0
    for k in range(200):
        if k % 2 == 0:
            spec = filament
            center = rng.uniform(-0.4, 0.4, 2)
            if k % 4 == 2:
                center = center + np.array([7.0, 0.0])  # contour missing the filament
        else:
            spec = solenoid
            center = rng.uniform(-0.3, 0.3, 2)
        radius = rng.uniform(2.0, 4.0)
        n = int(rng.integers(12, 64))
        jitter = rng.uniform(0.88, 1.12, n)
        theta = TWO_PI * np.arange(n) / n
        verts = center[None, :] + (radius * jitter)[:, None] * np.stack(
            [np.cos(theta), np.sin(theta)], axis=1
        )
        contour = Path(verts, closed=True)
        worst = max(worst, abs(line_integral(spec, contour) - enclosed_flux_stokes(spec, contour)))
    assert worst < 1e-8

    flux = 1.3
    spec = FluxLine(center=(0.0, 0.0), flux=flux)
    ends = (np.array([0.0, -3.5]), np.array([0.0, 3.5]))

    def detour(side):
        # polyline a -> b through `side` half-plane, well clear of the filament
        a, b = ends
        while True:
            m = int(rng.integers(2, 5))
            xs = side * rng.uniform(1.2, 6.0, m)
            ys = np.sort(rng.uniform(-4.0, 4.0, m))
            verts = np.vstack([[a], np.stack([xs, ys], axis=1), [b]])
            seg_a, seg_b = verts[:-1], verts[1:]
            d = seg_b - seg_a
            t = np.clip(-np.sum(seg_a * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
            closest = seg_a + t[:, None] * d
            if np.hypot(closest[:, 0], closest[:, 1]).min() >= 0.3:
                return verts

    worst_same = 0.0
    worst_cross = 0.0
    for _ in range(50):
        right_a = detour(+1)
        right_b = detour(+1)
        left = detour(-1)
        ph_a = ab_phase(CONST, spec, Path(right_a, closed=False))
        ph_b = ab_phase(CONST, spec, Path(right_b, closed=False))
        ph_l = ab_phase(CONST, spec, Path(left, closed=False))
        worst_same = max(worst_same, abs(ph_a - ph_b))
        loop = Path(np.vstack([right_a, left[1:-1][::-1]]), closed=True)
        assert winding_number(loop, (0.0, 0.0)) == 1
        worst_cross = max(worst_cross, abs((ph_a - ph_l) - CONST.coupling * flux))
    assert worst_same < 1e-8
    assert worst_cross < 1e-8


def test_criterion_07_string_gauges_and_interference():
    g = 0.5
    gauges = (MonopoleStringSouth(g=g), MonopoleStringNorth(g=g))
    rng = np.random.default_rng(7)
    for spec in gauges:
        checked = 0
        while checked < 40:
            r = rng.normal(scale=2.0, size=3)
            if spec.singular_distance(r) < 0.4:
                continue
            curl = numeric_curl(lambda p: spec.vector_potential(p, 0.0), r, h=2e-5)
            B = spec.magnetic_field(r)
            assert np.linalg.norm(curl - B) < 1e-5 * np.linalg.norm(B)
            checked += 1

    # flux through a full sphere of radius r: 4 pi g for both gauges
    nodes, weights = leggauss(32)
    phi = TWO_PI * np.arange(64) / 64
    radius = 3.7
    st = np.sqrt(1.0 - nodes**2)
    points = radius * np.stack(
        [
            np.outer(st, np.cos(phi)),
            np.outer(st, np.sin(phi)),
            np.outer(nodes, np.ones_like(phi)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    area_weights = radius**2 * (TWO_PI / 64) * np.repeat(weights, 64)
    for spec in gauges:
        b_normal = np.einsum("ij,ij->i", spec.magnetic_field(points), points) / radius
        total = float(np.sum(area_weights * b_normal))
        assert abs(total - 4 * np.pi * g) < 1e-6 * 4 * np.pi * g

    # interference phase at a contour a thousand radii below the pole
    contour = Path.circle((0.0, 0.0), 1.0, 256, z=-1000.0)
    scale = abs(4 * np.pi * CONST.coupling * g)
    pierced = monopole_interference_phase(CONST, g, contour, True)
    assert abs(pierced - 4 * np.pi * CONST.coupling * g) < 1e-6 * scale
    spared = monopole_interference_phase(CONST, g, contour, False)
    assert abs(spared) < 1e-6 * scale


def test_criterion_08_charge_pole_grid_quantization():
    for i in range(1, 21):
        for j in range(1, 21):
            q, g = 0.5 * i, 0.5 * j
            satisfied, n, residual = dirac_quantization_check(CONST, q, g)
            product_doubled = 2.0 * q * g
            if product_doubled == round(product_doubled):
                assert satisfied and residual < 1e-12
                assert n == round(product_doubled)
            else:
                assert not satisfied and residual == pytest.approx(0.5)
    assert dirac_quantization_check(CONST, 1.0, 0.5) == (True, 1, 0.0)


def test_criterion_09_fluxoid_and_trapped_flux_quantization():
    phi0 = TWO_PI * CONST.hbar * CONST.c / 2.0  # |q_pair| = 2
    assert phi0 == pytest.approx(np.pi)
    # self-consistent ring states: integer count, residual well under 0.01
    for winding, quanta in ((0, 0), (1, 1), (2, 1), (-1, 2), (3, -2)):
        ring = RingModel.with_winding(5.0, winding, q_pair=-2.0)
        spec = FluxLine(center=(0.0, 0.0), flux=quanta * phi0)
        n, residual = ring_fluxoid(ring, spec, CONST)
        assert isinstance(n, int)
        assert residual < 0.01
        assert n == quanta - winding
    for quanta in (0, 1, 3):
        spec = FluxLine(center=(0.0, 0.0), flux=quanta * phi0)
        ring = RingModel.from_potential(5.0, spec, CONST, q_pair=-2.0)
        n, residual = ring_fluxoid(ring, spec, CONST)
        assert n == 0 and residual < 0.01

    # trapped flux moves in whole steps of one quantum
    applied = np.linspace(0.0, 3.2 * phi0, 33)
    trapped = np.array([trap_flux(a, CONST, q_pair=-2.0)[1] for a in applied])
    jumps = np.diff(np.unique(trapped))
    assert np.allclose(jumps, phi0, atol=1e-12)
    assert trap_flux(1.4 * phi0, CONST, q_pair=-2.0) == (1, pytest.approx(phi0))


def test_criterion_10_repeated_runs_are_byte_identical(tmp_path):
    configs = {
        "fq.json": {"experiment": "flux-quant", "seed": 5},
        "gc.json": {
            "experiment": "gauge-check",
            "seed": 5,
            "samples": {"chi": 2, "contours": 20, "paths": 8},
        },
        "mono.json": {
            "experiment": "monopole",
            "seed": 5,
            "charges": [0.5, 1.0, 1.5],
            "poles": [0.5, 1.0],
        },
    }
    for name, payload in configs.items():
        cfg = tmp_path / name
        cfg.write_text(json.dumps(payload), encoding="utf-8")
        out_a = tmp_path / (name + ".a")
        out_b = tmp_path / (name + ".b")
        assert main([payload["experiment"], "--config", str(cfg), "--out", str(out_a)]) == 0
        assert main([payload["experiment"], "--config", str(cfg), "--out", str(out_b)]) == 0
        compared = 0
        for artifact in sorted(out_a.iterdir()):
            if artifact.suffix == ".csv" or artifact.name == "summary.json":
                assert artifact.read_bytes() == (out_b / artifact.name).read_bytes(), artifact.name
                compared += 1
        assert compared >= 2
