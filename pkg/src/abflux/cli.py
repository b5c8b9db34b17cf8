"""Command-line runner: one subcommand per experiment, deterministic artifacts.

``abflux <experiment> --config <file.json> --out <dir> [--seed N] [--threads N]``

Each run writes ``manifest.json`` (materialized config, library version,
tolerances, timings), a ``summary.csv`` table, a ``summary.json`` mirror
with experiment extras, an SVG rendering, and per-flux intensity CSVs for
the double-slit.  Given the same config and seed, the CSV and summary bytes
are identical across runs; only the manifest timings vary.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure.  On
failure an ``error.json`` record is left in the output directory.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .errors import AbfluxError, ConfigError
from .experiments import (
    RingModel,
    _wrap_phase,
    dirac_quantization_check,
    monopole_interference_phase,
    ring_fluxoid,
    run_double_slit,
    trap_flux,
)
from .gauge_fields import (
    FiniteSolenoid,
    FluxLine,
    GaugeShifted,
    PhysConstants,
    polynomial_gauge,
)
from .path_integrals import Path, ab_phase, enclosed_flux_stokes, line_integral, winding_number
from .render import bar_chart, heatmap, line_chart
from .schrodinger import (
    Grid,
    Propagator,
    PropagatorConfig,
    born_density,
    build_link_phases,
    gauge_transform_wavefunction,
    init_gaussian_packet,
)

TWO_PI = 2.0 * np.pi


# --- deterministic text emission ---


def _num(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_num(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _write(out: pathlib.Path, name: str, text: str) -> str:
    (out / name).write_text(text, encoding="utf-8", newline="\n")
    return name


def _write_json(out: pathlib.Path, name: str, payload: dict) -> str:
    return _write(out, name, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


# --- experiment runners ---


def _run_double_slit(config: RunConfig, out: pathlib.Path) -> tuple:
    p = config.params
    const = config.constants
    quantum = const.flux_quantum
    fluxes = [q * quantum for q in p.flux_quanta]
    prop_cfg = PropagatorConfig(constants=const, dt=p.dt, absorber=p.absorber)
    records = run_double_slit(
        p.geometry,
        p.field,
        prop_cfg,
        fluxes,
        workers=config.threads,
        max_steps=p.max_steps,
        saturation_interval=p.saturation_interval,
        saturation_rtol=p.saturation_rtol,
    )

    artifacts = []
    rows = []
    detail = []
    series = []
    for i, rec in enumerate(records):
        artifacts.append(
            _write(out, f"intensity_{i:02d}.csv", _csv(("y", "intensity"), zip(rec.y, rec.intensity)))
        )
        residual = abs(_wrap_phase(rec.delta - const.coupling * rec.flux))
        rows.append((rec.flux, rec.delta, rec.period, residual))
        detail.append(
            {
                "flux": rec.flux,
                "flux_quanta": p.flux_quanta[i],
                "delta_phase": rec.delta,
                "period": rec.period,
                "residual": residual,
                "transmitted": rec.transmitted,
                "steps": rec.steps,
                "intensity_csv": f"intensity_{i:02d}.csv",
            }
        )
        series.append((f"{p.flux_quanta[i]:g} quanta", rec.y, rec.intensity))

    artifacts.append(
        _write(out, "summary.csv", _csv(("flux", "delta_phase", "period", "residual"), rows))
    )
    artifacts.append(_write_json(out, "summary.json", {"flux_quantum": quantum, "records": detail}))
    artifacts.append(
        _write(
            out,
            "fringes.svg",
            line_chart(
                series,
                title="Detector fringes by enclosed flux",
                x_label="detector row y",
                y_label="time-integrated density",
            ),
        )
    )
    stack = np.vstack([rec.intensity for rec in records])
    artifacts.append(
        _write(
            out,
            "fringe_map.svg",
            heatmap(
                stack,
                title="Fringe shift with enclosed flux",
                x_label="detector row y",
                y_label="flux (quanta)",
                x_ticks=[str(i) for i in range(stack.shape[1])],
                y_ticks=[f"{q:g}" for q in p.flux_quanta],
            ),
        )
    )
    tolerances = {"saturation_rtol": p.saturation_rtol}
    return artifacts, tolerances


def _run_flux_quant(config: RunConfig, out: pathlib.Path) -> tuple:
    p = config.params
    const = config.constants
    quantum = TWO_PI * const.hbar * const.c / abs(p.q_pair)
    rows = []
    detail = []
    for a in p.applied_quanta:
        applied = a * quantum
        n, trapped = trap_flux(applied, const, q_pair=p.q_pair)
        ring = RingModel.uniform(p.radius, p.n_nodes, q_pair=p.q_pair, flux_ext=applied)
        m, res = ring_fluxoid(ring, FluxLine(flux=trapped), const)
        rows.append((applied, n, trapped, m, res))
        detail.append(
            {
                "applied_flux": applied,
                "applied_quanta": a,
                "n_trapped": n,
                "trapped_flux": trapped,
                "fluxoid_n": m,
                "fluxoid_residual": res,
            }
        )

    artifacts = [
        _write(
            out,
            "summary.csv",
            _csv(("applied_flux", "n_trapped", "trapped_flux", "fluxoid_n", "fluxoid_residual"), rows),
        ),
        _write_json(out, "summary.json", {"flux_quantum": quantum, "records": detail}),
    ]
    top = max(max(p.applied_quanta), 1.0)
    dense = np.linspace(0.0, top * quantum, 241)
    staircase = np.array([trap_flux(phi, const, q_pair=p.q_pair)[1] for phi in dense])
    artifacts.append(
        _write(
            out,
            "staircase.svg",
            line_chart(
                [("trapped flux", dense, staircase), ("applied flux", dense, dense)],
                title="Trapped flux quantization",
                x_label="applied flux",
                y_label="flux",
            ),
        )
    )
    return artifacts, {"fluxoid_residual_max": 0.01}


def _run_monopole(config: RunConfig, out: pathlib.Path) -> tuple:
    p = config.params
    const = config.constants
    rows = []
    grid = np.empty((len(p.charges), len(p.poles)))
    for i, q in enumerate(p.charges):
        for j, g in enumerate(p.poles):
            ok, n, res = dirac_quantization_check(const, q, g)
            rows.append((q, g, ok, n, res))
            grid[i, j] = res

    q0, g0 = p.charges[0], p.poles[0]
    probe = PhysConstants(hbar=const.hbar, c=const.c, mass=const.mass, charge=q0)
    contour = Path.circle((0.0, 0.0), p.contour_radius, p.contour_n, z=p.contour_z)
    pierced = monopole_interference_phase(probe, g0, contour, True)
    spared = monopole_interference_phase(probe, g0, contour, False)

    artifacts = [
        _write(out, "summary.csv", _csv(("q", "g", "satisfied", "n", "residual"), rows)),
        _write_json(
            out,
            "summary.json",
            {
                "example": {
                    "q": q0,
                    "g": g0,
                    "contour": {"radius": p.contour_radius, "z": p.contour_z, "n": p.contour_n},
                    "piercing_phase": pierced,
                    "non_piercing_phase": spared,
                    "four_pi_qg_over_hbar_c": 4.0 * np.pi * q0 * g0 / (const.hbar * const.c),
                },
                "records": [
                    {"q": q, "g": g, "satisfied": bool(ok), "n": n, "residual": res}
                    for q, g, ok, n, res in rows
                ],
            },
        ),
        _write(
            out,
            "residuals.svg",
            heatmap(
                grid,
                title="Distance of 2qg/(hbar c) from the nearest integer",
                x_label="pole strength g",
                y_label="charge q",
                x_ticks=[f"{g:g}" for g in p.poles],
                y_ticks=[f"{q:g}" for q in p.charges],
            ),
        ),
    ]
    return artifacts, {"dirac_residual": 1e-9}


# gauge-check suites: each returns (samples run, worst deviation)


def _random_chi(rng):
    coeffs = {}
    for i, j in ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2)):
        coeffs[(i, j, 0)] = rng.uniform(-1.0, 1.0) * 3.0 / (96.0**i * 64.0**j)
    return polynomial_gauge(coeffs)


def _suite_covariance(rng, constants, samples: int) -> float:
    nx, ny = 96, 64
    mask = np.zeros((nx, ny), dtype=bool)
    mask[47:49, 31:33] = True
    grid = Grid(nx, ny, mask=mask)
    spec = FluxLine(center=(47.5, 31.5), flux=1.7)
    packet = init_gaussian_packet(grid, (26.0, 32.0), 4.5, (0.6, 0.15))
    cfg = PropagatorConfig(constants=constants, dt=0.1)
    steps = 150
    reference = Propagator(build_link_phases(grid, spec, constants), cfg).run(packet, steps)
    rho = born_density(reference)
    worst = 0.0
    for _ in range(samples):
        chi = _random_chi(rng)
        shifted = GaugeShifted(base=spec, chi=chi)
        start = gauge_transform_wavefunction(packet, chi, constants)
        moved = Propagator(build_link_phases(grid, shifted, constants), cfg).run(start, steps)
        worst = max(worst, float(np.max(np.abs(born_density(moved) - rho))))
    return worst


def _suite_stokes(rng, constants, samples: int) -> float:
    filament = FluxLine(center=(0.0, 0.0), flux=2.7)
    solenoid = FiniteSolenoid(center=(0.0, 0.0), radius=0.8, flux=-1.9)
    worst = 0.0
    for k in range(samples):
        if k % 2 == 0:
            spec = filament
            center = rng.uniform(-0.4, 0.4, 2)
            if k % 4 == 2:
                center = center + np.array([7.0, 0.0])  # non-enclosing contour
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
        lhs = line_integral(spec, contour)
        rhs = enclosed_flux_stokes(spec, contour)
        worst = max(worst, abs(lhs - rhs))
    return worst


def _min_origin_distance(verts: np.ndarray) -> float:
    a = verts[:-1]
    b = verts[1:]
    d = b - a
    t = np.clip(-np.sum(a * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
    closest = a + t[:, None] * d
    return float(np.min(np.hypot(closest[:, 0], closest[:, 1])))


def _random_detour(rng, side: int, ends: tuple) -> np.ndarray:
    a, b = ends
    while True:
        m = int(rng.integers(2, 5))
        xs = side * rng.uniform(1.2, 6.0, m)
        ys = np.sort(rng.uniform(-4.0, 4.0, m))
        verts = np.vstack([[a], np.stack([xs, ys], axis=1), [b]])
        if _min_origin_distance(verts) >= 0.3:
            return verts


def _suite_paths(rng, constants, samples: int) -> float:
    flux = 1.3
    spec = FluxLine(center=(0.0, 0.0), flux=flux)
    ends = (np.array([2.5, -3.5]), np.array([2.5, 3.5]))
    worst = 0.0
    for _ in range(samples):
        right_a = _random_detour(rng, +1, ends)
        right_b = _random_detour(rng, +1, ends)
        left = _random_detour(rng, -1, ends)
        ph_a = ab_phase(constants, spec, Path(right_a, closed=False))
        ph_b = ab_phase(constants, spec, Path(right_b, closed=False))
        ph_l = ab_phase(constants, spec, Path(left, closed=False))
        worst = max(worst, abs(ph_a - ph_b))
        loop = np.vstack([right_a, left[1:-1][::-1]])
        w = winding_number(Path(loop, closed=True), (0.0, 0.0))
        worst = max(worst, abs((ph_a - ph_l) - constants.coupling * flux * w))
    return worst


def _run_gauge_check(config: RunConfig, out: pathlib.Path) -> tuple:
    p = config.params
    const = config.constants
    suites = (
        ("gauge-covariance", _suite_covariance, p.chi_samples, 1e-12),
        ("contour-vs-surface-flux", _suite_stokes, p.contour_samples, 1e-8),
        ("path-independence", _suite_paths, p.path_samples, 1e-8),
    )
    rows = []
    detail = []
    for index, (name, fn, samples, tol) in enumerate(suites):
        rng = np.random.default_rng([config.seed, index])
        worst = fn(rng, const, samples)
        passed = worst < tol
        rows.append((name, samples, worst, tol, passed))
        detail.append(
            {
                "suite": name,
                "samples": samples,
                "max_deviation": worst,
                "tolerance": tol,
                "passed": passed,
            }
        )

    artifacts = [
        _write(
            out,
            "summary.csv",
            _csv(("suite", "samples", "max_deviation", "tolerance", "passed"), rows),
        ),
        _write_json(out, "summary.json", {"suites": detail}),
        _write(
            out,
            "deviations.svg",
            bar_chart(
                [(name, worst, tol, passed) for name, _, worst, tol, passed in rows],
                title="Invariant suites: worst deviation vs tolerance",
                value_label="deviation / tolerance (bar), dashed line = tolerance",
            ),
        ),
    ]
    if not all(r[4] for r in rows):
        failing = ", ".join(r[0] for r in rows if not r[4])
        raise AbfluxError(f"invariant suites failed: {failing}")
    return artifacts, {name: tol for name, _, _, tol, _ in rows}


_RUNNERS = {
    "double-slit": _run_double_slit,
    "flux-quant": _run_flux_quant,
    "monopole": _run_monopole,
    "gauge-check": _run_gauge_check,
}


def run(config: RunConfig) -> int:
    """Execute the configured experiment and write its artifacts."""
    if config.out_dir is None:
        raise ConfigError("no output directory set")
    out = pathlib.Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc

    t0 = time.perf_counter()
    artifacts, tolerances = _RUNNERS[config.experiment](config, out)
    elapsed = time.perf_counter() - t0
    _write_json(
        out,
        "manifest.json",
        {
            "config": config.to_dict(),
            "version": __version__,
            "threads": config.threads,
            "tolerances": tolerances,
            "artifacts": sorted(artifacts),
            "timings": {"total_seconds": elapsed},
        },
    )
    return 0


def _emit_error(out_dir, exc: BaseException) -> None:
    try:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out, "error.json", {"error": type(exc).__name__, "message": str(exc)})
    except OSError:
        pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abflux",
        description="Loop-phase experiments: flux-shifted interference, flux quantization, "
        "monopole strings, and gauge-invariance suites.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, blurb in (
        ("double-slit", "propagate a packet past a flux-threaded barrier and extract fringe shifts"),
        ("flux-quant", "trap applied flux in a ring and count fluxoid quanta"),
        ("monopole", "tabulate the charge-quantization residual over a (q, g) grid"),
        ("gauge-check", "run seeded gauge-invariance property suites"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", required=True, help="output directory for artifacts")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for independent runs")
        p.add_argument("--verbose", "-v", action="store_true", help="progress notes on stderr")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = pathlib.Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text, experiment=args.experiment)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        config = replace(
            config,
            out_dir=args.out,
            threads=args.threads,
            seed=args.seed if args.seed is not None else config.seed,
        )
        if config.seed < 0:
            raise ConfigError("seed must be non-negative")
        if args.verbose:
            print(f"running {config.experiment} into {args.out}", file=sys.stderr)
        status = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _emit_error(args.out, exc)
        return 2
    except AbfluxError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        _emit_error(args.out, exc)
        return 3
    if args.verbose:
        print("done", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
