"""Gauge-covariant wave-packet propagation on a masked 2D lattice.

Minimal coupling enters through link phases: each lattice edge carries the
angle (q / hbar c) * integral of A along the edge, and the kinetic hopping
terms are multiplied by the corresponding unit factors.  That makes gauge
covariance exact on the lattice: shifting A by grad(chi) changes every edge
angle by the endpoint difference of chi (straight-segment integrals of a
gradient telescope), which conjugates the Hamiltonian by the diagonal
unimodular factor exp(i (q / hbar c) chi).

Time stepping is Crank-Nicolson with a symmetric direction split,

    psi <- P(dt/2) Cx(dt/2) Cy(dt) Cx(dt/2) P(dt/2) psi,

where C_a(tau) = (1 + i tau H_a / 2 hbar)^{-1} (1 - i tau H_a / 2 hbar) is the
Cayley form of the one-direction kinetic Hamiltonian and P is the exact
potential phase.  Every factor is unitary, so the norm is conserved to
roundoff; the split is symmetric, so the local error stays O(dt^2).  Each
Cayley solve is one tridiagonal system per grid line.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AnchorOutsideRegion,
    GridMismatch,
    LinearSolveFailure,
    PacketOverlapsWall,
    PacketTooNarrow,
    RegionNotSimplyConnected,
    SingularEdge,
)
from .gauge_fields import (
    EPS_STRING,
    FieldSpec,
    FiniteSolenoid,
    FluxLine,
    GaugeFunction,
    GaugeShifted,
    PhysConstants,
)

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised on minimal installs
    HAVE_NUMBA = False

__all__ = [
    "Grid",
    "WaveField",
    "LinkPhases",
    "Absorber",
    "PropagatorConfig",
    "Propagator",
    "HAVE_NUMBA",
    "build_link_phases",
    "init_gaussian_packet",
    "step",
    "born_density",
    "polar_decompose",
    "phase_winding",
    "gauge_transform_wavefunction",
    "construct_ab_solution",
    "apply_hamiltonian",
    "schrodinger_residual",
    "save_wavefield",
    "load_wavefield",
]

PHASE_FLOOR = 1e-300


@dataclass
class Grid:
    """Rectangular lattice with hard-wall (Dirichlet) nodes.

    ``mask`` is True on wall nodes, which carry psi = 0 at all times.  Arrays
    are indexed [ix, iy].
    """

    nx: int
    ny: int
    dx: float = 1.0
    dy: float = 1.0
    origin: tuple = (0.0, 0.0)
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise ValueError("grid needs nx, ny >= 16")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacing must be positive")
        if self.mask is None:
            self.mask = np.zeros((self.nx, self.ny), dtype=bool)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (self.nx, self.ny):
                raise ValueError(f"mask shape {self.mask.shape} != {(self.nx, self.ny)}")
        self.origin = (float(self.origin[0]), float(self.origin[1]))

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.ny)

    def positions(self) -> np.ndarray:
        """Node coordinates, shape (nx, ny, 3) with z = 0."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y, np.zeros_like(X)], axis=-1)

    def cell_area(self) -> float:
        return self.dx * self.dy

    def same_layout(self, other: "Grid") -> bool:
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.dx == other.dx
            and self.dy == other.dy
            and self.origin == other.origin
            and bool(np.array_equal(self.mask, other.mask))
        )


@dataclass
class WaveField:
    """Complex amplitudes on a grid at one instant."""

    grid: Grid
    psi: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=np.complex128)
        if self.psi.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"psi shape {self.psi.shape} != {(self.grid.nx, self.grid.ny)}")
        if not np.all(np.isfinite(self.psi.view(np.float64))):
            raise ValueError("psi must be finite")
        if np.any(self.psi[self.grid.mask] != 0.0):
            raise ValueError("psi must vanish on hard-wall nodes")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2) * self.grid.cell_area()))

    def copy(self) -> "WaveField":
        return WaveField(self.grid, self.psi.copy(), self.time)


@dataclass
class LinkPhases:
    """Straight-edge integrals of A and the resulting hopping angles.

    ``integral_x[i, j]`` is the integral along the edge (i, j) -> (i+1, j);
    ``theta_* = coupling * integral_*``.  Angles are stored, never unit
    complex numbers, so |exp(i theta)| = 1 holds exactly.
    """

    grid: Grid
    integral_x: np.ndarray
    integral_y: np.ndarray
    coupling: float

    @property
    def theta_x(self) -> np.ndarray:
        return self.coupling * self.integral_x

    @property
    def theta_y(self) -> np.ndarray:
        return self.coupling * self.integral_y

    def plaquette_holonomy(self) -> np.ndarray:
        """Angle sum around each elementary cell, counterclockwise from (i, j)."""
        tx, ty = self.theta_x, self.theta_y
        return tx[:, :-1] + ty[1:, :] - tx[:, 1:] - ty[:-1, :]


def _turn_angles(starts: np.ndarray, ends: np.ndarray, center) -> np.ndarray:
    """Signed angle each straight edge subtends at an in-plane point."""
    u = starts[..., :2] - np.asarray(center)
    v = ends[..., :2] - np.asarray(center)
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    return np.arctan2(cross, dot)


def _gl_edge_integrals(sampler, starts, ends, gl_points):
    xg, wg = np.polynomial.legendre.leggauss(gl_points)
    s = 0.5 * (xg + 1.0)
    d = ends - starts
    total = np.zeros(starts.shape[:-1])
    for si, wi in zip(s, 0.5 * wg):
        pts = starts + si * d
        total += wi * np.sum(sampler(pts, 0.0) * d, axis=-1)
    return total


def _edge_integrals(spec: FieldSpec, starts: np.ndarray, ends: np.ndarray, gl_points: int) -> np.ndarray:
    """Integrals of A . dl along straight edges with endpoints (..., 3).

    Gauge shifts are peeled off and added as exact endpoint differences of
    chi, which is what makes lattice gauge covariance exact.  A pure flux
    line integrates to (flux / 2 pi) times the subtended angle, exactly, so
    plaquette holonomies are flux * winding to roundoff rather than to
    quadrature accuracy; everything else uses Gauss-Legendre panels.
    """
    exact = np.zeros(starts.shape[:-1])
    base = spec
    while isinstance(base, GaugeShifted):
        exact += base.chi(ends, 0.0) - base.chi(starts, 0.0)
        base = base.base
    if isinstance(base, FluxLine):
        return exact + base.flux / (2.0 * np.pi) * _turn_angles(starts, ends, base.center)
    if isinstance(base, FiniteSolenoid):
        c = np.asarray(base.center)
        lo = np.minimum(starts[..., :2], ends[..., :2])
        hi = np.maximum(starts[..., :2], ends[..., :2])
        seg_dist = np.linalg.norm(np.clip(c, lo, hi) - c, axis=-1)
        outside = seg_dist >= base.radius
        out = np.where(
            outside, base.flux / (2.0 * np.pi) * _turn_angles(starts, ends, base.center), 0.0
        )
        if not np.all(outside):
            inner = _gl_edge_integrals(base.vector_potential, starts[~outside], ends[~outside], gl_points)
            out[~outside] = inner
        return exact + out
    return exact + _gl_edge_integrals(base.vector_potential, starts, ends, gl_points)


def _edge_min_distance(spec: FieldSpec, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Lower bound on the distance from each edge to the singular set."""
    base = spec
    while isinstance(base, GaugeShifted):
        base = base.base
    mids = 0.5 * (starts + ends)
    d = np.minimum(base.singular_distance(starts), base.singular_distance(ends))
    d = np.minimum(d, base.singular_distance(mids))
    if isinstance(base, FluxLine):
        # exact in-plane distance from an axis-aligned edge to the filament
        c = np.asarray(base.center)
        lo = np.minimum(starts[..., :2], ends[..., :2])
        hi = np.maximum(starts[..., :2], ends[..., :2])
        nearest = np.clip(c, lo, hi)
        d = np.minimum(d, np.linalg.norm(nearest - c, axis=-1))
    return d


def build_link_phases(
    grid: Grid,
    spec: FieldSpec,
    constants: PhysConstants,
    *,
    gl_points: int = 4,
    eps: float = EPS_STRING,
) -> LinkPhases:
    """Integrate A along every lattice edge and scale by the coupling.

    Edges joining two wall nodes never enter the dynamics, so a singular
    filament crossing one of them is tolerated (the integral is set to 0).
    A singular filament within ``eps`` of any live edge raises SingularEdge.
    """
    pos = grid.positions()
    sx, ex = pos[:-1, :, :], pos[1:, :, :]
    sy, ey = pos[:, :-1, :], pos[:, 1:, :]

    dead_x = grid.mask[:-1, :] & grid.mask[1:, :]
    dead_y = grid.mask[:, :-1] & grid.mask[:, 1:]
    dist_x = _edge_min_distance(spec, sx, ex)
    dist_y = _edge_min_distance(spec, sy, ey)
    bad_x = (dist_x < eps) & ~dead_x
    bad_y = (dist_y < eps) & ~dead_y
    if np.any(bad_x) or np.any(bad_y):
        where = np.argwhere(bad_x)
        axis = "x"
        if not len(where):
            where = np.argwhere(bad_y)
            axis = "y"
        i, j = where[0]
        raise SingularEdge(f"live {axis}-edge at ({i}, {j}) passes within eps={eps:.1e} of a singular filament")

    with np.errstate(divide="ignore", invalid="ignore"):
        ix = _edge_integrals(spec, sx, ex, gl_points)
        iy = _edge_integrals(spec, sy, ey, gl_points)
    ix[dead_x & ~np.isfinite(ix)] = 0.0
    iy[dead_y & ~np.isfinite(iy)] = 0.0
    if not (np.all(np.isfinite(ix)) and np.all(np.isfinite(iy))):
        raise SingularEdge("non-finite edge integral on a live edge")
    return LinkPhases(grid=grid, integral_x=ix, integral_y=iy, coupling=constants.coupling)


def init_gaussian_packet(grid: Grid, center, sigma: float, k0) -> WaveField:
    """Normalized Gaussian wave packet exp(-|r-c|^2 / 4 sigma^2 + i k0 . r)."""
    if sigma < 2.0 * max(grid.dx, grid.dy):
        raise PacketTooNarrow(f"sigma={sigma} under-resolves the lattice (need >= {2 * max(grid.dx, grid.dy)})")
    cx, cy = float(center[0]), float(center[1])
    kx, ky = float(k0[0]), float(k0[1])
    lo_x, hi_x = grid.x[0], grid.x[-1]
    lo_y, hi_y = grid.y[0], grid.y[-1]
    if (
        cx - 5 * sigma < lo_x
        or cx + 5 * sigma > hi_x
        or cy - 5 * sigma < lo_y
        or cy + 5 * sigma > hi_y
    ):
        warnings.warn("packet support within 5 sigma of the domain boundary", stacklevel=2)
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    r2 = (X - cx) ** 2 + (Y - cy) ** 2
    psi = np.exp(-r2 / (4.0 * sigma**2) + 1j * (kx * X + ky * Y))
    total = float(np.sum(np.abs(psi) ** 2))
    on_wall = float(np.sum(np.abs(psi[grid.mask]) ** 2))
    if on_wall > 1e-6 * total:
        raise PacketOverlapsWall(f"{on_wall / total:.2e} of the packet norm lies on wall nodes")
    psi[grid.mask] = 0.0
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.cell_area())
    return WaveField(grid=grid, psi=psi, time=0.0)


def born_density(field: WaveField) -> np.ndarray:
    """|psi|^2 per node; integrates (times cell area) to the squared norm."""
    return np.abs(field.psi) ** 2


def polar_decompose(field: WaveField) -> tuple[np.ndarray, np.ndarray]:
    """Split psi = R exp(iS) with S in (-pi, pi]; S = 0 where R < 1e-300."""
    R = np.abs(field.psi)
    S = np.angle(field.psi)
    S[R < PHASE_FLOOR] = 0.0
    return R, S


def phase_winding(phases: np.ndarray) -> float:
    """Total phase accumulated around a closed loop of node phases, in radians.

    Nearest-neighbor differences are re-wrapped to (-pi, pi] before summing,
    so the result is insensitive to the branch of the stored phases.
    """
    p = np.asarray(phases, dtype=float)
    d = np.diff(np.append(p, p[0]))
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    # wrap ties (-pi) to +pi so orientation conventions stay consistent
    d[d == -np.pi] = np.pi
    return float(np.sum(d))


def gauge_transform_wavefunction(field: WaveField, chi: GaugeFunction, constants: PhysConstants) -> WaveField:
    """psi' = exp(i (q / hbar c) chi(r, t)) psi at the field's current time."""
    lam = constants.coupling * chi(field.grid.positions(), field.time)
    return WaveField(field.grid, field.psi * np.exp(1j * lam), field.time)


def construct_ab_solution(
    psi0: WaveField,
    spec: FieldSpec,
    anchor,
    region: np.ndarray,
    constants: PhysConstants,
    *,
    tol: float = 1e-8,
) -> WaveField:
    """Multiply psi0 by exp(i Lambda), Lambda the lattice path integral of
    (q / hbar c) A from ``anchor``, inside a simply connected ``region``.

    Lambda is accumulated over a spanning tree of the region's live edges;
    every non-tree edge is then checked for consistency, which is exactly the
    statement that all loop holonomies inside the region vanish.  Nodes
    outside the region are left untouched.
    """
    grid = psi0.grid
    region = np.asarray(region, dtype=bool)
    if region.shape != (grid.nx, grid.ny):
        raise ValueError("region shape does not match the grid")
    if np.any(region & grid.mask):
        raise ValueError("region must not include wall nodes")
    ai, aj = int(anchor[0]), int(anchor[1])
    if not (0 <= ai < grid.nx and 0 <= aj < grid.ny) or not region[ai, aj]:
        raise AnchorOutsideRegion(f"anchor ({ai}, {aj}) is not inside the region")

    links = build_link_phases(grid, spec, constants)
    tx, ty = links.theta_x, links.theta_y

    lam = np.zeros((grid.nx, grid.ny))
    seen = np.zeros((grid.nx, grid.ny), dtype=bool)
    seen[ai, aj] = True
    stack = [(ai, aj)]
    while stack:
        i, j = stack.pop()
        base = lam[i, j]
        if i + 1 < grid.nx and region[i + 1, j] and not seen[i + 1, j]:
            lam[i + 1, j] = base + tx[i, j]
            seen[i + 1, j] = True
            stack.append((i + 1, j))
        if i > 0 and region[i - 1, j] and not seen[i - 1, j]:
            lam[i - 1, j] = base - tx[i - 1, j]
            seen[i - 1, j] = True
            stack.append((i - 1, j))
        if j + 1 < grid.ny and region[i, j + 1] and not seen[i, j + 1]:
            lam[i, j + 1] = base + ty[i, j]
            seen[i, j + 1] = True
            stack.append((i, j + 1))
        if j > 0 and region[i, j - 1] and not seen[i, j - 1]:
            lam[i, j - 1] = base - ty[i, j - 1]
            seen[i, j - 1] = True
            stack.append((i, j - 1))
    if not np.all(seen[region]):
        raise ValueError("region is not connected from the anchor")

    # every region edge must agree with the tree phases: loop holonomies vanish
    in_x = region[:-1, :] & region[1:, :]
    mis_x = np.abs(_wrap_angle(lam[1:, :] - lam[:-1, :] - tx))[in_x]
    in_y = region[:, :-1] & region[:, 1:]
    mis_y = np.abs(_wrap_angle(lam[:, 1:] - lam[:, :-1] - ty))[in_y]
    worst = max(mis_x.max(initial=0.0), mis_y.max(initial=0.0))
    if worst > tol:
        raise RegionNotSimplyConnected(f"loop holonomy up to {worst:.3e} rad inside the region")

    psi = psi0.psi.copy()
    psi[region] = psi[region] * np.exp(1j * lam[region])
    return WaveField(grid, psi, psi0.time)


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class Absorber:
    """Exponential damping layer with a cubic ramp over ``width`` cells."""

    width: int = 24
    strength: float = 0.05

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("absorber width must be at least one cell")
        if not self.strength > 0:
            raise ValueError("absorber strength must be positive")

    def damping(self, grid: Grid) -> np.ndarray:
        i = np.arange(grid.nx)[:, None]
        j = np.arange(grid.ny)[None, :]
        d = np.minimum.reduce(
            [
                np.broadcast_to(i, (grid.nx, grid.ny)),
                np.broadcast_to(grid.nx - 1 - i, (grid.nx, grid.ny)),
                np.broadcast_to(j, (grid.nx, grid.ny)),
                np.broadcast_to(grid.ny - 1 - j, (grid.nx, grid.ny)),
            ]
        )
        s = np.clip((self.width - d) / self.width, 0.0, 1.0)
        return np.exp(-self.strength * s**3)


@dataclass
class PropagatorConfig:
    """Time-stepping controls; the scheme is Crank-Nicolson with a split step."""

    constants: PhysConstants = dataclass_field(default_factory=PhysConstants)
    dt: float = 0.1
    scheme: str = "CN-ADI"
    absorber: Optional[Absorber] = None
    potential: Optional[Callable] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme != "CN-ADI":
            raise ValueError(f"unknown scheme {self.scheme!r}")


if HAVE_NUMBA:

    @njit(cache=True)
    def _sweep_y_numba(psi, dp, up, sp, inv_w, cstar):  # pragma: no cover - checked via outputs
        nx, ny = psi.shape
        buf = np.empty(ny, dtype=np.complex128)
        for i in range(nx):
            row = psi[i]
            buf[0] = np.conj(dp[i, 0]) * row[0] - up[i, 0] * row[1]
            for j in range(1, ny - 1):
                buf[j] = np.conj(dp[i, j]) * row[j] - sp[i, j] * row[j - 1] - up[i, j] * row[j + 1]
            buf[ny - 1] = np.conj(dp[i, ny - 1]) * row[ny - 1] - sp[i, ny - 1] * row[ny - 2]
            buf[0] *= inv_w[i, 0]
            for j in range(1, ny):
                buf[j] = (buf[j] - sp[i, j] * buf[j - 1]) * inv_w[i, j]
            for j in range(ny - 2, -1, -1):
                buf[j] -= cstar[i, j] * buf[j + 1]
            for j in range(ny):
                row[j] = buf[j]

    @njit(cache=True)
    def _sweep_x_numba(psi, dp, up, sp, inv_w, cstar):  # pragma: no cover - checked via outputs
        nx, ny = psi.shape
        B = 16
        buf = np.empty((nx, B), dtype=np.complex128)
        for j0 in range(0, ny, B):
            b = min(B, ny - j0)
            for t in range(b):
                j = j0 + t
                buf[0, t] = np.conj(dp[0, j]) * psi[0, j] - up[0, j] * psi[1, j]
            for i in range(1, nx - 1):
                for t in range(b):
                    j = j0 + t
                    buf[i, t] = (
                        np.conj(dp[i, j]) * psi[i, j]
                        - sp[i, j] * psi[i - 1, j]
                        - up[i, j] * psi[i + 1, j]
                    )
            for t in range(b):
                j = j0 + t
                buf[nx - 1, t] = np.conj(dp[nx - 1, j]) * psi[nx - 1, j] - sp[nx - 1, j] * psi[nx - 2, j]
            for t in range(b):
                buf[0, t] *= inv_w[0, j0 + t]
            for i in range(1, nx):
                for t in range(b):
                    buf[i, t] = (buf[i, t] - sp[i, j0 + t] * buf[i - 1, t]) * inv_w[i, j0 + t]
            for i in range(nx - 2, -1, -1):
                for t in range(b):
                    buf[i, t] -= cstar[i, j0 + t] * buf[i + 1, t]
            for i in range(nx):
                for t in range(b):
                    psi[i, j0 + t] = buf[i, t]


def _sweep_numpy(psi: np.ndarray, bands: "_SweepBands") -> None:
    dp, up, sp, inv_w, cstar = bands.dp, bands.up, bands.sp, bands.inv_w, bands.cstar
    if bands.axis == 0:
        rhs = np.conj(dp) * psi
        rhs[1:, :] -= sp[1:, :] * psi[:-1, :]
        rhs[:-1, :] -= up[:-1, :] * psi[1:, :]
        n = psi.shape[0]
        rhs[0, :] *= inv_w[0, :]
        for i in range(1, n):
            rhs[i, :] = (rhs[i, :] - sp[i, :] * rhs[i - 1, :]) * inv_w[i, :]
        for i in range(n - 2, -1, -1):
            rhs[i, :] -= cstar[i, :] * rhs[i + 1, :]
    else:
        rhs = np.conj(dp) * psi
        rhs[:, 1:] -= sp[:, 1:] * psi[:, :-1]
        rhs[:, :-1] -= up[:, :-1] * psi[:, 1:]
        n = psi.shape[1]
        rhs[:, 0] *= inv_w[:, 0]
        for j in range(1, n):
            rhs[:, j] = (rhs[:, j] - sp[:, j] * rhs[:, j - 1]) * inv_w[:, j]
        for j in range(n - 2, -1, -1):
            rhs[:, j] -= cstar[:, j] * rhs[:, j + 1]
    psi[:] = rhs


class _SweepBands:
    """Cayley factors (1 + i g H)^{-1} (1 - i g H) for one lattice direction.

    All arrays are stored in grid layout (nx, ny); ``axis`` selects which
    index the tridiagonal runs along.  Wall rows are identity rows and
    wall-adjacent hoppings vanish, so each wall-free run of nodes forms an
    independent Hermitian tridiagonal block; (1 - i g H) is applied via
    dm = conj(dp), um = -up, sm = -sp.
    """

    def __init__(self, theta: np.ndarray, mask: np.ndarray, kin: float, gamma: float, axis: int):
        nx, ny = mask.shape
        live = ~mask
        hop = np.zeros((nx, ny), dtype=np.complex128)
        if axis == 0:
            hop[:-1, :] = -kin * np.exp(-1j * theta) * (live[:-1, :] & live[1:, :])
        else:
            hop[:, :-1] = -kin * np.exp(-1j * theta) * (live[:, :-1] & live[:, 1:])

        ig = 1j * gamma
        self.axis = axis
        self.dp = np.where(live, 1.0 + ig * 2.0 * kin, 1.0 + 0.0j)
        self.up = ig * hop  # couples node n to node n+1 along axis
        self.sp = np.zeros_like(hop)
        if axis == 0:
            self.sp[1:, :] = ig * np.conj(hop[:-1, :])
        else:
            self.sp[:, 1:] = ig * np.conj(hop[:, :-1])

        w = np.empty_like(self.dp)
        cstar = np.zeros_like(self.dp)
        if axis == 0:
            w[0, :] = self.dp[0, :]
            for i in range(1, nx):
                cstar[i - 1, :] = self.up[i - 1, :] / w[i - 1, :]
                w[i, :] = self.dp[i, :] - self.sp[i, :] * cstar[i - 1, :]
        else:
            w[:, 0] = self.dp[:, 0]
            for j in range(1, ny):
                cstar[:, j - 1] = self.up[:, j - 1] / w[:, j - 1]
                w[:, j] = self.dp[:, j] - self.sp[:, j] * cstar[:, j - 1]
        if np.any(np.abs(w) < 1e-300):
            raise LinearSolveFailure("tridiagonal pivot underflow")
        self.inv_w = 1.0 / w
        self.cstar = cstar

    def apply(self, psi: np.ndarray, use_numba: bool) -> None:
        if use_numba:
            if self.axis == 0:
                _sweep_x_numba(psi, self.dp, self.up, self.sp, self.inv_w, self.cstar)
            else:
                _sweep_y_numba(psi, self.dp, self.up, self.sp, self.inv_w, self.cstar)
        else:
            _sweep_numpy(psi, self)


class Propagator:
    """Reusable stepping engine for one (grid, links, config) combination."""

    def __init__(self, links: LinkPhases, config: PropagatorConfig, *, use_numba: Optional[bool] = None):
        grid = links.grid
        self.grid = grid
        self.links = links
        self.config = config
        c = config.constants
        quality = config.dt * c.hbar / (c.mass * min(grid.dx, grid.dy) ** 2)
        if quality > 1.0:
            warnings.warn(
                f"dt*hbar/(m dx^2) = {quality:.2f} is large; accuracy (not stability) degrades",
                stacklevel=2,
            )
        if use_numba is None:
            use_numba = HAVE_NUMBA
        if use_numba and not HAVE_NUMBA:
            raise ValueError("numba requested but not importable")
        self.uses_numba = bool(use_numba)

        kinx = c.hbar**2 / (2.0 * c.mass * grid.dx**2)
        kiny = c.hbar**2 / (2.0 * c.mass * grid.dy**2)
        gamma_half = 0.5 * config.dt / (2.0 * c.hbar)
        gamma_full = config.dt / (2.0 * c.hbar)
        self._cx = _SweepBands(links.theta_x, grid.mask, kinx, gamma_half, axis=0)
        self._cy = _SweepBands(links.theta_y, grid.mask, kiny, gamma_full, axis=1)

        if config.potential is not None:
            V = np.asarray(config.potential(grid.positions()), dtype=float)
            if V.shape != (grid.nx, grid.ny):
                raise ValueError("potential sampler must return one value per node")
        else:
            V = np.zeros((grid.nx, grid.ny))
        self._vphase_half = np.exp(-1j * V * (0.5 * config.dt) / c.hbar)
        self._vphase_half[grid.mask] = 1.0
        self._damp = config.absorber.damping(grid) if config.absorber is not None else None

    def step(self, field: WaveField, n_steps: int = 1) -> WaveField:
        """Advance ``n_steps`` and return a new WaveField."""
        return self.run(field, n_steps)

    def run(self, field: WaveField, n_steps: int, *, each: Optional[Callable] = None) -> WaveField:
        """Advance up to ``n_steps``, streaming the state to an observer.

        After every step ``each(step_index, psi)`` is called with the live
        array (a view; do not mutate).  A truthy return stops the run early.
        The returned WaveField carries the time actually reached.
        """
        if not field.grid.same_layout(self.grid):
            raise GridMismatch("field grid does not match the propagator grid")
        psi = field.psi.copy()
        done = 0
        for s in range(int(n_steps)):
            psi *= self._vphase_half
            self._cx.apply(psi, self.uses_numba)
            self._cy.apply(psi, self.uses_numba)
            self._cx.apply(psi, self.uses_numba)
            psi *= self._vphase_half
            if self._damp is not None:
                psi *= self._damp
            psi[self.grid.mask] = 0.0
            done = s + 1
            if each is not None and each(s, psi):
                break
        return WaveField(self.grid, psi, field.time + done * self.config.dt)


def step(field: WaveField, links: LinkPhases, config: PropagatorConfig, n_steps: int = 1) -> WaveField:
    """One-shot convenience wrapper around :class:`Propagator`."""
    return Propagator(links, config).step(field, n_steps)


def apply_hamiltonian(field: WaveField, links: LinkPhases, config: PropagatorConfig) -> np.ndarray:
    """H psi for the discrete minimally-coupled Hamiltonian (0 on wall rows)."""
    grid = field.grid
    if not grid.same_layout(links.grid):
        raise GridMismatch("links were built for a different grid")
    c = config.constants
    kinx = c.hbar**2 / (2.0 * c.mass * grid.dx**2)
    kiny = c.hbar**2 / (2.0 * c.mass * grid.dy**2)
    psi = field.psi
    live = ~grid.mask
    ux = np.exp(-1j * links.theta_x) * (live[:-1, :] & live[1:, :])
    uy = np.exp(-1j * links.theta_y) * (live[:, :-1] & live[:, 1:])

    out = np.zeros_like(psi)
    out += 2.0 * (kinx + kiny) * psi
    out[:-1, :] -= kinx * ux * psi[1:, :]
    out[1:, :] -= kinx * np.conj(ux) * psi[:-1, :]
    out[:, :-1] -= kiny * uy * psi[:, 1:]
    out[:, 1:] -= kiny * np.conj(uy) * psi[:, :-1]
    if config.potential is not None:
        V = np.asarray(config.potential(grid.positions()), dtype=float)
        out += V * psi
    out[grid.mask] = 0.0
    return out


def schrodinger_residual(
    snapshots: Sequence[WaveField],
    links: LinkPhases,
    config: PropagatorConfig,
    *,
    region: Optional[np.ndarray] = None,
) -> float:
    """|| i hbar (psi_+ - psi_-) / 2 dt - H psi_0 || / || H psi_0 ||.

    ``snapshots`` are three equally spaced fields.  With an explicit
    ``region`` the norms run over region nodes whose full stencil lies inside
    the region (one-node erosion), since H is meaningless across its border.
    """
    if len(snapshots) != 3:
        raise ValueError("need exactly three snapshots")
    a, b, c_ = snapshots
    for f in (b, c_):
        if not f.grid.same_layout(a.grid):
            raise GridMismatch("snapshots live on different grids")
    dt1 = b.time - a.time
    dt2 = c_.time - b.time
    if dt1 <= 0 or abs(dt2 - dt1) > 1e-9 * dt1:
        raise GridMismatch(f"snapshots not equally spaced in time: {dt1} vs {dt2}")

    hbar = config.constants.hbar
    deriv = 1j * hbar * (c_.psi - a.psi) / (2.0 * dt1)
    h_mid = apply_hamiltonian(b, links, config)

    if region is None:
        sel = ~a.grid.mask
    else:
        region = np.asarray(region, dtype=bool)
        if region.shape != a.psi.shape:
            raise GridMismatch("region shape does not match the grid")
        sel = region.copy()
        sel[:1, :] = False
        sel[-1:, :] = False
        sel[:, :1] = False
        sel[:, -1:] = False
        inner = sel.copy()
        inner[1:-1, 1:-1] = (
            sel[1:-1, 1:-1]
            & sel[:-2, 1:-1]
            & sel[2:, 1:-1]
            & sel[1:-1, :-2]
            & sel[1:-1, 2:]
        )
        sel = inner
    num = np.linalg.norm((deriv - h_mid)[sel])
    den = np.linalg.norm(h_mid[sel])
    if den == 0.0:
        raise ValueError("H psi vanishes on the evaluation region")
    return float(num / den)


_WAVEFIELD_MAGIC = b"ABWF"


def save_wavefield(field: WaveField, path) -> None:
    """Binary snapshot: header, (re, im) float64 pairs, wall mask bytes."""
    grid = field.grid
    header = struct.pack(
        "<4sIiiddddd",
        _WAVEFIELD_MAGIC,
        1,
        grid.nx,
        grid.ny,
        grid.dx,
        grid.dy,
        grid.origin[0],
        grid.origin[1],
        field.time,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        inter = np.empty((grid.nx, grid.ny, 2))
        inter[..., 0] = field.psi.real
        inter[..., 1] = field.psi.imag
        fh.write(inter.tobytes())
        fh.write(np.packbits(grid.mask.astype(np.uint8)).tobytes())


def load_wavefield(path) -> WaveField:
    header_fmt = "<4sIiiddddd"
    header_size = struct.calcsize(header_fmt)
    with open(path, "rb") as fh:
        magic, version, nx, ny, dx, dy, ox, oy, time = struct.unpack(header_fmt, fh.read(header_size))
        if magic != _WAVEFIELD_MAGIC or version != 1:
            raise ValueError("not a wavefield snapshot")
        inter = np.frombuffer(fh.read(nx * ny * 2 * 8), dtype=np.float64).reshape(nx, ny, 2)
        nbits = nx * ny
        mask_bytes = fh.read((nbits + 7) // 8)
    mask = np.unpackbits(np.frombuffer(mask_bytes, dtype=np.uint8), count=nbits).astype(bool).reshape(nx, ny)
    grid = Grid(nx=nx, ny=ny, dx=dx, dy=dy, origin=(ox, oy), mask=mask)
    psi = inter[..., 0] + 1j * inter[..., 1]
    return WaveField(grid=grid, psi=psi, time=time)
