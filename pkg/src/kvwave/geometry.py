"""
Tensor-product grids and localized damping coefficient fields.

Fields are sampled on the full node lattice (boundary included) so that the
face averages next to the Dirichlet boundary are well defined. Interior
quantities are flattened in lexicographic (C) order, first axis slowest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

PRESETS = ("interval_1d", "indicator_1d", "annulus_2d", "mesh_2d")


class GeometryError(ValueError):
    """Invalid grid, region or preset parameters."""


@dataclass(frozen=True)
class Grid:
    dim: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (n + 1) for L, n in zip(self.lengths, self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum(L * L for L in self.lengths)))

    def axes(self, boundary: bool = False) -> list[np.ndarray]:
        """Node coordinates per axis, optionally including the two boundary nodes."""
        out = []
        for L, n, h in zip(self.lengths, self.counts, self.h):
            if boundary:
                out.append(np.linspace(0.0, L, n + 2))
            else:
                out.append(h * np.arange(1, n + 1))
        return out

    def mesh(self, boundary: bool = False) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(boundary), indexing="ij")

    def points(self) -> np.ndarray:
        """Interior node coordinates, shape (size, dim)."""
        return np.stack([c.ravel() for c in self.mesh()], axis=1)


def build_grid(dim: int, lengths, counts) -> Grid:
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    counts = tuple(int(n) for n in np.atleast_1d(counts))
    if dim not in (1, 2):
        raise GeometryError(f"grid dim must be 1 or 2, got {dim}")
    if len(lengths) != dim or len(counts) != dim:
        raise GeometryError(f"need {dim} lengths and counts, got {len(lengths)} and {len(counts)}")
    if any(not np.isfinite(L) or L <= 0 for L in lengths):
        raise GeometryError(f"lengths must be positive, got {lengths}")
    if any(n < 3 for n in counts):
        raise GeometryError(f"counts must be >= 3 per axis, got {counts}")
    return Grid(dim, lengths, counts)


@dataclass(frozen=True)
class RegionSpec:
    """The undamped set A described by a signed distance (negative inside A)."""

    kind: str
    params: dict
    epsilon: float
    sdf: Callable[..., np.ndarray] = field(repr=False, compare=False)
    clearance: float = np.inf  # dist(A, boundary of the domain)

    def in_A(self, coords) -> np.ndarray:
        return self.sdf(*coords) <= 0.0

    def in_collar(self, coords) -> np.ndarray:
        return np.abs(self.sdf(*coords)) < self.epsilon


@dataclass(frozen=True)
class CoefficientField:
    a_node: np.ndarray
    a_face: tuple[np.ndarray, ...]
    b_node: np.ndarray
    rho_node: np.ndarray | None = None
    kappa_face: tuple[np.ndarray, ...] | None = None
    a0: float = 0.0
    b0: float = 0.0
    discontinuous: bool = False
    damped_fraction: float = 0.0

    @property
    def has_kv(self) -> bool:
        return bool(np.any(self.a_node > 0) or any(np.any(f > 0) for f in self.a_face))

    @property
    def has_friction(self) -> bool:
        return bool(np.any(self.b_node > 0))


def face_coefficient(a_node: np.ndarray, axis: int = 0) -> np.ndarray:
    """Arithmetic mean of neighbouring nodal values along ``axis``.

    ``a_node`` must include the boundary layer, so the result has one entry
    fewer than the input along ``axis``.
    """
    a_node = np.asarray(a_node, dtype=float)
    if np.any(a_node < 0):
        raise GeometryError("face_coefficient needs a nonnegative field")
    lo = [slice(None)] * a_node.ndim
    hi = [slice(None)] * a_node.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (a_node[tuple(lo)] + a_node[tuple(hi)])


def _faces(full: np.ndarray) -> tuple[np.ndarray, ...]:
    # keep only faces that touch at least one interior node along each axis
    out = []
    for axis in range(full.ndim):
        f = face_coefficient(full, axis)
        sl = [slice(1, -1)] * full.ndim
        sl[axis] = slice(None)
        out.append(np.ascontiguousarray(f[tuple(sl)]))
    return tuple(out)


# signed distance functions, negative inside A


def sdf_intervals(intervals) -> Callable[[np.ndarray], np.ndarray]:
    intervals = [(float(lo), float(hi)) for lo, hi in intervals]

    def sdf(x):
        return np.min([np.maximum(lo - x, x - hi) for lo, hi in intervals], axis=0)

    return sdf


def sdf_disk(center, radius: float):
    cx, cy = map(float, center)

    def sdf(x, y):
        return np.hypot(x - cx, y - cy) - radius

    return sdf


def sdf_box(lo, hi):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    c = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)

    def sdf(x, y):
        qx = np.abs(x - c[0]) - half[0]
        qy = np.abs(y - c[1]) - half[1]
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        return outside + inside

    return sdf


def sdf_mesh_cells(lengths, cells, strip_width: float):
    """A = lattice cells left over after removing strips of ``strip_width``
    centred on the mesh lines (domain edges included)."""
    Lx, Ly = map(float, lengths)
    mx, my = map(int, cells)
    half = 0.5 * strip_width

    def line_dist(x, L, m):
        pitch = L / m
        r = np.mod(x, pitch)
        return np.minimum(r, pitch - r)

    def sdf(x, y):
        # exact inside each cell: distance to the nearest strip edge
        dx = line_dist(x, Lx, mx) - half
        dy = line_dist(y, Ly, my) - half
        outside = np.hypot(np.maximum(-dx, 0.0), np.maximum(-dy, 0.0))
        inside = -np.minimum(dx, dy)
        return np.where((dx > 0) & (dy > 0), inside, outside)

    return sdf


def _ramp_profile(phi: np.ndarray, a0: float, ramp: float) -> np.ndarray:
    if ramp == 0.0:
        return np.where(phi > 0.0, a0, 0.0)
    return a0 * np.clip(phi / ramp, 0.0, 1.0)


def _smooth_bump(grid: Grid, coords, amp: float) -> np.ndarray:
    # 1 + amp * prod sin^2(pi x / L): smooth, equal to 1 on the boundary
    out = np.ones_like(coords[0])
    if amp == 0.0:
        return out
    w = np.ones_like(coords[0])
    for c, L in zip(coords, grid.lengths):
        w = w * np.sin(np.pi * c / L) ** 2
    return out + amp * w


def _region_for(grid: Grid, preset: str, params: dict, eps: float) -> RegionSpec:
    if preset in ("interval_1d", "indicator_1d"):
        if grid.dim != 1:
            raise GeometryError(f"preset {preset} needs a 1D grid")
        L = grid.lengths[0]
        intervals = params.get("intervals") or [params.get("interval", (0.4 * L, 0.6 * L))]
        intervals = sorted((float(lo), float(hi)) for lo, hi in intervals)
        for lo, hi in intervals:
            if not lo < hi:
                raise GeometryError(f"empty subinterval [{lo}, {hi}]")
        clearance = min(intervals[0][0], L - intervals[-1][1])
        return RegionSpec(preset, {"intervals": intervals}, eps, sdf_intervals(intervals), clearance)

    if preset == "annulus_2d":
        if grid.dim != 2:
            raise GeometryError("preset annulus_2d needs a 2D grid")
        Lx, Ly = grid.lengths
        shape = params.get("shape", "disk")
        if shape == "disk":
            center = tuple(params.get("center", (0.5 * Lx, 0.5 * Ly)))
            r = float(params.get("radius", 0.25 * min(Lx, Ly)))
            if r <= 0:
                raise GeometryError("disk radius must be positive")
            clearance = min(center[0] - r, Lx - center[0] - r, center[1] - r, Ly - center[1] - r)
            return RegionSpec(preset, {"shape": shape, "center": center, "radius": r},
                              eps, sdf_disk(center, r), clearance)
        if shape == "rectangle":
            lo = tuple(params.get("lo", (0.25 * Lx, 0.25 * Ly)))
            hi = tuple(params.get("hi", (0.75 * Lx, 0.75 * Ly)))
            if not (lo[0] < hi[0] and lo[1] < hi[1]):
                raise GeometryError("rectangle needs lo < hi")
            clearance = min(lo[0], lo[1], Lx - hi[0], Ly - hi[1])
            return RegionSpec(preset, {"shape": shape, "lo": lo, "hi": hi},
                              eps, sdf_box(lo, hi), clearance)
        raise GeometryError(f"unknown annulus_2d shape {shape!r}")

    if preset == "mesh_2d":
        if grid.dim != 2:
            raise GeometryError("preset mesh_2d needs a 2D grid")
        cells = tuple(int(c) for c in params.get("cells", (4, 4)))
        w = float(params.get("strip_width", 0.05 * min(grid.lengths)))
        pitch = min(L / m for L, m in zip(grid.lengths, cells))
        if w <= 0 or w >= pitch:
            raise GeometryError(f"strip_width must lie in (0, {pitch})")
        return RegionSpec(preset, {"cells": cells, "strip_width": w}, eps,
                          sdf_mesh_cells(grid.lengths, cells, w), 0.5 * w)

    raise GeometryError(f"unknown preset {preset!r}; expected one of {PRESETS}")


def build_damping_preset(grid: Grid, preset: str, params: dict | None = None
                         ) -> tuple[RegionSpec, CoefficientField]:
    """Build the undamped region A and the fields a, b (and optional rho, K).

    Recognized ``params``: ``a0``, ``b0``, ``epsilon``, ``ramp`` (default
    ``epsilon/2``; forced to 0 for ``indicator_1d``), the region parameters of
    the preset, and ``rho_amp`` / ``kappa_amp`` for the variable-coefficient
    operator.
    """
    params = dict(params or {})
    a0 = float(params.get("a0", 1.0))
    b0 = float(params.get("b0", 1.0))
    eps = float(params.get("epsilon", 0.1 * min(grid.lengths)))
    if preset == "indicator_1d":
        ramp = 0.0
    else:
        ramp = params.get("ramp")
        ramp = 0.5 * eps if ramp is None else float(ramp)
    if a0 <= 0:
        raise GeometryError("a0 must be positive")
    if b0 < 0:
        raise GeometryError("b0 must be nonnegative")
    if eps <= 0:
        raise GeometryError("epsilon must be positive")
    if not 0.0 <= ramp <= eps:
        raise GeometryError(f"ramp width must lie in [0, epsilon={eps}], got {ramp}")

    region = _region_for(grid, preset, params, eps)
    if region.clearance <= 0:
        raise GeometryError("the undamped set A touches the domain boundary")
    if eps >= region.clearance:
        raise GeometryError(
            f"collar V_eps leaves the domain: epsilon={eps} >= dist(A, boundary)={region.clearance:.6g}")

    full = grid.mesh(boundary=True)
    phi_full = region.sdf(*full)
    a_full = _ramp_profile(phi_full, a0, ramp)
    inner = tuple(slice(1, -1) for _ in range(grid.dim))
    phi = phi_full[inner]
    a_node = a_full[inner].ravel()
    b_node = np.where(np.abs(phi) < eps, b0, 0.0).ravel()
    if not np.any(phi <= 0):
        raise GeometryError("the undamped set A contains no grid node; refine the grid")
    if np.all(phi <= 0):
        raise GeometryError("the damped set is empty")

    rho_amp = float(params.get("rho_amp", 0.0))
    kappa_amp = float(params.get("kappa_amp", 0.0))
    if rho_amp < 0 or kappa_amp < 0:
        raise GeometryError("rho_amp and kappa_amp must be nonnegative")
    rho_node = None
    kappa_face = None
    if rho_amp > 0:
        rho_node = _smooth_bump(grid, full, rho_amp)[inner].ravel()
    if kappa_amp > 0:
        kappa_face = _faces(_smooth_bump(grid, full, kappa_amp))

    coeffs = CoefficientField(
        a_node=a_node,
        a_face=_faces(a_full),
        b_node=b_node,
        rho_node=rho_node,
        kappa_face=kappa_face,
        a0=a0,
        b0=b0,
        discontinuous=ramp == 0.0,
        damped_fraction=float(np.mean(phi > 0)),
    )
    return region, coeffs


def uniform_field(grid: Grid, a: float = 0.0, b: float = 0.0) -> CoefficientField:
    """Constant coefficients everywhere (a = 0 gives the undamped wave)."""
    full = np.full(tuple(n + 2 for n in grid.counts), float(a))
    return CoefficientField(
        a_node=np.full(grid.size, float(a)),
        a_face=_faces(full),
        b_node=np.full(grid.size, float(b)),
        a0=float(a),
        b0=float(b),
        damped_fraction=1.0 if a > 0 else 0.0,
    )


def field_from_function(grid: Grid, a_fn, b_fn=None) -> CoefficientField:
    """Coefficients from callables of the node coordinates (boundary included)."""
    full = grid.mesh(boundary=True)
    inner = tuple(slice(1, -1) for _ in range(grid.dim))
    a_full = np.broadcast_to(np.asarray(a_fn(*full), float), full[0].shape)
    if b_fn is None:
        b_node = np.zeros(grid.size)
    else:
        b_node = np.broadcast_to(np.asarray(b_fn(*full), float), full[0].shape)[inner].ravel()
    return CoefficientField(
        a_node=np.ascontiguousarray(a_full[inner]).ravel(),
        a_face=_faces(np.ascontiguousarray(a_full)),
        b_node=b_node,
        a0=float(a_full.max()),
        b0=float(b_node.max()) if b_node.size else 0.0,
        damped_fraction=float(np.mean(a_full[inner] > 0)),
    )


def default_T0(grid: Grid) -> float:
    """Conservative control time: 2L in 1D, twice the diameter in 2D."""
    if grid.dim == 1:
        return 2.0 * grid.lengths[0]
    return 2.0 * grid.diameter
