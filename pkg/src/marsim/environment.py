"""Bathymetry, water column and atmosphere: spatial queries for the sim.

Bathymetry is a regular grid of seabed depths (m, positive down) loadable
from Esri ASCII grid (.asc) or whitespace XYZ triples.  Local coordinates
follow the package NED convention: x north, y east.  The .asc header's
xllcorner/yllcorner are interpreted as local meters east/north of the
scenario origin.

Flow is a steady layered current profile plus a uniform wind vector that
applies above the surface only.  The medium switches from seawater to air
at z = 0 exactly; current layers are half-open intervals [from, to).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import IrregularGrid, NoData, OutOfBounds, ParseError
from .geomath import GeoPoint

RHO_SEAWATER = 1025.0  # kg/m^3
RHO_AIR = 1.225  # kg/m^3


# ---------------------------------------------------------------------------
# bathymetry

@dataclass
class BathymetryGrid:
    """Regular seabed-depth grid.

    depth[i, j] is the node at north = north_sw + i * cell_size,
    east = east_sw + j * cell_size (row 0 is the southernmost).
    """

    east_sw: float
    north_sw: float
    cell_size: float
    depth: np.ndarray  # (n_rows, n_cols) float64, positive down
    nodata: float = -9999.0
    origin: GeoPoint | None = None

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.depth = np.asarray(self.depth, dtype=np.float64)
        valid = self.depth != self.nodata
        if np.any(~np.isfinite(self.depth[valid])) or np.any(self.depth[valid] < 0):
            raise ValueError("depth values must be finite and >= 0 (or nodata)")

    @property
    def n_rows(self) -> int:
        return self.depth.shape[0]

    @property
    def n_cols(self) -> int:
        return self.depth.shape[1]


@njit(cache=True)
def _bilinear(depth, nodata, east_sw, north_sw, cell, x, y):
    """Returns (value, status): 0 ok, 1 out of bounds, 2 nodata corner."""
    n_rows, n_cols = depth.shape
    fi = (x - north_sw) / cell
    fj = (y - east_sw) / cell
    if fi < 0.0 or fj < 0.0 or fi > n_rows - 1 or fj > n_cols - 1:
        return 0.0, 1
    i0 = int(math.floor(fi))
    j0 = int(math.floor(fj))
    if i0 >= n_rows - 1:
        i0 = n_rows - 2 if n_rows > 1 else 0
    if j0 >= n_cols - 1:
        j0 = n_cols - 2 if n_cols > 1 else 0
    i1 = i0 + 1 if n_rows > 1 else i0
    j1 = j0 + 1 if n_cols > 1 else j0
    z00 = depth[i0, j0]
    z01 = depth[i0, j1]
    z10 = depth[i1, j0]
    z11 = depth[i1, j1]
    if z00 == nodata or z01 == nodata or z10 == nodata or z11 == nodata:
        return 0.0, 2
    u = fi - i0
    v = fj - j0
    val = (
        z00 * (1 - u) * (1 - v)
        + z01 * (1 - u) * v
        + z10 * u * (1 - v)
        + z11 * u * v
    )
    return val, 0


def depth_at(grid: BathymetryGrid, x: float, y: float) -> float:
    """Bilinear seabed depth at local (x north, y east)."""
    val, status = _bilinear(
        grid.depth, grid.nodata, grid.east_sw, grid.north_sw, grid.cell_size, x, y
    )
    if status == 1:
        raise OutOfBounds(f"({x:.1f}, {y:.1f}) outside bathymetry grid")
    if status == 2:
        raise NoData(f"nodata cell at ({x:.1f}, {y:.1f})")
    return float(val)


def load_bathymetry(path: str) -> BathymetryGrid:
    """Load a grid from .asc (Esri ASCII) or .xyz (regular triples)."""
    text = open(path, "r").read()
    if str(path).lower().endswith(".asc"):
        return _parse_asc(text)
    return _parse_xyz(text)


def _parse_asc(text: str) -> BathymetryGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header: dict[str, float] = {}
    keys = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"]
    if len(lines) < 6:
        raise ParseError("truncated .asc header (expected 6 header lines)")
    for n, ln in enumerate(lines[:6]):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError(f"line {n + 1}: expected 'key value', got {ln!r}")
        key = parts[0].lower()
        if key != keys[n]:
            raise ParseError(f"line {n + 1}: expected header '{keys[n]}', got '{parts[0]}'")
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise ParseError(f"line {n + 1}: non-numeric value {parts[1]!r}") from None
    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    rows = []
    for n, ln in enumerate(lines[6:]):
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError:
            raise ParseError(f"data line {n + 1}: non-numeric token") from None
        if len(row) != n_cols:
            raise ParseError(
                f"data line {n + 1}: expected {n_cols} values, got {len(row)}"
            )
        rows.append(row)
    if len(rows) != n_rows:
        raise ParseError(f"expected {n_rows} data rows, got {len(rows)}")
    # .asc stores north-most row first; flip so row 0 is southernmost.
    depth = np.array(rows, dtype=np.float64)[::-1].copy()
    return BathymetryGrid(
        east_sw=header["xllcorner"],
        north_sw=header["yllcorner"],
        cell_size=header["cellsize"],
        depth=depth,
        nodata=header["nodata_value"],
    )


def _parse_xyz(text: str) -> BathymetryGrid:
    pts = []
    for n, ln in enumerate(text.splitlines()):
        if not ln.strip():
            continue
        toks = ln.split()
        if len(toks) != 3:
            raise ParseError(f"line {n + 1}: expected 'x y z', got {ln!r}")
        try:
            pts.append(tuple(float(t) for t in toks))
        except ValueError:
            raise ParseError(f"line {n + 1}: non-numeric token") from None
    if not pts:
        raise ParseError("empty XYZ file")
    xs = np.array(sorted({p[0] for p in pts}))
    ys = np.array(sorted({p[1] for p in pts}))
    if len(xs) > 1:
        dx = np.diff(xs)
        if np.any(np.abs(dx - dx[0]) > 1e-6):
            raise IrregularGrid("x spacing not uniform")
    if len(ys) > 1:
        dy = np.diff(ys)
        if np.any(np.abs(dy - dy[0]) > 1e-6):
            raise IrregularGrid("y spacing not uniform")
    cell = float(np.diff(xs)[0]) if len(xs) > 1 else (
        float(np.diff(ys)[0]) if len(ys) > 1 else 1.0
    )
    if len(xs) > 1 and len(ys) > 1 and abs(cell - float(np.diff(ys)[0])) > 1e-6:
        raise IrregularGrid("x and y spacing differ")
    if len(pts) != len(xs) * len(ys):
        raise IrregularGrid(
            f"{len(pts)} points do not fill a {len(xs)}x{len(ys)} grid"
        )
    nodata = -9999.0
    depth = np.full((len(ys), len(xs)), nodata)
    x0, y0 = xs[0], ys[0]
    for px, py, pz in pts:
        j = int(round((px - x0) / cell))
        i = int(round((py - y0) / cell))
        depth[i, j] = pz
    return BathymetryGrid(
        east_sw=float(x0), north_sw=float(y0), cell_size=cell, depth=depth,
        nodata=nodata,
    )


def write_bathymetry_asc(grid: BathymetryGrid, path: str) -> None:
    """Write a grid back to Esri ASCII; load_bathymetry round-trips it."""
    with open(path, "w") as f:
        f.write(f"ncols {grid.n_cols}\n")
        f.write(f"nrows {grid.n_rows}\n")
        f.write(f"xllcorner {float(grid.east_sw)!r}\n")
        f.write(f"yllcorner {float(grid.north_sw)!r}\n")
        f.write(f"cellsize {float(grid.cell_size)!r}\n")
        f.write(f"NODATA_value {float(grid.nodata)!r}\n")
        for row in grid.depth[::-1]:
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# flow field and sampling

@dataclass
class FlowField:
    """Steady current layers [(from, to, NED velocity)] plus uniform wind."""

    layers: list[tuple[float, float, np.ndarray]] = field(default_factory=list)
    wind: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.wind = np.asarray(self.wind, dtype=np.float64).reshape(3)
        norm = []
        for zf, zt, vel in self.layers:
            if zt <= zf:
                raise ValueError(f"layer [{zf}, {zt}) is empty")
            norm.append((float(zf), float(zt), np.asarray(vel, dtype=np.float64).reshape(3)))
        norm.sort(key=lambda l: l[0])
        for (a, b, _), (c, _d, _e) in zip(norm, norm[1:]):
            if c < b:
                raise ValueError(f"layers [{a},{b}) and starting {c} overlap")
        self.layers = norm

    def packed(self) -> np.ndarray:
        """(L, 5) array of [from, to, vx, vy, vz] for the jit kernels."""
        if not self.layers:
            return np.zeros((0, 5))
        return np.array([[a, b, *v] for a, b, v in self.layers], dtype=np.float64)


@dataclass
class EnvironmentSample:
    """Local conditions at a query point."""

    current: np.ndarray  # NED m/s
    wind: np.ndarray  # NED m/s, zero underwater
    rho: float  # medium density kg/m^3
    seabed_depth: float  # m below surface; +inf when no bathymetry


@dataclass
class WorldEnvironment:
    """Bathymetry plus flow, bundled for sampling."""

    bathymetry: BathymetryGrid | None = None
    flow: FlowField = field(default_factory=FlowField)
    rho_water: float = RHO_SEAWATER

    def sample(self, position: np.ndarray, t: float = 0.0) -> EnvironmentSample:
        return sample_environment(self, position, t)


def sample_environment(
    world: WorldEnvironment, position: np.ndarray, t: float = 0.0
) -> EnvironmentSample:
    """Conditions at a position; steady fields so t is unused for now."""
    position = np.asarray(position, dtype=np.float64).reshape(3)
    z = position[2]
    seabed = math.inf
    if world.bathymetry is not None:
        val, status = _bilinear(
            world.bathymetry.depth,
            world.bathymetry.nodata,
            world.bathymetry.east_sw,
            world.bathymetry.north_sw,
            world.bathymetry.cell_size,
            position[0],
            position[1],
        )
        if status == 0:
            seabed = float(val)
    if z < 0.0:
        return EnvironmentSample(
            current=np.zeros(3),
            wind=world.flow.wind.copy(),
            rho=RHO_AIR,
            seabed_depth=seabed,
        )
    current = np.zeros(3)
    for zf, zt, vel in world.flow.layers:
        if zf <= z < zt:
            current = vel.copy()
            break
    return EnvironmentSample(
        current=current, wind=np.zeros(3), rho=world.rho_water, seabed_depth=seabed
    )


# ---------------------------------------------------------------------------
# grounding

@dataclass(frozen=True)
class GroundingResult:
    grounded: bool
    penetration: float = 0.0


def grounding_check(
    grid: BathymetryGrid, position: np.ndarray, draft: float
) -> GroundingResult:
    """Grounded iff keel depth (z + draft) reaches the seabed."""
    position = np.asarray(position, dtype=np.float64).reshape(3)
    seabed = depth_at(grid, position[0], position[1])
    keel = position[2] + draft
    if keel >= seabed:
        return GroundingResult(True, float(keel - seabed))
    return GroundingResult(False, 0.0)
