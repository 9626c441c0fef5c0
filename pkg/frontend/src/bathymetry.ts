/**
 * Seabed grid as served by GET /bathymetry, with the same bilinear
 * interpolation the simulator uses, plus client-side shading.
 */

export interface BathymetryGrid {
  available: boolean;
  east_sw: number;
  north_sw: number;
  cell_size: number;
  nodata: number;
  depth: number[][]; // [row][col], row 0 southernmost
}

/** Bilinear seabed depth at local (north, east); null outside or nodata. */
export function depthAt(
  grid: BathymetryGrid,
  north: number,
  east: number,
): number | null {
  const rows = grid.depth.length;
  const cols = rows > 0 ? grid.depth[0].length : 0;
  const fi = (north - grid.north_sw) / grid.cell_size;
  const fj = (east - grid.east_sw) / grid.cell_size;
  if (fi < 0 || fj < 0 || fi > rows - 1 || fj > cols - 1) return null;
  let i0 = Math.floor(fi);
  let j0 = Math.floor(fj);
  if (i0 >= rows - 1) i0 = rows > 1 ? rows - 2 : 0;
  if (j0 >= cols - 1) j0 = cols > 1 ? cols - 2 : 0;
  const i1 = rows > 1 ? i0 + 1 : i0;
  const j1 = cols > 1 ? j0 + 1 : j0;
  const z00 = grid.depth[i0][j0];
  const z01 = grid.depth[i0][j1];
  const z10 = grid.depth[i1][j0];
  const z11 = grid.depth[i1][j1];
  if ([z00, z01, z10, z11].some((z) => z === grid.nodata)) return null;
  const u = fi - i0;
  const v = fj - j0;
  return (
    z00 * (1 - u) * (1 - v) +
    z01 * (1 - u) * v +
    z10 * u * (1 - v) +
    z11 * u * v
  );
}

export function depthRange(grid: BathymetryGrid): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of grid.depth) {
    for (const z of row) {
      if (z === grid.nodata) continue;
      lo = Math.min(lo, z);
      hi = Math.max(hi, z);
    }
  }
  return [lo, hi];
}

/** Fixed blue colormap with a northwest hillshade term, as RGB. */
export function shade(
  grid: BathymetryGrid,
  row: number,
  col: number,
  lo: number,
  hi: number,
): [number, number, number] {
  const z = grid.depth[row][col];
  if (z === grid.nodata) return [40, 40, 40];
  const t = hi > lo ? (z - lo) / (hi - lo) : 0;
  // slope from neighbor differences (meters per cell)
  const rows = grid.depth.length;
  const cols = grid.depth[0].length;
  const zn = grid.depth[Math.min(row + 1, rows - 1)][col];
  const ze = grid.depth[row][Math.min(col + 1, cols - 1)];
  const hill = Math.max(
    0,
    Math.min(1, 0.5 + ((zn - z) + (ze - z)) / (0.35 * grid.cell_size)),
  );
  const base: [number, number, number] = [
    202 - 150 * t,
    228 - 140 * t,
    255 - 120 * t,
  ];
  return base.map((c) => Math.round(c * (0.65 + 0.35 * hill))) as [
    number,
    number,
    number,
  ];
}
