import type { Cell } from "./types.js";

export interface GridGeometry {
  rows: number;
  cols: number;
  blockPx: number;
  marginPx: number;
}

/**
 * Map a point in image pixel coordinates to the 1-based cell under it.
 * Points in the margin band (or outside the image) select nothing. The
 * mapping is exact at boundaries: the first pixel row of a cell belongs
 * to that cell.
 */
export function cellFromPoint(x: number, y: number, geom: GridGeometry): Cell | null {
  const gx = x - geom.marginPx;
  const gy = y - geom.marginPx;
  if (gx < 0 || gy < 0) return null;
  if (gx >= geom.cols * geom.blockPx || gy >= geom.rows * geom.blockPx) return null;
  return {
    row: Math.floor(gy / geom.blockPx) + 1,
    col: Math.floor(gx / geom.blockPx) + 1,
  };
}

/** Pixel rectangle of a cell, in image coordinates (for the overlay). */
export function cellRect(cell: Cell, geom: GridGeometry) {
  return {
    left: geom.marginPx + (cell.col - 1) * geom.blockPx,
    top: geom.marginPx + (cell.row - 1) * geom.blockPx,
    width: geom.blockPx,
    height: geom.blockPx,
  };
}

/** Arrow-key navigation: move the selection, clamped to the grid. */
export function moveSelection(
  current: Cell | null,
  dRow: number,
  dCol: number,
  geom: GridGeometry,
): Cell {
  if (!current) return { row: 1, col: 1 };
  return {
    row: Math.min(geom.rows, Math.max(1, current.row + dRow)),
    col: Math.min(geom.cols, Math.max(1, current.col + dCol)),
  };
}

export function sameCell(a: Cell | null, b: Cell | null): boolean {
  return !!a && !!b && a.row === b.row && a.col === b.col;
}
