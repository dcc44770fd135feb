/** Cubic Bezier math shared with the backend rasterizer (same formula). */

export interface Point {
  x: number;
  y: number;
}

/**
 * Evaluate the cubic Bezier through four control points at t in [0, 1]:
 * (1-t)^3 P0 + 3(1-t)^2 t P1 + 3(1-t) t^2 P2 + t^3 P3.
 */
export function evalCubicBezier(points: readonly Point[], t: number): Point {
  if (points.length !== 4) {
    throw new Error(`expected 4 control points, got ${points.length}`);
  }
  if (t < 0 || t > 1) {
    throw new Error(`t must lie in [0, 1], got ${t}`);
  }
  const u = 1 - t;
  const w0 = u * u * u;
  const w1 = 3 * u * u * t;
  const w2 = 3 * u * t * t;
  const w3 = t * t * t;
  return {
    x: w0 * points[0].x + w1 * points[1].x + w2 * points[2].x + w3 * points[3].x,
    y: w0 * points[0].y + w1 * points[1].y + w2 * points[2].y + w3 * points[3].y,
  };
}

/** Sample the curve at `samples` parameter values (the chord back to P0 closes it). */
export function sampleOutline(points: readonly Point[], samples = 128): Point[] {
  const out: Point[] = [];
  for (let i = 0; i < samples; i++) {
    out.push(evalCubicBezier(points, i / (samples - 1)));
  }
  return out;
}
