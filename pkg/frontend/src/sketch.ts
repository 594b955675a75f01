import { Vector3 } from 'three';
import { DrawingPlane } from './plane';
import { SketchWire, WireBase } from './wire';

export const DEFAULT_STROKE_RADIUS_MM = 2.0;

// A sketch under construction: world-space polylines plus the plane the
// next stroke will land on. Coordinates stay in mm throughout so the wire
// payload needs no unit conversion.
export class UiSketch {
  readonly strokes: Vector3[][] = [];
  strokeRadiusMm = DEFAULT_STROKE_RADIUS_MM;
  readonly plane = new DrawingPlane();

  private pending: Vector3[] | null = null;

  get isEmpty(): boolean {
    return this.strokes.length === 0;
  }

  beginStroke(): void {
    this.pending = [];
  }

  /** Append a world-space point to the stroke being drawn. */
  extendStroke(p: Vector3): void {
    if (!this.pending) this.pending = [];
    this.pending.push(p.clone());
  }

  /** Append an in-plane pointer position, projected through the plane. */
  extendStrokeOnPlane(u: number, v: number): void {
    this.extendStroke(this.plane.toWorld(u, v));
  }

  /** Commit the pending stroke; single points are dropped as misclicks. */
  endStroke(): boolean {
    const pts = this.pending;
    this.pending = null;
    if (!pts || pts.length < 2) return false;
    this.strokes.push(pts);
    return true;
  }

  /** Remove the most recent committed stroke. */
  undo(): boolean {
    return this.strokes.pop() !== undefined;
  }

  clear(): void {
    this.strokes.length = 0;
    this.pending = null;
  }

  toWire(bases: WireBase[] = [], term?: string, limit?: number, offset?: number): SketchWire {
    const wire: SketchWire = {
      strokes: this.strokes.map((s) => s.map((p) => [p.x, p.y, p.z])),
      stroke_radius_mm: this.strokeRadiusMm,
      bases,
    };
    if (term !== undefined && term !== '') wire.term = term;
    if (limit !== undefined) wire.limit = limit;
    if (offset !== undefined) wire.offset = offset;
    return wire;
  }

  /** Rebuild stroke geometry from a wire payload (palette state is not part of it). */
  static strokesFromWire(wire: SketchWire): Vector3[][] {
    return wire.strokes.map((s) => s.map(([x, y, z]) => new Vector3(x, y, z)));
  }
}
