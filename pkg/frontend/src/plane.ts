import { Matrix4, Quaternion, Ray, Vector3 } from 'three';

// The drawing plane stands in for mid-air input: strokes are drawn with a
// pointer on this plane, and the plane itself can be moved and tilted so
// successive strokes build up a genuinely 3D sketch.
export class DrawingPlane {
  readonly origin = new Vector3(0, 0, 0);
  readonly orientation = new Quaternion();

  /** Plane normal in world space (local +Z). */
  normal(): Vector3 {
    return new Vector3(0, 0, 1).applyQuaternion(this.orientation);
  }

  /** In-plane axes in world space (local +X and +Y). */
  axes(): { u: Vector3; v: Vector3 } {
    return {
      u: new Vector3(1, 0, 0).applyQuaternion(this.orientation),
      v: new Vector3(0, 1, 0).applyQuaternion(this.orientation),
    };
  }

  /** World point for in-plane coordinates (u, v) in mm. */
  toWorld(u: number, v: number): Vector3 {
    return new Vector3(u, v, 0).applyQuaternion(this.orientation).add(this.origin);
  }

  /** Where a pointer ray pierces the plane, or null when parallel. */
  intersect(ray: Ray): Vector3 | null {
    const n = this.normal();
    const denom = ray.direction.dot(n);
    if (Math.abs(denom) < 1e-12) return null;
    const t = this.origin.clone().sub(ray.origin).dot(n) / denom;
    if (t < 0) return null;
    return ray.origin.clone().addScaledVector(ray.direction, t);
  }

  moveTo(p: Vector3): void {
    this.origin.copy(p);
  }

  rotateTo(q: Quaternion): void {
    this.orientation.copy(q).normalize();
  }

  /** Tilt by an angle (radians) about a world axis, keeping the origin. */
  tilt(axis: Vector3, angle: number): void {
    const spin = new Quaternion().setFromAxisAngle(axis.clone().normalize(), angle);
    this.orientation.premultiply(spin).normalize();
  }

  matrix(): Matrix4 {
    return new Matrix4().compose(this.origin, this.orientation, new Vector3(1, 1, 1));
  }
}
