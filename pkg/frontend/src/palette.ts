import { Matrix4, Quaternion, Vector3 } from 'three';
import { WireBase } from './wire';

export interface PaletteEntry {
  artifactId: string;
  position: Vector3;
  rotation: Quaternion;
  uniformScale: number;
}

export const PALETTE_CAPACITY = 5;

// Models loaded out of the result grid for side-by-side comparison and
// resubmission. Position/rotation/scale track the gizmo live, so a base
// reference always carries the transform the user is currently looking at.
export class Palette {
  readonly entries: PaletteEntry[] = [];

  constructor(private readonly confirmEvict: (oldest: PaletteEntry) => boolean) {}

  /**
   * Add a model. At capacity the oldest entry is evicted, but only after
   * the confirm callback agrees; a declined eviction rejects the load.
   */
  load(artifactId: string): PaletteEntry | null {
    if (this.entries.length >= PALETTE_CAPACITY) {
      const oldest = this.entries[0]!;
      if (!this.confirmEvict(oldest)) return null;
      this.entries.shift();
    }
    const entry: PaletteEntry = {
      artifactId,
      position: new Vector3(),
      rotation: new Quaternion(),
      uniformScale: 1.0,
    };
    this.entries.push(entry);
    return entry;
  }

  get(artifactId: string): PaletteEntry | undefined {
    return this.entries.find((e) => e.artifactId === artifactId);
  }

  remove(artifactId: string): boolean {
    const i = this.entries.findIndex((e) => e.artifactId === artifactId);
    if (i < 0) return false;
    this.entries.splice(i, 1);
    return true;
  }

  /** Wire bases for the given entries (all of them by default). */
  toBases(ids?: string[]): WireBase[] {
    const chosen = ids
      ? this.entries.filter((e) => ids.includes(e.artifactId))
      : this.entries;
    return chosen.map(entryToBase);
  }
}

/** Row-major rotation + translation + scale, the shape the server validates. */
export function entryToBase(e: PaletteEntry): WireBase {
  const m = new Matrix4().makeRotationFromQuaternion(e.rotation);
  const el = m.elements; // three stores column-major
  return {
    id: e.artifactId,
    transform: {
      rotation: [el[0]!, el[4]!, el[8]!, el[1]!, el[5]!, el[9]!, el[2]!, el[6]!, el[10]!],
      translation: [e.position.x, e.position.y, e.position.z],
    },
    scale: e.uniformScale,
  };
}
