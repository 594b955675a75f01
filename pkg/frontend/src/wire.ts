// Sketch wire format, the JSON body of POST /search/sketch.
// Serialization must be lossless: parseSketchWire(toJson(w)) returns the
// same stroke coordinates, since the server echoes none of them back.

export interface WireTransform {
  rotation: number[]; // 9 numbers, row-major, proper rotation
  translation: number[]; // 3 numbers, mm
}

export interface WireBase {
  id: string;
  transform: WireTransform;
  scale: number;
}

export interface SketchWire {
  strokes: number[][][]; // polylines of [x, y, z] in mm
  stroke_radius_mm: number;
  bases: WireBase[];
  term?: string;
  limit?: number;
  offset?: number;
}

export function toJson(wire: SketchWire): string {
  return JSON.stringify(wire);
}

function isVec(p: unknown, n: number): p is number[] {
  return Array.isArray(p) && p.length === n && p.every((v) => typeof v === 'number' && Number.isFinite(v));
}

/** Parse wire JSON back into the same structure; throws on malformed input. */
export function parseSketchWire(text: string): SketchWire {
  const doc = JSON.parse(text);
  if (typeof doc !== 'object' || doc === null || Array.isArray(doc)) {
    throw new Error('sketch wire must be a JSON object');
  }
  const strokes: number[][][] = [];
  if (!Array.isArray(doc.strokes)) throw new Error('strokes must be a list');
  for (const s of doc.strokes) {
    if (!Array.isArray(s) || !s.every((p: unknown) => isVec(p, 3))) {
      throw new Error('each stroke must be a list of [x, y, z] points');
    }
    strokes.push(s.map((p: number[]) => [...p]));
  }
  const bases: WireBase[] = [];
  for (const b of doc.bases ?? []) {
    if (typeof b?.id !== 'string') throw new Error('base id must be a string');
    const t = b.transform;
    if (!isVec(t?.rotation, 9) || !isVec(t?.translation, 3)) {
      throw new Error('base transform must carry rotation[9] and translation[3]');
    }
    if (typeof b.scale !== 'number' || !(b.scale > 0)) {
      throw new Error('base scale must be a positive number');
    }
    bases.push({
      id: b.id,
      transform: { rotation: [...t.rotation], translation: [...t.translation] },
      scale: b.scale,
    });
  }
  const radius = doc.stroke_radius_mm ?? 2.0;
  if (typeof radius !== 'number' || !(radius > 0)) {
    throw new Error('stroke_radius_mm must be positive');
  }
  const out: SketchWire = { strokes, stroke_radius_mm: radius, bases };
  if (doc.term != null) {
    if (typeof doc.term !== 'string') throw new Error('term must be a string');
    out.term = doc.term;
  }
  if (doc.limit != null) out.limit = doc.limit;
  if (doc.offset != null) out.offset = doc.offset;
  return out;
}
