"""Search pipeline: text pre-filter, proportion pre-filter, ICP ranking.

A sketch query is a set of polyline strokes in mm, optionally fused with
previously retrieved models (bases) that the user has positioned, plus an
optional search term.  The pipeline composes everything into one point
cloud, normalizes its largest extent to 100, voxelizes it at 20 cells, picks
candidates by intersecting the text matches with a radius query in the
bounding-box-ratio plane, and ranks candidates by voxel overlap after
multi-start ICP alignment.

Matching is scale-invariant by construction.  To make that literal (bitwise
equal scores for a uniformly scaled sketch), all inputs are rescaled to the
canonical size-100 range and snapped onto a 2^-20 lattice before any
sampling or statistics run; every later step is then identical arithmetic
regardless of the sketch's original units.  Only suggested_scale and the
reported extents remember the physical size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .catalog import IndexBundle
from .geometry import (
    DegenerateMeshError,
    PrincipalFrame,
    _axes_by_extent,
    clamp_flat_extents,
    compute_ratios,
    principal_axes,
    tighten_frame,
)
from .shape_match import MatchScore, RigidTransform, multi_start_align, score
from .text_index import normalize_text, query_text
from .voxel import voxelize_points

SNAP_LATTICE = float(1 << 20)  # canonical coordinate grid, ~1e-4 of one cell
NORMALIZED_EXTENT = 100.0
DEFAULT_LIMIT = 24
MAX_LIMIT = 200

# tokens too unspecific to restrict a sketch query (stems)
GENERIC_TERMS = frozenset({"object", "thing", "model", "print"})


class QueryError(ValueError):
    """Invalid query payload or parameters."""


class UnknownBaseError(QueryError):
    """A base reference names an artifact that cannot anchor a sketch."""


@dataclass(frozen=True)
class EngineConfig:
    ratio_radius: float = 0.2
    radius_growth: float = 1.5
    max_widenings: int = 3
    min_candidates: int = 30
    max_candidates: int = 500
    require_term: bool = False
    generic_terms: frozenset = GENERIC_TERMS


@dataclass(frozen=True)
class BaseRef:
    artifact_id: str
    transform: RigidTransform
    uniform_scale: float = 1.0

    def __post_init__(self):
        if not self.artifact_id:
            raise QueryError("base artifact_id must be non-empty")
        if not (self.uniform_scale > 0.0 and math.isfinite(self.uniform_scale)):
            raise QueryError("base scale must be a positive number")


@dataclass
class SketchQuery:
    strokes: tuple = ()
    stroke_radius_mm: float = 2.0
    bases: tuple = ()
    term: str | None = None
    limit: int = DEFAULT_LIMIT
    offset: int = 0

    def __post_init__(self):
        polys = []
        for i, stroke in enumerate(self.strokes):
            pts = np.asarray(stroke, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
                raise QueryError(f"stroke {i} must have at least 2 points of 3 coordinates")
            if not np.isfinite(pts).all():
                raise QueryError(f"stroke {i} has non-finite coordinates")
            polys.append(pts)
        self.strokes = tuple(polys)
        self.bases = tuple(self.bases)
        if not self.strokes and not self.bases:
            raise QueryError("query needs at least one stroke or base model")
        if not (self.stroke_radius_mm > 0.0 and math.isfinite(self.stroke_radius_mm)):
            raise QueryError("stroke_radius_mm must be a positive number")
        if not (1 <= int(self.limit) <= MAX_LIMIT):
            raise QueryError(f"limit must be between 1 and {MAX_LIMIT}")
        if int(self.offset) < 0:
            raise QueryError("offset must be non-negative")
        self.limit = int(self.limit)
        self.offset = int(self.offset)


@dataclass(frozen=True)
class SearchResult:
    artifact_id: str
    rank: int
    match: MatchScore | None = None
    text_score: float | None = None
    suggested_scale: float | None = None
    sketch_extents_mm: tuple | None = None


# ------------------------------------------------------------- wire format

def _parse_transform(doc) -> RigidTransform:
    if doc is None:
        return RigidTransform.identity()
    if not isinstance(doc, dict):
        raise QueryError("base transform must be an object")
    rot = doc.get("rotation")
    tr = doc.get("translation")
    if not isinstance(rot, (list, tuple)) or len(rot) != 9:
        raise QueryError("transform rotation must list 9 numbers row-major")
    if not isinstance(tr, (list, tuple)) or len(tr) != 3:
        raise QueryError("transform translation must list 3 numbers")
    try:
        r = np.array(rot, dtype=np.float64).reshape(3, 3)
        t = np.array(tr, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise QueryError(f"transform values must be numbers: {exc}") from exc
    if not np.isfinite(r).all() or not np.isfinite(t).all():
        raise QueryError("transform values must be finite")
    if not np.allclose(r @ r.T, np.eye(3), atol=1e-6) or np.linalg.det(r) < 0.0:
        raise QueryError("transform rotation must be a proper rotation matrix")
    return RigidTransform(r, t)


def parse_sketch_query(doc) -> SketchQuery:
    """Build a SketchQuery from its wire JSON (dict, str, or bytes)."""
    if isinstance(doc, (bytes, str)):
        try:
            doc = json.loads(doc)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise QueryError(f"sketch payload is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise QueryError("sketch payload must be a JSON object")
    known = {"strokes", "stroke_radius_mm", "bases", "term", "limit", "offset"}
    unknown = set(doc) - known
    if unknown:
        raise QueryError(f"unknown sketch fields: {sorted(unknown)}")

    strokes = doc.get("strokes", [])
    if not isinstance(strokes, list):
        raise QueryError("strokes must be a list of polylines")
    bases = []
    raw_bases = doc.get("bases", [])
    if not isinstance(raw_bases, list):
        raise QueryError("bases must be a list")
    for i, b in enumerate(raw_bases):
        if not isinstance(b, dict) or not isinstance(b.get("id"), str):
            raise QueryError(f"base {i} must be an object with a string id")
        scale = b.get("scale", 1.0)
        if not isinstance(scale, (int, float)):
            raise QueryError(f"base {i} scale must be a number")
        bases.append(BaseRef(b["id"], _parse_transform(b.get("transform")),
                             float(scale)))
    term = doc.get("term")
    if term is not None and not isinstance(term, str):
        raise QueryError("term must be a string")
    try:
        return SketchQuery(
            strokes=strokes,
            stroke_radius_mm=float(doc.get("stroke_radius_mm", 2.0)),
            bases=tuple(bases),
            term=term,
            limit=doc.get("limit", DEFAULT_LIMIT),
            offset=doc.get("offset", 0),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, QueryError):
            raise
        raise QueryError(f"malformed sketch payload: {exc}") from exc


def sketch_query_to_wire(q: SketchQuery) -> dict:
    """Wire JSON for a query; parse_sketch_query inverts it exactly."""
    return {
        "strokes": [[[float(x) for x in p] for p in s] for s in q.strokes],
        "stroke_radius_mm": q.stroke_radius_mm,
        "bases": [
            {
                "id": b.artifact_id,
                "transform": {
                    "rotation": [float(x) for x in b.transform.rotation.ravel()],
                    "translation": [float(x) for x in b.transform.translation],
                },
                "scale": b.uniform_scale,
            }
            for b in q.bases
        ],
        "term": q.term,
        "limit": q.limit,
        "offset": q.offset,
    }


# -------------------------------------------------------------- composition

def _snap(values: np.ndarray) -> np.ndarray:
    return np.round(np.asarray(values, dtype=np.float64) * SNAP_LATTICE) / SNAP_LATTICE


def _base_cloud_mm(bundle: IndexBundle, ref: BaseRef) -> np.ndarray:
    rec = bundle.record(ref.artifact_id)
    if rec is None:
        raise UnknownBaseError(f"unknown base artifact {ref.artifact_id!r}")
    if rec.spatial is None or ref.artifact_id not in bundle.voxels:
        raise UnknownBaseError(
            f"base artifact {ref.artifact_id!r} has no spatial features")
    frame = PrincipalFrame(np.array(rec.spatial.frame_axes),
                           np.array(rec.spatial.frame_centroid_mm))
    norm_scale = NORMALIZED_EXTENT / rec.spatial.oabb_extents_mm[0]
    centers_mm = frame.to_world(bundle.voxels[ref.artifact_id].occupied_centers()
                                / norm_scale)
    return ref.transform.apply(centers_mm * ref.uniform_scale)


def _tube_points(line: np.ndarray, radius: float, step: float) -> np.ndarray:
    """Sample a polyline's capsule: ≤ step spacing along it, surface rings, end poles."""
    parts = [line]
    if radius > 0.0:
        if 2.0 * radius <= step:
            n_ang = 4
        else:
            n_ang = int(math.ceil(math.pi / math.asin(step / (2.0 * radius))))
            n_ang = 4 * int(math.ceil(n_ang / 4.0))
        angles = 2.0 * math.pi * np.arange(n_ang) / n_ang
    first_dir = None
    last_dir = None
    for a, b in zip(line[:-1], line[1:]):
        d = b - a
        length = float(np.linalg.norm(d))
        if length == 0.0:
            continue
        n_seg = max(1, int(math.ceil(length / step)))
        ts = np.arange(n_seg + 1) / n_seg
        centers = a + ts[:, None] * d
        parts.append(centers[1:-1])
        direction = d / length
        if first_dir is None:
            first_dir = direction
        last_dir = direction
        if radius > 0.0:
            k = int(np.argmin(np.abs(direction)))
            u = np.cross(direction, np.eye(3)[k])
            u /= np.linalg.norm(u)
            v = np.cross(direction, u)
            ring = radius * (np.cos(angles)[:, None] * u + np.sin(angles)[:, None] * v)
            parts.append((centers[:, None, :] + ring[None, :, :]).reshape(-1, 3))
    if radius > 0.0 and first_dir is not None:
        parts.append(np.array([line[0] - radius * first_dir,
                               line[-1] + radius * last_dir]))
    return np.vstack(parts)


def _canonical_cloud(q: SketchQuery, bundle: IndexBundle) -> tuple[np.ndarray, float]:
    """Composed cloud in canonical (size ~100) coordinates and the mm→canonical scale."""
    base_clouds = [_base_cloud_mm(bundle, ref) for ref in q.bases]
    los = [c.min(axis=0) for c in base_clouds]
    his = [c.max(axis=0) for c in base_clouds]
    for stroke in q.strokes:
        los.append(stroke.min(axis=0) - q.stroke_radius_mm)
        his.append(stroke.max(axis=0) + q.stroke_radius_mm)
    extent = float((np.maximum.reduce(his) - np.minimum.reduce(los)).max())
    if not (extent > 0.0 and math.isfinite(extent)):
        raise QueryError("sketch has no spatial extent")
    to_canonical = NORMALIZED_EXTENT / extent

    parts = [_snap(c * to_canonical) for c in base_clouds]
    radius = float(_snap(np.asarray(q.stroke_radius_mm * to_canonical)))
    # half of the 5.0 pitch a size-100 cloud gets at 20 cells per axis
    step = NORMALIZED_EXTENT / 20.0 / 2.0
    for stroke in q.strokes:
        parts.append(_tube_points(_snap(stroke * to_canonical), radius, step))
    cloud = np.vstack(parts)
    if len(cloud) == 0:
        raise QueryError("composed sketch cloud is empty")
    return cloud, to_canonical


def compose_query(q: SketchQuery, bundle: IndexBundle) -> tuple[np.ndarray, np.ndarray]:
    """Composed point cloud in mm and its axis-aligned extents in mm."""
    cloud, to_canonical = _canonical_cloud(q, bundle)
    cloud_mm = cloud / to_canonical
    return cloud_mm, cloud_mm.max(axis=0) - cloud_mm.min(axis=0)


# ----------------------------------------------------------------- pipeline

def _effective_tokens(term: str | None, config: EngineConfig) -> list[str]:
    if term is None:
        return []
    return [t for t in normalize_text(term) if t not in config.generic_terms]


def select_candidates(bundle: IndexBundle, term: str | None,
                      ratios: tuple[float, float],
                      config: EngineConfig | None = None) -> set[str]:
    """Text matches intersected with proportion-plane neighbors.

    The ratio radius starts at config.ratio_radius and widens by
    radius_growth up to max_widenings times while the intersection stays
    below min_candidates.  A term whose tokens all normalize away (or a
    missing term) does not restrict the set.
    """
    config = config or EngineConfig()
    tokens = _effective_tokens(term, config)
    if tokens:
        scores = bundle.text_index.score_tokens(tokens)
        if not scores:
            return set()
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        text_set = {cid for cid, _ in ranked[:config.max_candidates]}
    else:
        text_set = bundle.spatial_ids()

    r1, r2 = ratios
    radius = config.ratio_radius
    chosen: set[str] = set()
    for _ in range(config.max_widenings + 1):
        chosen = text_set & bundle.ratio_index.within(r1, r2, radius)
        if len(chosen) >= config.min_candidates:
            break
        radius *= config.radius_growth
    return chosen


def sketch_grid_and_extents(q: SketchQuery, bundle: IndexBundle):
    """Voxelize the composed sketch; returns (grid, oabb extents, extents_mm)."""
    cloud, to_canonical = _canonical_cloud(q, bundle)
    extents_mm = (cloud.max(axis=0) - cloud.min(axis=0)) / to_canonical
    try:
        frame = principal_axes(cloud)
    except DegenerateMeshError as exc:
        raise QueryError(f"sketch has no usable extent: {exc}") from exc
    # sampled clouds put noise-driven eigenvectors in symmetric subspaces
    axes = tighten_frame(cloud, frame.axes, frame.centroid)
    axes, oabb = _axes_by_extent(axes, cloud, frame.centroid)
    if oabb[0] <= 0.0:
        raise QueryError("sketch has no usable extent")
    in_frame = (cloud - frame.centroid) @ axes.T
    grid = voxelize_points(in_frame * (NORMALIZED_EXTENT / oabb[0]), target_cells=20)
    return grid, oabb, extents_mm


def search_sketch(q: SketchQuery, bundle: IndexBundle,
                  config: EngineConfig | None = None) -> list[SearchResult]:
    """Ranked spatial matches for a sketch query.

    Order: avg score descending, then sketch_norm descending, then id.
    Results carry the suggested physical scale for each hit.
    """
    config = config or EngineConfig()
    if config.require_term and not (q.term and q.term.strip()):
        raise QueryError("a search term is required for sketch queries")
    grid, oabb, extents_mm = sketch_grid_and_extents(q, bundle)
    ratios = compute_ratios(clamp_flat_extents(oabb))
    candidates = select_candidates(bundle, q.term, ratios, config)

    largest_mm = float(extents_mm.max())
    scored = []
    for cid in sorted(candidates):
        transform, _ = multi_start_align(grid, bundle.voxels[cid])
        match = score(grid, bundle.voxels[cid], transform)
        suggested = largest_mm / bundle.record(cid).spatial.oabb_extents_mm[0]
        scored.append((match, suggested, cid))
    scored.sort(key=lambda row: (-row[0].avg, -row[0].sketch_norm, row[2]))

    page = scored[q.offset:q.offset + q.limit]
    ext = tuple(float(x) for x in extents_mm)
    return [
        SearchResult(cid, rank=q.offset + i + 1, match=match,
                     suggested_scale=suggested, sketch_extents_mm=ext)
        for i, (match, suggested, cid) in enumerate(page)
    ]


def search_text_endpoint(term: str, limit: int = DEFAULT_LIMIT, offset: int = 0,
                         bundle: IndexBundle | None = None) -> list[SearchResult]:
    """Ranked text matches wrapped as SearchResults; ranks start at 1+offset."""
    if bundle is None:
        raise ValueError("bundle is required")
    if not (1 <= limit <= MAX_LIMIT):
        raise QueryError(f"limit must be between 1 and {MAX_LIMIT}")
    if offset < 0:
        raise QueryError("offset must be non-negative")
    if not normalize_text(term or ""):
        raise QueryError("query text normalizes to nothing searchable")
    hits = query_text(bundle.text_index, term, limit, offset)
    return [SearchResult(cid, rank=offset + i + 1, text_score=score_value)
            for i, (cid, score_value) in enumerate(hits)]
