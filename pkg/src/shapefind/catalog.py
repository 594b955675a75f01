"""Artifact catalog: corpus ingestion, records, and index bundle persistence.

A corpus is a directory of model folders (corpus/<id>/mesh.stl|mesh.obj,
meta.json, optional thumb.png).  Ingestion parses each mesh, computes its
object-aligned box, proportion ratios, and normalized voxel grid, builds the
text and ratio indices, and persists everything to an index directory:

    index/
      catalog.json     records, canonical JSON sorted by id
      text.idx         weighted inverted index
      ratios.idx       proportion pre-filter rows
      voxels/<id>.vox  occupancy grids
      build.json       format version, creation time, corpus hash
      ingest_report.json  what was ingested, skipped, and why

Models whose metadata is malformed are skipped with an error entry; models
whose mesh cannot be parsed or has no usable spatial extent are kept as
text-only records (no spatial features).  Given the same corpus bytes, every
output file except the created_at stamp in build.json is byte-identical
across runs.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .geometry import (
    DegenerateMeshError,
    clamp_flat_extents,
    compute_oabb,
    compute_ratios,
)
from .meshes import MeshError, is_watertight, parse_mesh, TriangleMesh
from .ratio_index import RatioIndex, ratio_index_bytes, ratio_index_from_bytes
from .text_index import (
    FieldWeights,
    TextIndex,
    build_text_index,
    text_index_bytes,
    text_index_from_bytes,
)
from .voxel import VoxelGrid, load_vox, save_vox, voxelize_mesh

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


class IngestError(ValueError):
    """Corpus-level ingestion failure (missing or unusable corpus)."""


class BundleError(ValueError):
    """Index directory is missing pieces or fails validation."""


@dataclass(frozen=True)
class Attribution:
    origin_url: str | None = None
    designer: str | None = None
    license: str | None = None


@dataclass(frozen=True)
class MeshStats:
    extents_mm: tuple[float, float, float]
    triangle_count: int
    watertight: bool


@dataclass(frozen=True)
class SpatialFeatures:
    """Shape-search features; present only when the mesh yielded a box."""

    oabb_extents_mm: tuple[float, float, float]  # sorted descending, clamped
    ratios: tuple[float, float]
    voxel_ref: str
    frame_axes: tuple[tuple[float, float, float], ...]  # rows, match extents
    frame_centroid_mm: tuple[float, float, float]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ArtifactRecord:
    id: str
    name: str
    description: str
    tags: tuple[str, ...]
    category: str
    attribution: Attribution
    mesh_file: str | None
    thumbnail_file: str | None
    mesh_stats: MeshStats | None
    spatial: SpatialFeatures | None


@dataclass(frozen=True)
class BuildInfo:
    format_version: int
    created_at: str
    corpus_hash: str
    corpus_dir: str
    field_weights: FieldWeights


@dataclass
class IngestReport:
    total_dirs: int = 0
    ingested: int = 0
    with_spatial: int = 0
    text_only: int = 0
    skipped: int = 0
    errors: list[dict] = field(default_factory=list)
    warnings: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total_dirs": self.total_dirs,
            "ingested": self.ingested,
            "with_spatial": self.with_spatial,
            "text_only": self.text_only,
            "skipped": self.skipped,
            "errors": sorted(self.errors, key=lambda e: e["id"]),
            "warnings": sorted(self.warnings, key=lambda e: e["id"]),
        }


@dataclass
class IndexBundle:
    catalog: list[ArtifactRecord]
    text_index: TextIndex
    ratio_index: RatioIndex
    voxels: dict[str, VoxelGrid]
    build_info: BuildInfo

    def __post_init__(self):
        self._by_id = {r.id: r for r in self.catalog}

    def record(self, artifact_id: str) -> ArtifactRecord | None:
        return self._by_id.get(artifact_id)

    def spatial_ids(self) -> set[str]:
        return {r.id for r in self.catalog if r.spatial is not None}

    def __eq__(self, other) -> bool:
        if not isinstance(other, IndexBundle):
            return NotImplemented
        return (
            self.catalog == other.catalog
            and self.text_index == other.text_index
            and self.ratio_index == other.ratio_index
            and self.voxels == other.voxels
            and self.build_info == other.build_info
        )


@dataclass(frozen=True)
class IngestConfig:
    field_weights: FieldWeights = FieldWeights()
    category_map: dict | None = None
    target_cells: int = 20


def map_category(raw: str, table: dict | None) -> str:
    """Canonical category for a raw label; identity when unmapped."""
    cleaned = raw.strip()
    if table:
        return table.get(cleaned, table.get(cleaned.lower(), cleaned))
    return cleaned


# ---------------------------------------------------------------- metadata

_OPTIONAL_META = ("origin_url", "designer", "license")


def _parse_meta(raw: bytes) -> dict:
    try:
        meta = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"meta.json is not valid JSON: {exc}") from exc
    if not isinstance(meta, dict):
        raise ValueError("meta.json must hold a JSON object")
    for key in ("name", "description", "category"):
        if not isinstance(meta.get(key), str) or not meta[key].strip():
            raise ValueError(f"meta.json field {key!r} must be a non-empty string")
    tags = meta.get("tags")
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise ValueError("meta.json field 'tags' must be a list of strings")
    for key in _OPTIONAL_META:
        if key in meta and not isinstance(meta[key], str):
            raise ValueError(f"meta.json field {key!r} must be a string")
    return meta


def compute_spatial(mesh: TriangleMesh, voxel_ref: str, target_cells: int = 20
                    ) -> tuple[SpatialFeatures, VoxelGrid]:
    """OABB, ratios, and normalized voxel grid for one parsed mesh.

    Raises DegenerateMeshError when the mesh has no usable 3D or 2D extent.
    """
    extents, frame, flags = compute_oabb(mesh)
    clamped = clamp_flat_extents(extents)
    ratios = compute_ratios(clamped)
    scale = 100.0 / clamped[0]
    verts_n = frame.to_frame(mesh.vertices) * scale
    grid = voxelize_mesh(TriangleMesh(verts_n, mesh.triangles),
                         target_cells=target_cells,
                         solid=is_watertight(mesh))
    spatial = SpatialFeatures(
        oabb_extents_mm=tuple(float(e) for e in clamped),
        ratios=(float(ratios[0]), float(ratios[1])),
        voxel_ref=voxel_ref,
        frame_axes=tuple(tuple(float(x) for x in row) for row in frame.axes),
        frame_centroid_mm=tuple(float(x) for x in frame.centroid),
        flags=tuple(flags),
    )
    return spatial, grid


def _corpus_hash(corpus_dir: Path) -> str:
    files = sorted(p for p in corpus_dir.rglob("*") if p.is_file())
    h = hashlib.sha256()
    for p in files:
        h.update(str(p.relative_to(corpus_dir)).encode("utf-8"))
        h.update(b"\0")
        h.update(hashlib.sha256(p.read_bytes()).digest())
        h.update(b"\0")
    return h.hexdigest()


def ingest_corpus(corpus_dir, out_dir, config: IngestConfig | None = None) -> IndexBundle:
    """Ingest a corpus directory into an index directory; returns the bundle.

    The report of skipped models and warnings lands in
    out_dir/ingest_report.json.
    """
    config = config or IngestConfig()
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    if not corpus_dir.is_dir():
        raise IngestError(f"corpus directory not found: {corpus_dir}")
    model_dirs = sorted(p for p in corpus_dir.iterdir() if p.is_dir())
    if not model_dirs:
        raise IngestError(f"no model directories under {corpus_dir}")

    report = IngestReport(total_dirs=len(model_dirs))
    records: list[ArtifactRecord] = []
    grids: dict[str, VoxelGrid] = {}

    for model_dir in model_dirs:
        model_id = model_dir.name
        if not _ID_RE.match(model_id):
            report.skipped += 1
            report.errors.append({"id": model_id, "error": "id is not filesystem-safe"})
            continue
        meta_path = model_dir / "meta.json"
        if not meta_path.is_file():
            report.skipped += 1
            report.errors.append({"id": model_id, "error": "meta.json missing"})
            continue
        try:
            meta = _parse_meta(meta_path.read_bytes())
        except ValueError as exc:
            report.skipped += 1
            report.errors.append({"id": model_id, "error": str(exc)})
            continue

        mesh_name = next(
            (n for n in ("mesh.stl", "mesh.obj") if (model_dir / n).is_file()), None)
        if mesh_name is None:
            report.skipped += 1
            report.errors.append({"id": model_id, "error": "no mesh.stl or mesh.obj"})
            continue

        mesh = None
        mesh_stats = None
        spatial = None
        try:
            mesh = parse_mesh((model_dir / mesh_name).read_bytes(),
                              mesh_name.rsplit(".", 1)[1])
        except MeshError as exc:
            report.warnings.append(
                {"id": model_id, "warning": f"mesh unreadable, text-only: {exc}"})
            logger.warning("model %s: mesh unreadable (%s), keeping text-only",
                           model_id, exc)
        if mesh is not None:
            mesh_stats = MeshStats(
                extents_mm=tuple(float(e) for e in mesh.extents()),
                triangle_count=mesh.triangle_count,
                watertight=is_watertight(mesh),
            )
            try:
                spatial, grid = compute_spatial(
                    mesh, f"voxels/{model_id}.vox", config.target_cells)
                grids[model_id] = grid
            except DegenerateMeshError as exc:
                report.warnings.append(
                    {"id": model_id, "warning": f"no spatial features: {exc}"})
                logger.warning("model %s: no spatial features (%s)", model_id, exc)

        records.append(ArtifactRecord(
            id=model_id,
            name=meta["name"],
            description=meta["description"],
            tags=tuple(meta["tags"]),
            category=map_category(meta["category"], config.category_map),
            attribution=Attribution(
                origin_url=meta.get("origin_url"),
                designer=meta.get("designer"),
                license=meta.get("license"),
            ),
            mesh_file=f"{model_id}/{mesh_name}",
            thumbnail_file=(f"{model_id}/thumb.png"
                            if (model_dir / "thumb.png").is_file() else None),
            mesh_stats=mesh_stats,
            spatial=spatial,
        ))
        report.ingested += 1
        if spatial is not None:
            report.with_spatial += 1
        else:
            report.text_only += 1

    if not records:
        raise IngestError("every model in the corpus was skipped")

    records.sort(key=lambda r: r.id)
    text_index = build_text_index(records, config.field_weights)
    ratio_index = RatioIndex([
        (r.id, r.spatial.ratios[0], r.spatial.ratios[1])
        for r in records if r.spatial is not None
    ])
    build_info = BuildInfo(
        format_version=FORMAT_VERSION,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        corpus_hash=_corpus_hash(corpus_dir),
        corpus_dir=str(corpus_dir.resolve()),
        field_weights=config.field_weights,
    )
    bundle = IndexBundle(records, text_index, ratio_index, grids, build_info)
    save_bundle(bundle, out_dir)
    (out_dir / "ingest_report.json").write_bytes(
        (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode())
    return bundle


# ------------------------------------------------------------- persistence

def _record_to_dict(r: ArtifactRecord) -> dict:
    out = {
        "id": r.id,
        "name": r.name,
        "description": r.description,
        "tags": list(r.tags),
        "category": r.category,
        "attribution": {
            "origin_url": r.attribution.origin_url,
            "designer": r.attribution.designer,
            "license": r.attribution.license,
        },
        "mesh_file": r.mesh_file,
        "thumbnail_file": r.thumbnail_file,
        "mesh_stats": None,
        "spatial": None,
    }
    if r.mesh_stats is not None:
        out["mesh_stats"] = {
            "extents_mm": list(r.mesh_stats.extents_mm),
            "triangle_count": r.mesh_stats.triangle_count,
            "watertight": r.mesh_stats.watertight,
        }
    if r.spatial is not None:
        out["spatial"] = {
            "oabb_extents_mm": list(r.spatial.oabb_extents_mm),
            "ratios": list(r.spatial.ratios),
            "voxel_ref": r.spatial.voxel_ref,
            "frame_axes": [list(row) for row in r.spatial.frame_axes],
            "frame_centroid_mm": list(r.spatial.frame_centroid_mm),
            "flags": list(r.spatial.flags),
        }
    return out


def _record_from_dict(d: dict) -> ArtifactRecord:
    mesh_stats = None
    if d.get("mesh_stats") is not None:
        ms = d["mesh_stats"]
        mesh_stats = MeshStats(tuple(ms["extents_mm"]), ms["triangle_count"],
                               ms["watertight"])
    spatial = None
    if d.get("spatial") is not None:
        sp = d["spatial"]
        spatial = SpatialFeatures(
            oabb_extents_mm=tuple(sp["oabb_extents_mm"]),
            ratios=tuple(sp["ratios"]),
            voxel_ref=sp["voxel_ref"],
            frame_axes=tuple(tuple(row) for row in sp["frame_axes"]),
            frame_centroid_mm=tuple(sp["frame_centroid_mm"]),
            flags=tuple(sp["flags"]),
        )
    att = d.get("attribution") or {}
    return ArtifactRecord(
        id=d["id"],
        name=d["name"],
        description=d["description"],
        tags=tuple(d["tags"]),
        category=d["category"],
        attribution=Attribution(att.get("origin_url"), att.get("designer"),
                                att.get("license")),
        mesh_file=d.get("mesh_file"),
        thumbnail_file=d.get("thumbnail_file"),
        mesh_stats=mesh_stats,
        spatial=spatial,
    )


def save_bundle(bundle: IndexBundle, out_dir) -> None:
    """Write the full index directory; files are deterministic for a bundle."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    catalog_doc = {
        "format_version": FORMAT_VERSION,
        "records": [_record_to_dict(r) for r in
                    sorted(bundle.catalog, key=lambda r: r.id)],
    }
    (out_dir / "catalog.json").write_bytes(
        (json.dumps(catalog_doc, sort_keys=True, indent=2) + "\n").encode())
    (out_dir / "text.idx").write_bytes(text_index_bytes(bundle.text_index))
    (out_dir / "ratios.idx").write_bytes(ratio_index_bytes(bundle.ratio_index))
    voxel_dir = out_dir / "voxels"
    voxel_dir.mkdir(exist_ok=True)
    for model_id in sorted(bundle.voxels):
        save_vox(bundle.voxels[model_id], voxel_dir / f"{model_id}.vox")
    w = bundle.build_info.field_weights
    build_doc = {
        "format_version": bundle.build_info.format_version,
        "created_at": bundle.build_info.created_at,
        "corpus_hash": bundle.build_info.corpus_hash,
        "corpus_dir": bundle.build_info.corpus_dir,
        "field_weights": {"name": w.name, "tags": w.tags,
                          "description": w.description, "category": w.category},
    }
    (out_dir / "build.json").write_bytes(
        (json.dumps(build_doc, sort_keys=True, indent=2) + "\n").encode())


def load_bundle(index_dir) -> IndexBundle:
    """Load an index directory; validates versions and voxel references."""
    index_dir = Path(index_dir)
    for name in ("catalog.json", "text.idx", "ratios.idx", "build.json"):
        if not (index_dir / name).is_file():
            raise BundleError(f"index is missing {name} under {index_dir}")
    build_doc = json.loads((index_dir / "build.json").read_text())
    if build_doc.get("format_version") != FORMAT_VERSION:
        raise BundleError(
            f"unsupported index format_version {build_doc.get('format_version')}")
    fw = build_doc.get("field_weights") or {}
    build_info = BuildInfo(
        format_version=build_doc["format_version"],
        created_at=build_doc["created_at"],
        corpus_hash=build_doc["corpus_hash"],
        corpus_dir=build_doc.get("corpus_dir", ""),
        field_weights=FieldWeights(
            fw.get("name", 10.0), fw.get("tags", 5.0),
            fw.get("description", 2.0), fw.get("category", 1.0)),
    )
    catalog_doc = json.loads((index_dir / "catalog.json").read_text())
    if catalog_doc.get("format_version") != FORMAT_VERSION:
        raise BundleError("catalog format_version mismatch")
    records = [_record_from_dict(d) for d in catalog_doc["records"]]
    text_index = text_index_from_bytes((index_dir / "text.idx").read_bytes())
    ratio_index = ratio_index_from_bytes((index_dir / "ratios.idx").read_bytes())
    voxels = {}
    for rec in records:
        if rec.spatial is None:
            continue
        vox_path = index_dir / rec.spatial.voxel_ref
        if not vox_path.is_file():
            raise BundleError(f"missing voxel file {vox_path}")
        voxels[rec.id] = load_vox(vox_path)
    return IndexBundle(records, text_index, ratio_index, voxels, build_info)
