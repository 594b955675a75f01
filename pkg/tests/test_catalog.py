"""Ingestion, catalog records, ratio index, and bundle persistence."""

import json
import struct

import numpy as np
import pytest

from shapefind.catalog import (
    ArtifactRecord,
    Attribution,
    BundleError,
    IngestConfig,
    IngestError,
    ingest_corpus,
    load_bundle,
    map_category,
    MeshStats,
    save_bundle,
)
from shapefind.ratio_index import (
    RatioFormatError,
    RatioIndex,
    ratio_index_bytes,
    ratio_index_from_bytes,
)
from shapefind.text_index import query_text

from helpers import binary_stl_bytes, box_mesh_arrays


# ------------------------------------------------------------- ratio index

def test_ratio_index_sorts_and_lists_entries():
    idx = RatioIndex([("b", 0.5, 0.25), ("a", 1.0, 1.0)])
    assert idx.entries() == [("a", 1.0, 1.0), ("b", 0.5, 0.25)]
    assert len(idx) == 2


def test_ratio_index_rejects_duplicates_and_range():
    with pytest.raises(ValueError):
        RatioIndex([("a", 0.5, 0.5), ("a", 0.6, 0.6)])
    with pytest.raises(ValueError):
        RatioIndex([("a", 0.0, 0.5)])
    with pytest.raises(ValueError):
        RatioIndex([("a", 0.5, 1.5)])


def test_ratio_within_matches_brute_force():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0.05, 1.0, size=(40, 2))
    idx = RatioIndex([(f"m{i:02d}", float(p[0]), float(p[1]))
                      for i, p in enumerate(pts)])
    for q1, q2, rad in [(0.5, 0.5, 0.2), (0.9, 0.1, 0.05), (0.3, 0.8, 0.6)]:
        # brute-force distance check per point, no index involved
        expect = {f"m{i:02d}" for i, p in enumerate(pts)
                  if (p[0] - q1) ** 2 + (p[1] - q2) ** 2 <= rad * rad}
        assert idx.within(q1, q2, rad) == expect


def test_ratio_within_boundary_is_inclusive():
    idx = RatioIndex([("edge", 0.5, 0.5)])
    assert idx.within(0.5, 0.75, 0.25) == {"edge"}
    assert idx.within(0.5, 0.75, 0.2499) == set()


def test_ratio_index_empty_queries():
    idx = RatioIndex([])
    assert idx.within(0.5, 0.5, 10.0) == set()


def test_ratio_roundtrip_bytes():
    idx = RatioIndex([("vase-001", 0.72, 0.31), ("box-000", 1.0, 0.5)])
    back = ratio_index_from_bytes(ratio_index_bytes(idx))
    assert back == idx
    assert np.array_equal(back.points, idx.points)


def test_ratio_bytes_reject_bad_magic_and_truncation():
    good = ratio_index_bytes(RatioIndex([("a", 0.5, 0.5)]))
    with pytest.raises(RatioFormatError):
        ratio_index_from_bytes(b"XXXX" + good[4:])
    with pytest.raises(RatioFormatError):
        ratio_index_from_bytes(good[:-4])
    with pytest.raises(RatioFormatError):
        ratio_index_from_bytes(good[:3])


def test_ratio_bytes_reject_wrong_version():
    good = ratio_index_bytes(RatioIndex([("a", 0.5, 0.5)]))
    bad = good[:4] + struct.pack("<H", 9) + good[6:]
    with pytest.raises(RatioFormatError):
        ratio_index_from_bytes(bad)


# -------------------------------------------------------------- categories

def test_map_category_identity_and_table():
    assert map_category("household", None) == "household"
    assert map_category("  household ", None) == "household"
    table = {"Household": "home", "tools": "tool"}
    assert map_category("Household", table) == "home"
    assert map_category("decor", table) == "decor"


# ----------------------------------------------------------------- corpora

def _write_model(root, model_id, meta, mesh_bytes=b"", mesh_name="mesh.stl",
                 thumb=False):
    d = root / model_id
    d.mkdir()
    if meta is not None:
        d.joinpath("meta.json").write_text(json.dumps(meta))
    if mesh_bytes:
        d.joinpath(mesh_name).write_bytes(mesh_bytes)
    if thumb:
        d.joinpath("thumb.png").write_bytes(b"\x89PNG\r\n\x1a\nstub")
    return d


def _box_stl(dx, dy, dz):
    verts, tris = box_mesh_arrays(dx, dy, dz)
    return binary_stl_bytes(verts, tris)


def _meta(name, **over):
    meta = {
        "name": name,
        "description": f"a {name} for testing",
        "tags": ["test", name],
        "category": "household",
    }
    meta.update(over)
    return meta


@pytest.fixture
def small_corpus(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    _write_model(corpus, "box-000", _meta("box"), _box_stl(40.0, 20.0, 10.0),
                 thumb=True)
    _write_model(corpus, "slab-000", _meta("slab"), _box_stl(80.0, 50.0, 30.0))
    return corpus


def test_ingest_small_corpus(small_corpus, tmp_path):
    out = tmp_path / "index"
    bundle = ingest_corpus(small_corpus, out)
    assert [r.id for r in bundle.catalog] == ["box-000", "slab-000"]

    rec = bundle.record("box-000")
    assert rec.mesh_file == "box-000/mesh.stl"
    assert rec.thumbnail_file == "box-000/thumb.png"
    assert bundle.record("slab-000").thumbnail_file is None
    assert rec.mesh_stats.triangle_count == 12
    assert rec.mesh_stats.watertight is True
    assert rec.mesh_stats.extents_mm == (40.0, 20.0, 10.0)

    sp = rec.spatial
    assert sp is not None
    # box principal extents recover the box dimensions
    assert np.allclose(sp.oabb_extents_mm, (40.0, 20.0, 10.0), atol=1e-9)
    # r1 = e2/e1 = 20/40, r2 = e3/e2 = 10/20
    assert np.allclose(sp.ratios, (0.5, 0.5), atol=1e-12)
    assert sp.voxel_ref == "voxels/box-000.vox"

    grid = bundle.voxels["box-000"]
    assert grid.occupancy.shape[0] == 20
    assert grid.occupied_count > 0
    assert bundle.ratio_index.within(0.5, 0.5, 1e-6) == {"box-000"}

    report = json.loads((out / "ingest_report.json").read_text())
    assert report["ingested"] == 2
    assert report["with_spatial"] == 2
    assert report["skipped"] == 0
    assert report["errors"] == []


def test_ingest_skips_malformed_meta(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    _write_model(corpus, "good-000", _meta("box"), _box_stl(10, 10, 10))
    _write_model(corpus, "bad-json", None, _box_stl(10, 10, 10))
    (corpus / "bad-json" / "meta.json").write_text("{not json")
    _write_model(corpus, "bad-tags", _meta("box", tags="oops"),
                 _box_stl(10, 10, 10))
    _write_model(corpus, "no-name", {"description": "d", "tags": [],
                                     "category": "c"}, _box_stl(10, 10, 10))
    _write_model(corpus, "no-mesh", _meta("ghost"))

    out = tmp_path / "index"
    bundle = ingest_corpus(corpus, out)
    assert [r.id for r in bundle.catalog] == ["good-000"]
    report = json.loads((out / "ingest_report.json").read_text())
    assert report["skipped"] == 4
    skipped_ids = {e["id"] for e in report["errors"]}
    assert skipped_ids == {"bad-json", "bad-tags", "no-name", "no-mesh"}


def test_ingest_keeps_unreadable_mesh_as_text_only(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    _write_model(corpus, "broken-000", _meta("mug"), b"\0" * 10)
    _write_model(corpus, "fine-000", _meta("box"), _box_stl(10, 10, 10))

    out = tmp_path / "index"
    bundle = ingest_corpus(corpus, out)
    rec = bundle.record("broken-000")
    assert rec is not None
    assert rec.mesh_stats is None
    assert rec.spatial is None
    assert "broken-000" not in bundle.voxels
    assert "broken-000" not in bundle.ratio_index.within(0.5, 0.5, 10.0)

    # still findable by text
    hits = query_text(bundle.text_index, "mug")
    assert [h[0] for h in hits] == ["broken-000"]

    report = json.loads((out / "ingest_report.json").read_text())
    assert report["text_only"] == 1
    assert any(w["id"] == "broken-000" for w in report["warnings"])


def test_ingest_applies_category_map(small_corpus, tmp_path):
    config = IngestConfig(category_map={"household": "home"})
    bundle = ingest_corpus(small_corpus, tmp_path / "index", config)
    assert all(r.category == "home" for r in bundle.catalog)


def test_ingest_missing_corpus_raises(tmp_path):
    with pytest.raises(IngestError):
        ingest_corpus(tmp_path / "nope", tmp_path / "index")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(IngestError):
        ingest_corpus(empty, tmp_path / "index")


def test_ingest_rejects_unsafe_ids(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    _write_model(corpus, "ok-000", _meta("box"), _box_stl(10, 10, 10))
    _write_model(corpus, ".hidden", _meta("box"), _box_stl(10, 10, 10))
    bundle = ingest_corpus(corpus, tmp_path / "index")
    assert [r.id for r in bundle.catalog] == ["ok-000"]


def test_bundle_roundtrip_equality(small_corpus, tmp_path):
    out = tmp_path / "index"
    bundle = ingest_corpus(small_corpus, out)
    loaded = load_bundle(out)
    assert loaded == bundle
    assert loaded.build_info.created_at == bundle.build_info.created_at
    assert loaded.spatial_ids() == {"box-000", "slab-000"}


def test_ingest_deterministic_except_created_at(small_corpus, tmp_path):
    out_a = tmp_path / "index_a"
    out_b = tmp_path / "index_b"
    ingest_corpus(small_corpus, out_a)
    ingest_corpus(small_corpus, out_b)

    files_a = sorted(p.relative_to(out_a) for p in out_a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        a = (out_a / rel).read_bytes()
        b = (out_b / rel).read_bytes()
        if rel.name == "build.json":
            da = json.loads(a)
            db = json.loads(b)
            da.pop("created_at")
            db.pop("created_at")
            assert da == db
        else:
            assert a == b, f"{rel} differs between runs"


def test_corpus_hash_tracks_content(small_corpus, tmp_path):
    b1 = ingest_corpus(small_corpus, tmp_path / "i1")
    (small_corpus / "box-000" / "meta.json").write_text(
        json.dumps(_meta("box", description="changed words here")))
    b2 = ingest_corpus(small_corpus, tmp_path / "i2")
    assert b1.build_info.corpus_hash != b2.build_info.corpus_hash


def test_load_bundle_missing_files(small_corpus, tmp_path):
    out = tmp_path / "index"
    ingest_corpus(small_corpus, out)
    (out / "text.idx").unlink()
    with pytest.raises(BundleError):
        load_bundle(out)


def test_load_bundle_missing_voxel_file(small_corpus, tmp_path):
    out = tmp_path / "index"
    ingest_corpus(small_corpus, out)
    (out / "voxels" / "box-000.vox").unlink()
    with pytest.raises(BundleError, match="box-000"):
        load_bundle(out)


def test_load_bundle_rejects_future_version(small_corpus, tmp_path):
    out = tmp_path / "index"
    ingest_corpus(small_corpus, out)
    doc = json.loads((out / "build.json").read_text())
    doc["format_version"] = 99
    (out / "build.json").write_text(json.dumps(doc))
    with pytest.raises(BundleError):
        load_bundle(out)


def test_catalog_json_is_canonical(small_corpus, tmp_path):
    out = tmp_path / "index"
    ingest_corpus(small_corpus, out)
    raw = (out / "catalog.json").read_text()
    doc = json.loads(raw)
    assert raw == json.dumps(doc, sort_keys=True, indent=2) + "\n"
    ids = [r["id"] for r in doc["records"]]
    assert ids == sorted(ids)


def test_save_bundle_standalone_roundtrip(tmp_path):
    # a bundle with a text-only record survives save/load unchanged
    rec = ArtifactRecord(
        id="only-text", name="mystery", description="no mesh survived",
        tags=("broken",), category="misc",
        attribution=Attribution(designer="nobody"),
        mesh_file="only-text/mesh.stl", thumbnail_file=None,
        mesh_stats=MeshStats((1.0, 1.0, 1.0), 4, False), spatial=None)
    from shapefind.catalog import BuildInfo, IndexBundle
    from shapefind.text_index import build_text_index, FieldWeights
    bundle = IndexBundle(
        catalog=[rec],
        text_index=build_text_index([rec]),
        ratio_index=RatioIndex([]),
        voxels={},
        build_info=BuildInfo(1, "2026-01-01T00:00:00+00:00", "0" * 64, "/tmp/c",
                             FieldWeights()),
    )
    out = tmp_path / "index"
    save_bundle(bundle, out)
    assert load_bundle(out) == bundle
