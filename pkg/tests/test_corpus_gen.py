"""Procedural corpus generator: mesh validity, determinism, variety."""

import json
import zlib

import numpy as np
import pytest

from shapefind.corpus_gen import (
    FAMILIES,
    GenSpec,
    build_family_mesh,
    generate_corpus,
    make_box,
    make_cylinder,
    make_ellipsoid,
    make_revolution,
    make_torus,
    make_tube,
)
from shapefind.geometry import clamp_flat_extents, compute_oabb, compute_ratios
from shapefind.meshes import is_watertight, parse_mesh
from shapefind.voxel import voxelize_mesh

from helpers import point_in_mesh_oracle


class TestBuilders:
    def test_box_watertight(self):
        assert is_watertight(make_box(10, 20, 30))

    def test_cylinder_watertight(self):
        assert is_watertight(make_cylinder(10, 30))

    def test_ellipsoid_watertight(self):
        assert is_watertight(make_ellipsoid(10, 8, 6))

    def test_torus_watertight(self):
        assert is_watertight(make_torus(20, 5))

    def test_tube_watertight(self):
        path = np.stack([np.linspace(0, 40, 15),
                         np.sin(np.linspace(0, 3, 15)) * 8,
                         np.zeros(15)], axis=1)
        assert is_watertight(make_tube(path, 3.0))

    def test_revolution_rejects_off_axis_profile(self):
        with pytest.raises(ValueError):
            make_revolution(np.array([[1.0, 0.0], [2.0, 1.0], [0.0, 2.0]]))

    def test_torus_solid_fill_matches_ray_oracle(self):
        mesh = make_torus(30, 8)
        grid = voxelize_mesh(mesh)
        idx = np.indices(grid.dims).reshape(3, -1).T
        centers = grid.origin + (idx + 0.5) * grid.pitch
        inside = point_in_mesh_oracle(centers, mesh.vertices, mesh.triangles)
        occ = grid.occupancy[idx[:, 0], idx[:, 1], idx[:, 2]]
        # hole of the donut stays empty, tube interior fills
        assert occ[inside].all()
        center_cell = np.floor((np.zeros(3) - grid.origin) / grid.pitch).astype(int)
        assert not grid.occupancy[center_cell[0], center_cell[1], center_cell[2]]


class TestFamilies:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_watertight_and_usable(self, family):
        for seed in (0, 1):
            rng = np.random.default_rng([99, seed])
            mesh = build_family_mesh(family, rng)
            assert is_watertight(mesh), family
            extents, frame, flags = compute_oabb(mesh)
            r1, r2 = compute_ratios(clamp_flat_extents(extents))
            assert 0 < r1 <= 1 and 0 < r2 <= 1

    def test_ratio_variety_across_families(self):
        ratios = {}
        for family in FAMILIES:
            rng = np.random.default_rng([5, zlib.crc32(family.encode()) % 1000])
            mesh = build_family_mesh(family, rng)
            extents, _, _ = compute_oabb(mesh)
            ratios[family] = compute_ratios(clamp_flat_extents(extents))
        # flat plates are thin, cubes are nearly equilateral
        assert ratios["flat_plate"][1] < 0.1
        assert ratios["cube"][0] > 0.8 and ratios["cube"][1] > 0.7
        # oval rings stay wider than deep but never circular
        assert 0.5 < ratios["torus"][0] < 0.85
        assert ratios["torus"][1] < 0.4

    def test_double_torus_two_components(self):
        rng = np.random.default_rng([2, 4])
        mesh = build_family_mesh("double_torus", rng)
        # x extent roughly twice y extent for side-by-side rings
        e = mesh.extents()
        assert e[0] > 1.8 * e[1]
        assert is_watertight(mesh)


class TestGenerateCorpus:
    def test_layout_and_manifest(self, tmp_path):
        spec = GenSpec(out_dir=tmp_path / "c", count=12, seed=3)
        models = generate_corpus(spec)
        assert len(models) == 12
        ids = [m.id for m in models]
        assert len(set(ids)) == 12
        for m in models:
            assert (m.path / "mesh.stl").is_file()
            meta = json.loads((m.path / "meta.json").read_text())
            assert meta["name"]
            assert isinstance(meta["tags"], list) and meta["tags"]
            assert meta["category"]
            mesh = parse_mesh((m.path / "mesh.stl").read_bytes(), "stl")
            assert mesh.triangle_count > 0

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_corpus(GenSpec(out_dir=a, count=8, seed=11))
        generate_corpus(GenSpec(out_dir=b, count=8, seed=11))
        files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
        assert files_a == files_b
        for rel in files_a:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_seed_changes_output(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_corpus(GenSpec(out_dir=a, count=4, seed=1))
        generate_corpus(GenSpec(out_dir=b, count=4, seed=2))
        same = all(
            (a / p.relative_to(b)).read_bytes() == p.read_bytes()
            for p in b.rglob("mesh.stl")
        )
        assert not same

    def test_family_subset(self, tmp_path):
        spec = GenSpec(out_dir=tmp_path / "c", count=6, seed=0,
                       families=("torus", "bowl"))
        models = generate_corpus(spec)
        assert {m.family for m in models} == {"torus", "bowl"}

    def test_unknown_family_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            GenSpec(out_dir=tmp_path, count=3, families=("pyramid",))

    def test_some_vases_are_planters_only(self, tmp_path):
        spec = GenSpec(out_dir=tmp_path / "c", count=120, seed=7,
                       families=("vase_profile",))
        models = generate_corpus(spec)
        vase_tagged = 0
        planter_only = 0
        for m in models:
            meta = json.loads((m.path / "meta.json").read_text())
            tags = set(meta["tags"])
            if "vase" in tags:
                vase_tagged += 1
            elif "planter" in tags:
                planter_only += 1
        assert vase_tagged > 0
        assert planter_only > 0
