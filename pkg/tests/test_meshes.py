"""Mesh parsing, serialization, and watertightness."""

import numpy as np
import pytest

from shapefind.meshes import (
    MeshError,
    TriangleMesh,
    is_watertight,
    mesh_to_stl_bytes,
    parse_mesh,
    parse_obj,
    parse_stl_ascii,
    parse_stl_binary,
)

from helpers import ascii_stl_text, binary_stl_bytes, box_mesh_arrays


@pytest.fixture
def box_arrays():
    return box_mesh_arrays(40.0, 20.0, 10.0)


class TestStlParsing:
    def test_binary_box_vertices_and_triangles(self, box_arrays):
        verts, tris = box_arrays
        mesh = parse_mesh(binary_stl_bytes(verts, tris), "stl")
        # 8 unique corners after dedup of the 36 soup vertices, 12 triangles
        assert len(mesh.vertices) == 8
        assert mesh.triangle_count == 12
        assert np.allclose(sorted(mesh.extents()), [10.0, 20.0, 40.0])

    def test_ascii_equals_binary_geometry(self, box_arrays):
        verts, tris = box_arrays
        m_bin = parse_mesh(binary_stl_bytes(verts, tris), "stl")
        m_asc = parse_mesh(ascii_stl_text(verts, tris).encode(), "stl")
        # same vertex set and same triangle set regardless of encoding
        sb = {tuple(np.round(v, 6)) for v in m_bin.vertices}
        sa = {tuple(np.round(v, 6)) for v in m_asc.vertices}
        assert sb == sa
        tb = {tuple(sorted(map(tuple, m_bin.vertices[t]))) for t in m_bin.triangles}
        ta = {tuple(sorted(map(tuple, m_asc.vertices[t]))) for t in m_asc.triangles}
        assert {tuple(np.round(np.array(t), 6).ravel()) for t in tb} == \
            {tuple(np.round(np.array(t), 6).ravel()) for t in ta}

    def test_sniffing_without_hint(self, box_arrays):
        verts, tris = box_arrays
        assert parse_mesh(binary_stl_bytes(verts, tris)).triangle_count == 12
        assert parse_mesh(ascii_stl_text(verts, tris).encode()).triangle_count == 12

    def test_truncated_binary_reports_offset(self, box_arrays):
        verts, tris = box_arrays
        data = binary_stl_bytes(verts, tris)
        cut = data[: 84 + 50 * 5 + 17]
        with pytest.raises(MeshError) as err:
            parse_stl_binary(cut)
        assert str(len(cut)) in str(err.value)
        assert "truncated" in str(err.value)

    def test_zero_triangle_file_rejected(self):
        with pytest.raises(MeshError):
            parse_stl_binary(b"\0" * 80 + b"\0\0\0\0")

    def test_garbage_rejected(self):
        with pytest.raises(MeshError):
            parse_mesh(b"\x13\x07garbage")

    def test_roundtrip_through_serializer(self, box_arrays):
        verts, tris = box_arrays
        mesh = parse_mesh(binary_stl_bytes(verts, tris))
        again = parse_mesh(mesh_to_stl_bytes(mesh))
        assert np.allclose(sorted(again.extents()), sorted(mesh.extents()))
        assert again.triangle_count == mesh.triangle_count
        # serializer output is deterministic
        assert mesh_to_stl_bytes(mesh) == mesh_to_stl_bytes(again)


class TestObjParsing:
    def test_triangle_faces(self):
        obj = b"""
# a single square split by the parser
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
f 1 2 3 4
"""
        mesh = parse_obj(obj)
        assert len(mesh.vertices) == 4
        assert mesh.triangle_count == 2  # quad fan-triangulated

    def test_negative_and_slash_indices(self):
        obj = b"""
v 0 0 0
v 2 0 0
v 0 2 0
f -3/1/1 -2/2/2 -1/3/3
"""
        mesh = parse_obj(obj)
        assert mesh.triangle_count == 1
        assert np.allclose(mesh.extents(), [2, 2, 0])

    def test_face_out_of_range(self):
        with pytest.raises(MeshError):
            parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")

    def test_no_faces_rejected(self):
        with pytest.raises(MeshError):
            parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\n")


class TestDedup:
    def test_nearby_vertices_merge(self):
        # same box written as triangle soup with 5e-8 mm noise: all 36
        # soup vertices must collapse back to the 8 corners
        verts, tris = box_mesh_arrays(10, 10, 10)
        soup = verts[tris].reshape(-1, 3)
        rng = np.random.default_rng(11)
        soup = soup + rng.uniform(-5e-8, 5e-8, soup.shape)
        mesh = parse_mesh(binary_stl_bytes(
            soup, np.arange(36).reshape(-1, 3)))
        assert len(mesh.vertices) == 8

    def test_distinct_vertices_survive(self):
        verts = np.array([[0, 0, 0], [1e-3, 0, 0], [0, 1e-3, 0]], dtype=float)
        tris = np.array([[0, 1, 2]])
        mesh = TriangleMesh(verts, tris)
        assert len(mesh.vertices) == 3


class TestWatertight:
    def test_closed_box(self, box_arrays):
        verts, tris = box_arrays
        assert is_watertight(parse_mesh(binary_stl_bytes(verts, tris)))

    def test_open_box_missing_face(self, box_arrays):
        verts, tris = box_arrays
        open_tris = tris[:-1]  # drop one face triangle
        mesh = parse_mesh(binary_stl_bytes(verts, open_tris))
        assert not is_watertight(mesh)

    def test_single_triangle_not_watertight(self):
        mesh = TriangleMesh(
            np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float),
            np.array([[0, 1, 2]]),
        )
        assert not is_watertight(mesh)

    def test_two_disjoint_closed_shells(self):
        v1, t1 = box_mesh_arrays(5, 5, 5)
        v2, t2 = box_mesh_arrays(3, 3, 3, origin=(20, 0, 0))
        verts = np.vstack([v1, v2])
        tris = np.vstack([t1, t2 + len(v1)])
        assert is_watertight(TriangleMesh(verts, tris))

    def test_inverted_face_breaks_manifold(self, box_arrays):
        verts, tris = box_arrays
        bad = tris.copy()
        bad[0] = bad[0][::-1]  # flip winding of one triangle
        assert not is_watertight(TriangleMesh(verts, bad))
