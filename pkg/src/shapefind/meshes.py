"""Triangle mesh parsing, serialization, and validation.

Supports binary and ASCII STL plus a practical subset of Wavefront OBJ
(vertices and faces; polygons are fan-triangulated).  All coordinates are
kept in millimeters as float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

# Vertices closer than this (per axis, in mm) are merged during parsing.
DEDUP_TOLERANCE_MM = 1e-6

_STL_HEADER_BYTES = 80
_STL_TRI_BYTES = 50  # 12 float32 + uint16 attribute count


class MeshError(ValueError):
    """Raised when bytes cannot be parsed into a usable mesh."""


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle soup.

    vertices: (n, 3) float64 array, millimeters.
    triangles: (m, 3) int array of vertex indices.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        tris = np.asarray(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError("vertex array must have shape (n, 3)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangle array must have shape (m, 3)")
        if len(tris) == 0:
            raise MeshError("mesh has no triangles")
        if not np.isfinite(verts).all():
            raise MeshError("mesh contains non-finite vertex coordinates")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise MeshError("triangle index out of range")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def extents(self) -> np.ndarray:
        """Axis-aligned extents (max - min) per axis, in mm."""
        return self.vertices.max(axis=0) - self.vertices.min(axis=0)

    def corners(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding corners (lo, hi)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _dedup_vertices(verts: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge vertices that quantize to the same 1e-6 mm cell, drop collapsed tris."""
    keys = np.round(verts / DEDUP_TOLERANCE_MM).astype(np.int64)
    _, first_idx, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    merged = verts[first_idx]
    remapped = inverse[tris]
    # triangles that collapsed onto a shared vertex carry no surface
    a, b, c = remapped[:, 0], remapped[:, 1], remapped[:, 2]
    keep = (a != b) & (b != c) & (a != c)
    remapped = remapped[keep]
    if len(remapped) == 0:
        raise MeshError("mesh has no non-degenerate triangles")
    return merged, remapped


def _build_mesh(verts: np.ndarray, tris: np.ndarray) -> TriangleMesh:
    if len(verts) == 0 or len(tris) == 0:
        raise MeshError("mesh has no triangles")
    verts = np.asarray(verts, dtype=np.float64)
    tris = np.asarray(tris, dtype=np.int64)
    if not np.isfinite(verts).all():
        raise MeshError("mesh contains non-finite vertex coordinates")
    if tris.min() < 0 or tris.max() >= len(verts):
        raise MeshError("face references a vertex that does not exist")
    verts, tris = _dedup_vertices(verts, tris)
    return TriangleMesh(verts, tris)


def parse_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < _STL_HEADER_BYTES + 4:
        raise MeshError(
            f"truncated binary STL: need at least {_STL_HEADER_BYTES + 4} bytes "
            f"for header and count, got {len(data)}"
        )
    (count,) = struct.unpack_from("<I", data, _STL_HEADER_BYTES)
    expected = _STL_HEADER_BYTES + 4 + count * _STL_TRI_BYTES
    if len(data) < expected:
        raise MeshError(
            f"truncated binary STL: {count} triangles need {expected} bytes, "
            f"data ends at byte {len(data)}"
        )
    if count == 0:
        raise MeshError("mesh has no triangles")
    rec = np.dtype(
        [("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
    )
    body = np.frombuffer(data, dtype=rec, count=count, offset=_STL_HEADER_BYTES + 4)
    flat = body["verts"].astype(np.float64).reshape(-1, 3)
    tris = np.arange(len(flat), dtype=np.int64).reshape(-1, 3)
    return _build_mesh(flat, tris)


def parse_stl_ascii(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MeshError("ASCII STL contains non-ASCII bytes") from exc
    tokens = text.split()
    coords: list[float] = []
    i = 0
    n = len(tokens)
    while i < n:
        if tokens[i] == "vertex":
            if i + 3 >= n:
                raise MeshError("ASCII STL ends mid-vertex")
            try:
                coords.extend(float(tokens[i + k]) for k in (1, 2, 3))
            except ValueError as exc:
                raise MeshError(f"bad vertex coordinate near token {i}") from exc
            i += 4
        else:
            i += 1
    if len(coords) == 0:
        raise MeshError("mesh has no triangles")
    if len(coords) % 9 != 0:
        raise MeshError("ASCII STL vertex count is not a multiple of 3")
    flat = np.array(coords, dtype=np.float64).reshape(-1, 3)
    tris = np.arange(len(flat), dtype=np.int64).reshape(-1, 3)
    return _build_mesh(flat, tris)


def parse_obj(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MeshError("OBJ contains invalid UTF-8") from exc
    verts: list[list[float]] = []
    faces: list[list[int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"OBJ line {lineno}: vertex needs 3 coordinates")
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshError(f"OBJ line {lineno}: bad vertex coordinate") from exc
        elif parts[0] == "f":
            if len(parts) < 4:
                raise MeshError(f"OBJ line {lineno}: face needs at least 3 vertices")
            idx = []
            for ref in parts[1:]:
                head = ref.split("/")[0]
                try:
                    k = int(head)
                except ValueError as exc:
                    raise MeshError(f"OBJ line {lineno}: bad face index {ref!r}") from exc
                if k == 0:
                    raise MeshError(f"OBJ line {lineno}: face index 0 is not valid")
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
        # other directives (vn, vt, usemtl, ...) carry no geometry we need
    if not faces:
        raise MeshError("mesh has no triangles")
    tris = []
    for face in faces:
        for t in range(1, len(face) - 1):
            tris.append([face[0], face[t], face[t + 1]])
    return _build_mesh(np.array(verts, dtype=np.float64), np.array(tris, dtype=np.int64))


def _looks_ascii_stl(data: bytes) -> bool:
    head = data[:512].lstrip()
    if not head.startswith(b"solid"):
        return False
    # binary files sometimes carry a "solid" header; require a facet keyword
    return b"facet" in data[:4096] or b"endsolid" in data


def parse_mesh(data: bytes, format_hint: str | None = None) -> TriangleMesh:
    """Parse mesh bytes into a TriangleMesh.

    format_hint: "stl", "obj", or None to sniff.  Raises MeshError on
    malformed or empty input.
    """
    if format_hint is not None:
        hint = format_hint.lower().lstrip(".")
        if hint == "obj":
            return parse_obj(data)
        if hint == "stl":
            if _looks_ascii_stl(data):
                return parse_stl_ascii(data)
            return parse_stl_binary(data)
        raise MeshError(f"unknown mesh format hint {format_hint!r}")
    if _looks_ascii_stl(data):
        return parse_stl_ascii(data)
    try:
        return parse_stl_binary(data)
    except MeshError:
        return parse_obj(data)


def mesh_to_stl_bytes(mesh: TriangleMesh, header: bytes = b"shapefind binary STL") -> bytes:
    """Serialize to binary STL (little-endian, unit facet normals)."""
    tris = mesh.vertices[mesh.triangles]  # (m, 3, 3)
    normals = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    lengths = np.linalg.norm(normals, axis=1)
    safe = lengths > 0
    normals[safe] /= lengths[safe, None]
    normals[~safe] = 0.0
    rec = np.dtype([("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")])
    body = np.zeros(len(tris), dtype=rec)
    body["normal"] = normals.astype(np.float32)
    body["verts"] = tris.astype(np.float32)
    head = header[:_STL_HEADER_BYTES].ljust(_STL_HEADER_BYTES, b"\0")
    return head + struct.pack("<I", len(tris)) + body.tobytes()


def is_watertight(mesh: TriangleMesh) -> bool:
    """True when every directed edge occurs exactly once and has a reverse.

    This is the usual closed-2-manifold edge condition; meshes made of
    several disjoint closed shells pass.
    """
    tris = mesh.triangles
    n = len(mesh.vertices)
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    fwd = edges[:, 0].astype(np.int64) * n + edges[:, 1]
    rev = edges[:, 1].astype(np.int64) * n + edges[:, 0]
    if len(np.unique(fwd)) != len(fwd):
        return False
    return bool(np.isin(fwd, rev).all())
