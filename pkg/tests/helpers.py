"""Shared geometry builders and brute-force oracles for the test suite.

Everything here is deliberately independent of the package internals: the
oracles recompute expected values from first principles (enumeration, ray
casting, direct formula) so tests never just replay implementation output.
"""

from __future__ import annotations

import struct

import numpy as np

# ---------------------------------------------------------------- builders

# Unit cube triangulation: 12 triangles with outward winding.
_CUBE_FACES = [
    # -z
    (0, 2, 1), (0, 3, 2),
    # +z
    (4, 5, 6), (4, 6, 7),
    # -y
    (0, 1, 5), (0, 5, 4),
    # +x
    (1, 2, 6), (1, 6, 5),
    # +y
    (2, 3, 7), (2, 7, 6),
    # -x
    (3, 0, 4), (3, 4, 7),
]


def box_mesh_arrays(dx: float, dy: float, dz: float, origin=(0.0, 0.0, 0.0)):
    """Vertices and triangles of an axis-aligned box with one corner at origin."""
    ox, oy, oz = origin
    verts = np.array([
        [ox, oy, oz], [ox + dx, oy, oz], [ox + dx, oy + dy, oz], [ox, oy + dy, oz],
        [ox, oy, oz + dz], [ox + dx, oy, oz + dz],
        [ox + dx, oy + dy, oz + dz], [ox, oy + dy, oz + dz],
    ], dtype=np.float64)
    tris = np.array(_CUBE_FACES, dtype=np.int64)
    return verts, tris


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    k = np.array([
        [0, -axis[2], axis[1]],
        [axis[2], 0, -axis[0]],
        [-axis[1], axis[0], 0],
    ])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def binary_stl_bytes(verts: np.ndarray, tris: np.ndarray, header=b"oracle") -> bytes:
    """Hand-rolled binary STL writer (independent of the package writer)."""
    out = [header.ljust(80, b"\0")[:80], struct.pack("<I", len(tris))]
    for tri in tris:
        a, b, c = (verts[i] for i in tri)
        n = np.cross(b - a, c - a)
        ln = np.linalg.norm(n)
        if ln > 0:
            n = n / ln
        out.append(struct.pack("<3f", *n.astype(np.float32)))
        for v in (a, b, c):
            out.append(struct.pack("<3f", *v.astype(np.float32)))
        out.append(struct.pack("<H", 0))
    return b"".join(out)


def ascii_stl_text(verts: np.ndarray, tris: np.ndarray, name="oracle") -> str:
    lines = [f"solid {name}"]
    for tri in tris:
        a, b, c = (verts[i] for i in tri)
        n = np.cross(b - a, c - a)
        ln = np.linalg.norm(n)
        if ln > 0:
            n = n / ln
        lines.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
        lines.append("    outer loop")
        for v in (a, b, c):
            lines.append(f"      vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}")
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append(f"endsolid {name}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- oracles

def point_in_mesh_oracle(points: np.ndarray, verts: np.ndarray,
                         tris: np.ndarray) -> np.ndarray:
    """Even-odd inside test by ray casting along +x (Möller-Trumbore).

    Points are given a deterministic sub-micron nudge so rays avoid exact
    edge hits.  Only suitable for closed meshes; used as the ground truth
    for solid voxelization.
    """
    pts = np.asarray(points, dtype=np.float64) + np.array([0.0, 1.37e-7, 2.11e-7])
    direction = np.array([1.0, 0.0, 0.0])
    v0 = verts[tris[:, 0]]
    e1 = verts[tris[:, 1]] - v0
    e2 = verts[tris[:, 2]] - v0
    inside = np.zeros(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        h = np.cross(direction, e2)
        a = np.einsum("ij,ij->i", e1, h)
        mask = np.abs(a) > 1e-14
        f = np.zeros_like(a)
        f[mask] = 1.0 / a[mask]
        s = p - v0
        u = f * np.einsum("ij,ij->i", s, h)
        q = np.cross(s, e1)
        v = f * (q @ direction)
        t = f * np.einsum("ij,ij->i", e2, q)
        hits = mask & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t > 1e-12)
        inside[i] = hits.sum() % 2 == 1
    return inside


def triangle_box_overlap_oracle(tri: np.ndarray, center: np.ndarray,
                                half: float, samples: int = 60) -> bool:
    """Dense barycentric sampling check that a triangle touches a box.

    One-sided oracle: True means the triangle definitely intersects the box
    (a sample point landed inside).  Used to confirm marked shell cells.
    """
    us = np.linspace(0.0, 1.0, samples)
    pts = []
    for u in us:
        for v in np.linspace(0.0, 1.0 - u, max(2, int(samples * (1 - u)) + 1)):
            pts.append(tri[0] + u * (tri[1] - tri[0]) + v * (tri[2] - tri[0]))
    pts = np.array(pts)
    lo = center - half
    hi = center + half
    return bool((((pts >= lo - 1e-12) & (pts <= hi + 1e-12)).all(axis=1)).any())


def brute_force_nearest(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Index of nearest dst point for each src point, O(n*m)."""
    d2 = ((src[:, None, :] - dst[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def signed_volume(verts: np.ndarray, tris: np.ndarray) -> float:
    """Signed volume of a closed mesh (positive for outward winding)."""
    tri = verts[tris]
    return float(np.einsum("ij,ij->i", tri[:, 0],
                           np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def _tri_midpoint_uv(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric coords of all sub-triangle edge midpoints at subdivision n.

    Splitting a triangle into n*n congruent copies and taking the three edge
    midpoints of each copy gives the degree-2 midpoint quadrature per copy,
    so summing unit dots over them reproduces the triangle's exact area,
    centroid and second moments.  Shared midpoints appear twice on purpose:
    the double mass is part of the rule.
    """
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    up = i + j <= n - 1
    iu, ju = i[up], j[up]
    us = [iu + 0.5, iu, iu + 0.5]
    vs = [ju, ju + 0.5, ju + 0.5]
    down = i + j <= n - 2
    idn, jd = i[down], j[down]
    us += [idn + 0.5, idn + 1.0, idn + 0.5]
    vs += [jd + 0.5, jd + 0.5, jd + 1.0]
    return np.concatenate(us) / n, np.concatenate(vs) / n


_UV_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def trace_strokes(verts: np.ndarray, tris: np.ndarray,
                  inset_frac: float = 0.022) -> list[np.ndarray]:
    """Deterministic exhaustive trace of a closed mesh, biased slightly inward.

    Emulates a careful tracer dabbing the whole surface: a touch on every
    mesh vertex plus a lattice of touch points across each face, every point
    pushed inside along the local normal by a small fraction of the mesh
    size.  Vertex dabs pin the solid's exact extremes; the face lattice uses
    the midpoint quadrature so the cloud's second moments equal each face's
    true surface integral, which keeps the sketch's principal frame agreeing
    with the model's.  Plain line strokes are avoided deliberately: any
    preferred stroke direction (mesh edges, scanlines) weights the cloud's
    covariance along that direction and twists the recovered frame.
    """
    tri = verts[tris]
    raw = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(raw, axis=1)
    ok = norms > 1e-12
    face_n = np.zeros_like(raw)
    face_n[ok] = raw[ok] / norms[ok, None]
    if signed_volume(verts, tris) < 0:
        face_n = -face_n
        raw = -raw

    # area-weighted vertex normals give a sensible inward direction at
    # corners where several faces meet
    vert_n = np.zeros_like(verts)
    for k in range(3):
        np.add.at(vert_n, tris[:, k], raw)
    vn_len = np.linalg.norm(vert_n, axis=1)
    flat = vn_len < 1e-12
    vert_n[~flat] = vert_n[~flat] / vn_len[~flat, None]
    vert_n[flat] = 0.0

    # at edges and corners the averaged normal makes a shallow angle with
    # each face; scale the offset so the depth below every incident face
    # still reaches delta (capped, so needle vertices cannot blow it up)
    min_proj = np.ones(len(verts))
    for k in range(3):
        proj = np.einsum("ij,ij->i", vert_n[tris[:, k]], face_n)
        np.minimum.at(min_proj, tris[:, k], proj)
    vert_scale = 1.0 / np.clip(min_proj, 0.5, 1.0)

    ext = verts.max(axis=0) - verts.min(axis=0)
    delta = min(inset_frac * ext.max(), 0.35 * max(ext.min(), 1e-9))

    strokes: list[np.ndarray] = []
    inset = verts - delta * vert_scale[:, None] * vert_n
    for p in inset:
        strokes.append(np.stack([p, p]).astype(np.float64))

    # face coverage; dots are zero-length dabs so downstream resampling
    # cannot skew their density the way it does for long chords
    half_cell = ext.max() / 40.0
    for t in range(len(tris)):
        if not ok[t]:
            continue
        a, b, c = tri[t]
        longest = max(np.linalg.norm(b - a), np.linalg.norm(c - b),
                      np.linalg.norm(a - c))
        n = max(1, int(np.ceil(longest / (2.8 * half_cell))))
        if n not in _UV_CACHE:
            _UV_CACHE[n] = _tri_midpoint_uv(n)
        u, v = _UV_CACHE[n]
        pts = a + u[:, None] * (b - a) + v[:, None] * (c - a) - delta * face_n[t]
        for p in pts:
            strokes.append(np.stack([p, p]))
    return strokes


def surface_strokes(verts: np.ndarray, tris: np.ndarray, rng,
                    n_strokes: int = 24) -> list[np.ndarray]:
    """Two-point strokes traced on area-sampled surface triangles.

    Alternates full triangle edges (sharp features, bounding extremes) with
    chords between two uniform points inside the triangle (even coverage of
    large faces, so the cloud's covariance tracks the real surface).
    """
    tri = verts[tris]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    picks = rng.choice(len(tri), size=n_strokes, p=areas / areas.sum())
    strokes = []
    for n, t in enumerate(picks):
        a, b, c = tri[t]
        if n % 2:
            edge = ((a, b), (b, c), (c, a))[(n // 2) % 3]
            strokes.append(np.array(edge, dtype=np.float64))
            continue
        uv = rng.random((2, 2))
        flip = uv.sum(axis=1) > 1.0
        uv[flip] = 1.0 - uv[flip]
        p = a + uv[:, :1] * (b - a) + uv[:, 1:] * (c - a)
        if np.linalg.norm(p[1] - p[0]) < 1e-9:
            p = np.stack([a, b])
        strokes.append(p.astype(np.float64))
    return strokes
