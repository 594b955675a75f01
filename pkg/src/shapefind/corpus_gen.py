"""Procedural corpus of 3D-printable models for tests and demos.

Every family builds a watertight mesh with seeded, randomized dimensions so
bounding-box proportions spread across (0, 1]^2, plus varied names, tags,
and descriptions (some vases are described only as planters, mirroring the
synonym noise of a real repository).  Within a family the dominant
proportion cycles through disjoint one-cell bins of the normalized voxel
grid, so two models of the same family never share the span that a coarse
grid could confuse them on; the remaining dimensions stay free draws.
Output layout is one directory per model: corpus/<id>/mesh.stl plus
meta.json, occasionally a thumb.png.  Generation is fully deterministic in
(seed, count, families).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .meshes import TriangleMesh, mesh_to_stl_bytes
from .voxel import DEFAULT_TARGET_CELLS

FAMILIES = (
    "bowl",
    "box",
    "cube",
    "cylinder",
    "double_torus",
    "flat_plate",
    "s_hook",
    "sphere",
    "torus",
    "vase_profile",
)


@dataclass(frozen=True)
class GenSpec:
    """Corpus generation request."""

    out_dir: Path
    count: int = 50
    seed: int = 7
    families: tuple[str, ...] = FAMILIES

    def __post_init__(self):
        if self.count < 0:
            raise ValueError("count must be non-negative")
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValueError(f"unknown families: {sorted(unknown)}")
        if not self.families:
            raise ValueError("need at least one family")


# ------------------------------------------------------------ mesh builders

def _signed_volume(verts: np.ndarray, tris: np.ndarray) -> float:
    t = verts[tris]
    return float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum() / 6.0)


def _orient_outward(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    if _signed_volume(verts, tris) < 0:
        tris = tris[:, [0, 2, 1]]
    return tris


def make_box(dx: float, dy: float, dz: float) -> TriangleMesh:
    verts = np.array([
        [0, 0, 0], [dx, 0, 0], [dx, dy, 0], [0, dy, 0],
        [0, 0, dz], [dx, 0, dz], [dx, dy, dz], [0, dy, dz],
    ], dtype=np.float64)
    tris = np.array([
        (0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7),
        (0, 1, 5), (0, 5, 4), (1, 2, 6), (1, 6, 5),
        (2, 3, 7), (2, 7, 6), (3, 0, 4), (3, 4, 7),
    ], dtype=np.int64)
    return TriangleMesh(verts, tris)


def make_revolution(profile: np.ndarray, n_seg: int = 32) -> TriangleMesh:
    """Solid of revolution about z from an open (radius, z) profile.

    The first and last profile points must sit on the axis (radius 0); the
    interior points must have positive radius.  Produces a closed mesh with
    pole fans at both ends.
    """
    prof = np.asarray(profile, dtype=np.float64)
    if prof[0, 0] != 0.0 or prof[-1, 0] != 0.0:
        raise ValueError("profile must start and end on the axis")
    if (prof[1:-1, 0] <= 0).any():
        raise ValueError("interior profile radii must be positive")
    rings = prof[1:-1]
    theta = 2 * np.pi * np.arange(n_seg) / n_seg
    ct, st = np.cos(theta), np.sin(theta)
    verts = [np.array([[0.0, 0.0, prof[0, 1]]])]
    for r, z in rings:
        verts.append(np.stack([r * ct, r * st, np.full(n_seg, z)], axis=1))
    verts.append(np.array([[0.0, 0.0, prof[-1, 1]]]))
    verts = np.vstack(verts)
    pole_b = 0
    pole_t = len(verts) - 1
    ring0 = 1
    tris = []
    nr = len(rings)
    for j in range(n_seg):
        jn = (j + 1) % n_seg
        tris.append((pole_b, ring0 + jn, ring0 + j))
    for i in range(nr - 1):
        a = ring0 + i * n_seg
        b = ring0 + (i + 1) * n_seg
        for j in range(n_seg):
            jn = (j + 1) % n_seg
            tris.append((a + j, a + jn, b + jn))
            tris.append((a + j, b + jn, b + j))
    last = ring0 + (nr - 1) * n_seg
    for j in range(n_seg):
        jn = (j + 1) % n_seg
        tris.append((pole_t, last + j, last + jn))
    tris = _orient_outward(verts, np.array(tris, dtype=np.int64))
    return TriangleMesh(verts, tris)


def make_ellipsoid(rx: float, ry: float, rz: float,
                   n_seg: int = 28, n_rings: int = 14) -> TriangleMesh:
    t = np.pi * np.arange(n_rings + 1) / n_rings
    profile = np.stack([np.sin(t), -np.cos(t)], axis=1)
    profile[0, 0] = 0.0
    profile[-1, 0] = 0.0  # sin(pi) is not exactly zero in floats
    unit = make_revolution(profile, n_seg)
    verts = unit.vertices * np.array([rx, ry, rz])
    return TriangleMesh(verts, unit.triangles)


def make_cylinder(radius: float, height: float, n_seg: int = 32) -> TriangleMesh:
    profile = np.array([
        [0.0, 0.0], [radius, 0.0], [radius, height], [0.0, height],
    ])
    return make_revolution(profile, n_seg)


def make_torus(major: float, minor: float, n_major: int = 28,
               n_minor: int = 14) -> TriangleMesh:
    phi = 2 * np.pi * np.arange(n_major) / n_major
    theta = 2 * np.pi * np.arange(n_minor) / n_minor
    ring_r = major + minor * np.cos(theta)[None, :]
    x = ring_r * np.cos(phi)[:, None]
    y = ring_r * np.sin(phi)[:, None]
    z = np.broadcast_to(minor * np.sin(theta)[None, :], x.shape)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    tris = []
    for i in range(n_major):
        inx = (i + 1) % n_major
        for j in range(n_minor):
            jn = (j + 1) % n_minor
            a = i * n_minor + j
            b = inx * n_minor + j
            c = inx * n_minor + jn
            d = i * n_minor + jn
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = _orient_outward(verts, np.array(tris, dtype=np.int64))
    return TriangleMesh(verts, tris)


def make_tube(path: np.ndarray, radius: float, n_seg: int = 12) -> TriangleMesh:
    """Capped tube swept along a polyline with parallel-transport frames."""
    p = np.asarray(path, dtype=np.float64)
    n = len(p)
    if n < 2:
        raise ValueError("path needs at least 2 points")
    tangents = np.empty_like(p)
    tangents[0] = p[1] - p[0]
    tangents[-1] = p[-1] - p[-2]
    tangents[1:-1] = p[2:] - p[:-2]
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    pick = np.eye(3)[np.argmin(np.abs(tangents[0]))]
    normal = np.cross(tangents[0], pick)
    normal /= np.linalg.norm(normal)
    theta = 2 * np.pi * np.arange(n_seg) / n_seg
    ct, st = np.cos(theta), np.sin(theta)
    rings = []
    for i in range(n):
        if i > 0:
            normal = normal - tangents[i] * (tangents[i] @ normal)
            normal /= np.linalg.norm(normal)
        binormal = np.cross(tangents[i], normal)
        rings.append(p[i] + radius * (ct[:, None] * normal + st[:, None] * binormal))
    verts = np.vstack(rings + [p[0][None, :], p[-1][None, :]])
    cap_b = n * n_seg
    cap_t = n * n_seg + 1
    tris = []
    for j in range(n_seg):
        jn = (j + 1) % n_seg
        tris.append((cap_b, jn, j))
    for i in range(n - 1):
        a = i * n_seg
        b = (i + 1) * n_seg
        for j in range(n_seg):
            jn = (j + 1) % n_seg
            tris.append((a + j, a + jn, b + jn))
            tris.append((a + j, b + jn, b + j))
    last = (n - 1) * n_seg
    for j in range(n_seg):
        jn = (j + 1) % n_seg
        tris.append((cap_t, last + j, last + jn))
    return TriangleMesh(verts, np.array(tris, dtype=np.int64))


# ------------------------------------------------------------ family shapes

def make_truncated_box(dx: float, dy: float, dz: float, cut: float) -> TriangleMesh:
    """Box with one corner sliced off by a plane through three edge points.

    The corner at (dx, dy, dz) is replaced by a triangular facet whose
    vertices sit `cut` along each of the three incident edges.
    """
    verts = np.array([
        [0, 0, 0], [dx, 0, 0], [dx, dy, 0], [0, dy, 0],
        [0, 0, dz], [dx, 0, dz], [0, dy, dz],
        [dx - cut, dy, dz], [dx, dy - cut, dz], [dx, dy, dz - cut],
    ], dtype=np.float64)
    tris = np.array([
        (0, 3, 2), (0, 2, 1),            # bottom
        (4, 5, 8), (4, 8, 7), (4, 7, 6),  # top pentagon
        (0, 1, 5), (0, 5, 4),            # y = 0
        (0, 4, 6), (0, 6, 3),            # x = 0
        (1, 2, 9), (1, 9, 8), (1, 8, 5),  # x = dx pentagon
        (2, 3, 6), (2, 6, 7), (2, 7, 9),  # y = dy pentagon
        (7, 8, 9),                        # cut facet
    ], dtype=np.int64)
    return TriangleMesh(verts, tris)


def make_prism(poly_xy: np.ndarray, dz: float) -> TriangleMesh:
    """Right prism over a convex polygon given counterclockwise in the plane."""
    n = len(poly_xy)
    bottom = np.column_stack([poly_xy, np.zeros(n)])
    top = np.column_stack([poly_xy, np.full(n, dz)])
    verts = np.vstack([bottom, top])
    tris = []
    for k in range(1, n - 1):
        tris.append((0, k + 1, k))
        tris.append((n, n + k, n + k + 1))
    for i in range(n):
        j = (i + 1) % n
        tris.append((i, j, n + j))
        tris.append((i, n + j, n + i))
    return TriangleMesh(verts, np.array(tris, dtype=np.int64))


def _cell_bin(rng, variant: int, cells: tuple[int, ...]) -> float:
    """Proportion drawn so its normalized span covers exactly `cells[variant]`.

    Shapes are voxelized with the longest axis split into
    DEFAULT_TARGET_CELLS cells, so a secondary axis at proportion p spans
    ceil(p * cells) of them.  The draw lands in the middle 70% of the chosen
    cell's bin: the span quantizes to that cell count with margin on both
    sides.  Corpus entries of one family cycle through the bins, keeping
    same-family models at least one grid cell apart on the binned axis;
    without that, a pair can differ only below cell size, where ranking has
    nothing to separate them by.
    """
    d = cells[variant % len(cells)]
    return (d - 0.85 + 0.7 * rng.uniform()) / DEFAULT_TARGET_CELLS


def _mesh_cube(rng, variant: int = 0) -> TriangleMesh:
    s = rng.uniform(30.0, 90.0)
    dy = s * _cell_bin(rng, variant, (15, 16, 17, 18, 19))
    dz = s * rng.uniform(0.82, 0.995)
    # corner cut keeps near-cube proportions separable at grid resolution
    return make_truncated_box(s, dy, dz, min(dy, dz) * rng.uniform(0.10, 0.28))


def _mesh_box(rng, variant: int = 0) -> TriangleMesh:
    dx = rng.uniform(60.0, 140.0)
    dy = dx * _cell_bin(rng, variant, (10, 11, 12, 13, 14))
    return make_box(dx, dy, dx * rng.uniform(0.2, 0.45))


def _mesh_flat_plate(rng, variant: int = 0) -> TriangleMesh:
    dx = rng.uniform(60.0, 130.0)
    dy = dx * _cell_bin(rng, variant, (10, 12, 14, 16, 18))
    c = dy * rng.uniform(0.15, 0.4)
    poly = np.array([
        [0.0, 0.0], [dx, 0.0], [dx, dy - c], [dx - c, dy], [0.0, dy],
    ])
    return make_prism(poly, rng.uniform(1.2, 3.0))


def _mesh_sphere(rng, variant: int = 0) -> TriangleMesh:
    rx = rng.uniform(25.0, 60.0)
    ry = rx * _cell_bin(rng, variant, (16, 17, 18, 19, 20))
    return make_ellipsoid(rx, ry, rx * rng.uniform(0.7, 0.95))


def _mesh_cylinder(rng, variant: int = 0) -> TriangleMesh:
    r = rng.uniform(15.0, 40.0)
    # bin the diameter-to-height proportion: height is the normalized axis
    ratio = _cell_bin(rng, variant, (12, 13, 14, 15, 16))
    return make_cylinder(r, 2.0 * r / ratio)


def _mesh_torus(rng, variant: int = 0) -> TriangleMesh:
    major = rng.uniform(30.0, 60.0)
    ring = make_torus(major, major * rng.uniform(0.18, 0.32))
    # oval rings: tube thickness alone is sub-cell at grid resolution
    stretch = _cell_bin(rng, variant, (12, 13, 14, 15, 16))
    verts = ring.vertices * np.array([1.0, stretch, 1.0])
    return TriangleMesh(verts, ring.triangles)


def _mesh_double_torus(rng, variant: int = 0) -> TriangleMesh:
    major = rng.uniform(20.0, 35.0)
    minor_a = major * rng.uniform(0.16, 0.34)
    minor_b = major * rng.uniform(0.16, 0.34)
    ring_a = make_torus(major, minor_a)
    ring_b = make_torus(major, minor_b)
    # two disjoint closed rings side by side with an air gap
    gap = rng.uniform(0.25, 1.4) * major
    shift = np.array([(major + minor_a) + gap + (major + minor_b), 0.0, 0.0])
    verts = np.vstack([ring_a.vertices, ring_b.vertices + shift])
    tris = np.vstack([ring_a.triangles, ring_b.triangles + len(ring_a.vertices)])
    return TriangleMesh(verts, tris)


def _mesh_vase_profile(rng, variant: int = 0) -> TriangleMesh:
    h = rng.uniform(50.0, 120.0)
    # binned belly diameter; base and lip stay below it so it sets the width
    r_belly = h * _cell_bin(rng, variant, (7, 9, 11, 13, 15)) / 2.0
    r_base = min(h * rng.uniform(0.10, 0.22), r_belly * 0.96)
    r_neck = min(h * rng.uniform(0.08, 0.16), r_belly * 0.82)
    r_lip = min(r_neck * rng.uniform(1.1, 1.4), r_belly * 0.96)
    knots_z = np.array([0.0, 0.12, 0.35, 0.8, 0.97, 1.0]) * h
    knots_r = np.array([r_base, max(r_base, r_belly) * 0.92, r_belly,
                        r_neck, r_lip, r_lip])
    z = np.linspace(0.0, h, 14)
    r = np.interp(z, knots_z, knots_r)
    profile = np.concatenate([[[0.0, 0.0]], np.stack([r, z], axis=1),
                              [[0.0, h]]])
    return make_revolution(profile, 28)


def _mesh_bowl(rng, variant: int = 0) -> TriangleMesh:
    r_out = rng.uniform(35.0, 70.0)
    wall = r_out * rng.uniform(0.08, 0.15)
    # binned depth, shallow dish through deep cup; diameter normalizes
    height = 2.0 * r_out * _cell_bin(rng, variant, (5, 6, 7, 8, 9))
    t_out = np.linspace(0.0, 1.0, 8)
    outer = np.stack([r_out * np.sin(t_out * 1.2),
                      height * (1 - np.cos(t_out * 1.2)) / (1 - np.cos(1.2))],
                     axis=1)
    inner = outer[::-1] * np.array([1.0, 1.0])
    inner = inner - np.array([wall, 0.0])
    inner[:, 1] = np.maximum(inner[:, 1], wall)
    keep = inner[:, 0] > wall * 0.5
    inner = inner[keep]
    profile = np.concatenate([
        [[0.0, 0.0]], outer[1:], inner, [[0.0, wall]],
    ])
    return make_revolution(profile, 28)


def _mesh_s_hook(rng, variant: int = 0) -> TriangleMesh:
    a = rng.uniform(15.0, 30.0)
    b = a * rng.uniform(0.65, 1.0)
    rt = a * rng.uniform(0.14, 0.22)
    sweep = rng.uniform(130.0, 165.0)
    top = np.linspace(np.deg2rad(sweep), np.deg2rad(-90.0), 20)
    bottom = np.linspace(np.deg2rad(-90.0), np.deg2rad(sweep), 20)[1:]
    path_top = np.stack([a * np.cos(top), np.zeros_like(top),
                         a + a * np.sin(top)], axis=1)
    path_bot = np.stack([-b * np.cos(bottom), np.zeros_like(bottom),
                         -b - b * np.sin(bottom)], axis=1)
    return make_tube(np.vstack([path_top, path_bot]), rt, 12)


_MESH_BUILDERS = {
    "bowl": _mesh_bowl,
    "box": _mesh_box,
    "cube": _mesh_cube,
    "cylinder": _mesh_cylinder,
    "double_torus": _mesh_double_torus,
    "flat_plate": _mesh_flat_plate,
    "s_hook": _mesh_s_hook,
    "sphere": _mesh_sphere,
    "torus": _mesh_torus,
    "vase_profile": _mesh_vase_profile,
}


# ---------------------------------------------------------------- metadata

_ADJS = ("simple", "sturdy", "compact", "printable", "smooth", "modern",
         "minimal", "handy")
_MATERIALS = ("PLA", "PETG", "resin", "ABS")

_META_POOLS = {
    "cube": (
        ("Calibration Cube", "Storage Cube", "Dice Blank", "Desk Cube"),
        ("cube", "calibration", "test", "storage", "toy"),
        ("hardware", "toys", "household"),
        ("printer calibration", "desk storage", "tabletop games"),
    ),
    "box": (
        ("Storage Box", "Parts Box", "Stacking Box", "Organizer Box"),
        ("box", "storage", "organizer", "container", "bin"),
        ("household", "hardware"),
        ("sorting small parts", "workshop storage", "drawer organizing"),
    ),
    "sphere": (
        ("Decorative Sphere", "Garden Orb", "Smooth Egg", "Ornament Ball"),
        ("sphere", "ball", "orb", "decor", "ornament"),
        ("decor", "toys"),
        ("holiday decoration", "garden display", "juggling practice"),
    ),
    "cylinder": (
        ("Round Canister", "Pen Cup", "Cylinder Stand", "Tube Container"),
        ("cylinder", "canister", "cup", "tube", "container"),
        ("household", "kitchen"),
        ("holding pens", "kitchen storage", "organizing cables"),
    ),
    "torus": (
        ("Napkin Ring", "Round Ring", "Donut Loop", "Bracelet Blank"),
        ("ring", "donut", "loop", "round", "band"),
        ("jewelry", "decor", "kitchen"),
        ("table settings", "costume jewelry", "key organizing"),
    ),
    "double_torus": (
        ("Linked Rings", "Double Ring", "Chain Links", "Twin Loops"),
        ("ring", "double", "linked", "chain", "loops"),
        ("jewelry", "decor", "toys"),
        ("chain making", "magic tricks", "pendant making"),
    ),
    "vase_profile": (
        ("Round Vase", "Tall Vase", "Flower Planter", "Planter", "Bud Vase"),
        ("vase", "flower", "decor", "container"),
        ("decor", "household", "garden"),
        ("fresh flowers", "dried arrangements", "window sills"),
    ),
    "bowl": (
        ("Serving Bowl", "Snack Bowl", "Round Dish", "Trinket Dish"),
        ("bowl", "dish", "kitchen", "serving"),
        ("kitchen", "household"),
        ("serving snacks", "holding keys", "mixing small batches"),
    ),
    "s_hook": (
        ("S Hook", "Utility Hook", "Hanging Hook", "Curved Hook"),
        ("hook", "hanger", "utility", "organizer"),
        ("hardware", "household"),
        ("hanging tools", "closet organizing", "garage storage"),
    ),
    "flat_plate": (
        ("Flat Plate", "Base Plate", "Mounting Plate", "Coaster Blank"),
        ("plate", "flat", "base", "mount", "coaster"),
        ("hardware", "household"),
        ("mounting electronics", "protecting surfaces", "base support"),
    ),
}

_DESIGNERS = ("afine", "bklock", "cmodel", "dprints", "emaker")
_LICENSES = ("CC-BY", "CC-BY-SA", "CC0", "MIT")


def _make_meta(family: str, rng) -> dict:
    names, tags, cats, uses = _META_POOLS[family]
    name = str(rng.choice(names))
    tag_count = int(rng.integers(2, min(4, len(tags)) + 1))
    chosen = sorted(str(t) for t in rng.choice(tags, size=tag_count, replace=False))
    if family == "vase_profile" and "Planter" in name:
        # some repositories label these only as planters, never as vases
        chosen = sorted({"planter", "pot"} | (set(chosen) - {"vase"}))
    adj = str(rng.choice(_ADJS))
    use = str(rng.choice(uses))
    desc = f"A {adj} {name.lower()} for {use}."
    if rng.random() < 0.4:
        desc += f" Prints well in {rng.choice(_MATERIALS)}."
    meta = {
        "name": name,
        "description": desc,
        "tags": chosen,
        "category": str(rng.choice(cats)),
    }
    if rng.random() < 0.5:
        meta["designer"] = str(rng.choice(_DESIGNERS))
        meta["license"] = str(rng.choice(_LICENSES))
    return meta


def _thumb_png_bytes(rng) -> bytes:
    from PIL import Image

    img = Image.new("RGB", (32, 32), tuple(int(c) for c in rng.integers(40, 216, 3)))
    from io import BytesIO

    buf = BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class GeneratedModel:
    id: str
    family: str
    path: Path


def build_family_mesh(family: str, rng, variant: int = 0) -> TriangleMesh:
    """Seeded mesh for one family; rng is a numpy Generator.

    variant selects the proportion bin for families that stratify one axis
    (see _cell_bin); repeats of the same family should count it up.
    """
    return _MESH_BUILDERS[family](rng, variant)


def generate_corpus(spec: GenSpec) -> list[GeneratedModel]:
    """Write corpus directories; returns the generated models in id order."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    families = sorted(spec.families)
    models = []
    for i in range(spec.count):
        family = families[i % len(families)]
        rng = np.random.default_rng([spec.seed, i])
        mesh = build_family_mesh(family, rng, i // len(families))
        meta = _make_meta(family, rng)
        if rng.random() < 0.5:
            meta["origin_url"] = f"https://example.com/models/{family}-{i:03d}"
        model_id = f"{family}-{i:03d}"
        model_dir = out / model_id
        model_dir.mkdir(parents=True, exist_ok=True)
        (model_dir / "mesh.stl").write_bytes(mesh_to_stl_bytes(mesh))
        (model_dir / "meta.json").write_bytes(
            (json.dumps(meta, sort_keys=True, indent=2) + "\n").encode("utf-8"))
        if rng.random() < 0.2:
            (model_dir / "thumb.png").write_bytes(_thumb_png_bytes(rng))
        models.append(GeneratedModel(model_id, family, model_dir))
    return models
