"""Principal frames, object-aligned bounding boxes, and proportion ratios.

The OABB frame comes from the eigenvectors of the area-weighted covariance
of the mesh surface, computed in closed form per triangle, so the frame is
exact and deterministic for a given mesh.  Axis signs are canonicalized by
the skewness of the mass distribution so that equivalent inputs always get
the identical frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .meshes import TriangleMesh

# Extents below this fraction of the largest extent are treated as zero.
DEGENERATE_REL_TOL = 1e-9
# Flat shapes get their smallest extent clamped to largest / FLAT_CLAMP_DIV,
# one voxel at the default grid resolution.
FLAT_CLAMP_DIV = 20.0

NORMALIZED_MAX_EXTENT = 100.0

FLAG_FLAT = "flat"
FLAG_AABB_FALLBACK = "aabb_fallback"


class DegenerateMeshError(ValueError):
    """Mesh has no usable spatial extent (a point or a line)."""


@dataclass(frozen=True)
class PrincipalFrame:
    """Orthonormal frame: rows of `axes` are the axis vectors, det +1.

    axes: (3, 3) float64, axis i is axes[i].
    centroid: (3,) float64 frame origin in input coordinates.
    """

    axes: np.ndarray
    centroid: np.ndarray

    def __post_init__(self):
        axes = np.asarray(self.axes, dtype=np.float64)
        centroid = np.asarray(self.centroid, dtype=np.float64)
        if axes.shape != (3, 3) or centroid.shape != (3,):
            raise ValueError("frame needs (3,3) axes and (3,) centroid")
        if not np.allclose(axes @ axes.T, np.eye(3), atol=1e-9):
            raise ValueError("frame axes are not orthonormal")
        if np.linalg.det(axes) < 0:
            raise ValueError("frame axes are left-handed")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "centroid", centroid)

    def to_frame(self, points: np.ndarray) -> np.ndarray:
        """World points -> frame coordinates."""
        return (np.asarray(points, dtype=np.float64) - self.centroid) @ self.axes.T

    def to_world(self, points: np.ndarray) -> np.ndarray:
        """Frame coordinates -> world points."""
        return np.asarray(points, dtype=np.float64) @ self.axes + self.centroid


def surface_covariance(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray, float]:
    """Exact area-weighted covariance of the mesh surface.

    Returns (covariance 3x3, area centroid 3, total area).  Uses the closed
    form for the second moment of a uniform triangle:
    integral over T of x x^T dA = (A/12) (sum_i v_i v_i^T + s s^T), s = sum_i v_i.
    """
    tri = mesh.vertices[mesh.triangles]  # (m, 3, 3)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    total = float(areas.sum())
    if total <= 0.0:
        raise DegenerateMeshError("mesh has zero surface area")
    centroids = tri.mean(axis=1)
    mean = (areas[:, None] * centroids).sum(axis=0) / total
    vv = np.einsum("mki,mkj->mij", tri, tri)  # sum_i v_i v_i^T per triangle
    s = tri.sum(axis=1)
    ss = np.einsum("mi,mj->mij", s, s)
    second = ((areas / 12.0)[:, None, None] * (vv + ss)).sum(axis=0)
    cov = second / total - np.outer(mean, mean)
    return cov, mean, total


def _canonical_signs(axes: np.ndarray, points: np.ndarray, weights: np.ndarray | None,
                     centroid: np.ndarray) -> np.ndarray:
    """Flip axis signs so the heavier skew points positive; keep det +1.

    The first two axes are flipped independently when their weighted third
    moment is negative; the third axis is rebuilt as their cross product.
    Near-symmetric axes (tiny skew) are left as produced by the eigensolver.
    """
    d = points - centroid
    proj = d @ axes.T
    if weights is None:
        skew = (proj ** 3).sum(axis=0)
        scale = (proj ** 2).sum(axis=0) ** 1.5
    else:
        skew = (weights[:, None] * proj ** 3).sum(axis=0)
        scale = (weights[:, None] * proj ** 2).sum(axis=0) ** 1.5
    out = axes.copy()
    for i in (0, 1):
        if scale[i] > 0 and skew[i] < -1e-9 * scale[i]:
            out[i] = -out[i]
    out[2] = np.cross(out[0], out[1])
    return out


def principal_axes(points: np.ndarray, weights: np.ndarray | None = None) -> PrincipalFrame:
    """PCA frame of a point set, axes ordered by descending variance.

    Signs are canonicalized by distribution skewness and the frame is always
    right-handed.  Raises DegenerateMeshError for fewer than 2 distinct
    points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("points must be a non-empty (n, 3) array")
    if weights is None:
        centroid = pts.mean(axis=0)
        d = pts - centroid
        cov = d.T @ d / len(pts)
    else:
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        centroid = (w[:, None] * pts).sum(axis=0) / total
        d = pts - centroid
        cov = (w[:, None] * d).T @ d / total
    evals, evecs = np.linalg.eigh(cov)
    if not np.isfinite(evals).all():
        raise DegenerateMeshError("covariance of points is not finite")
    if evals[2] <= 0.0 or evals[2] < 1e-24:
        raise DegenerateMeshError("points have no spatial extent")
    order = np.argsort(evals)[::-1]
    axes = evecs.T[order]
    if np.linalg.det(axes) < 0:
        axes[2] = -axes[2]
    axes = _canonical_signs(axes, pts, weights, centroid)
    return PrincipalFrame(axes, centroid)


def _axes_by_extent(axes: np.ndarray, verts: np.ndarray, centroid: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Reorder frame axes by descending projected extent; returns (axes, extents)."""
    proj = (verts - centroid) @ axes.T
    extents = proj.max(axis=0) - proj.min(axis=0)
    order = np.argsort(-extents, kind="stable")
    axes = axes[order]
    if np.linalg.det(axes) < 0:
        axes[2] = -axes[2]
    return axes, extents[order]


def _best_plane_angle(xy: np.ndarray) -> tuple[float, float]:
    """Angle in [-45°, 45°) minimizing the bounding-rectangle area of 2D points.

    Coarse 1-degree scan over the 90-degree period, then golden-section
    refinement around the best sample.  Returns (angle, area).
    """
    x, y = xy[:, 0], xy[:, 1]

    def area_of(theta: np.ndarray) -> np.ndarray:
        c, s = np.cos(theta), np.sin(theta)
        u = x[:, None] * c + y[:, None] * s
        v = y[:, None] * c - x[:, None] * s
        return (u.max(axis=0) - u.min(axis=0)) * (v.max(axis=0) - v.min(axis=0))

    coarse = np.deg2rad(np.arange(-45.0, 45.0, 1.0))
    areas = area_of(coarse)
    k = int(np.argmin(areas))
    lo = coarse[max(k - 1, 0)]
    hi = coarse[min(k + 1, len(coarse) - 1)]
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - ratio * (b - a)
    c2 = a + ratio * (b - a)
    f1 = float(area_of(np.array([c1]))[0])
    f2 = float(area_of(np.array([c2]))[0])
    for _ in range(40):
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - ratio * (b - a)
            f1 = float(area_of(np.array([c1]))[0])
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + ratio * (b - a)
            f2 = float(area_of(np.array([c2]))[0])
    theta = c1 if f1 <= f2 else c2
    return float(theta), float(min(f1, f2))


def tighten_frame(points: np.ndarray, axes: np.ndarray, centroid: np.ndarray,
                  sweeps: int = 2) -> np.ndarray:
    """Rotate each axis pair to the plane angle with the smallest box.

    Eigenvectors are arbitrary inside eigenvalue-degenerate subspaces
    (spheres, cubes, cylinder cross sections), and even a modest eigenvalue
    gap lets small covariance perturbations tilt the pair by whole degrees.
    Spans or variances measured in such a tilted frame look well separated,
    so no gate computed from the incoming axes can tell a trustworthy frame
    from a poisoned one.  Instead every plane is driven to its bounding-box
    minimum, which depends only on the point set: two samplings of the same
    surface that share their extreme points land on the same frame no matter
    how their covariances differ.  A rotation is applied only when it
    shrinks that plane's bounding rectangle, so already-tight frames come
    back unchanged.
    """
    pts = np.asarray(points, dtype=np.float64)
    out = np.array(axes, dtype=np.float64)
    d = pts - np.asarray(centroid, dtype=np.float64)
    for _ in range(sweeps):
        for i, j in ((0, 1), (0, 2), (1, 2)):
            proj = d @ out[[i, j]].T
            spans = proj.max(axis=0) - proj.min(axis=0)
            theta, area = _best_plane_angle(proj)
            if area < spans[0] * spans[1] * (1.0 - 1e-12):
                c, s = np.cos(theta), np.sin(theta)
                ai = c * out[i] + s * out[j]
                aj = c * out[j] - s * out[i]
                out[i], out[j] = ai, aj
    return out


def compute_oabb(mesh: TriangleMesh) -> tuple[np.ndarray, PrincipalFrame, list[str]]:
    """Object-aligned bounding box of a mesh.

    Returns (extents, frame, flags) with extents sorted descending and the
    frame axes reordered to match, so extents[i] is the spread along
    frame.axes[i].  Degenerate covariance falls back to world axes with an
    "aabb_fallback" flag; zero-extent meshes raise DegenerateMeshError.
    """
    flags: list[str] = []
    try:
        cov, centroid, _ = surface_covariance(mesh)
        evals, evecs = np.linalg.eigh(cov)
        if not np.isfinite(evals).all() or evals[1] <= max(evals[2] * 1e-12, 0.0):
            # rank < 2: directions are not well defined, use world axes
            raise DegenerateMeshError("covariance rank below 2")
        order = np.argsort(evals)[::-1]
        axes = evecs.T[order]
        if np.linalg.det(axes) < 0:
            axes[2] = -axes[2]
        axes = tighten_frame(mesh.vertices, axes, centroid)
        tri = mesh.vertices[mesh.triangles]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        axes = _canonical_signs(axes, tri.mean(axis=1), areas, centroid)
    except DegenerateMeshError:
        axes = np.eye(3)
        centroid = mesh.vertices.mean(axis=0)
        flags.append(FLAG_AABB_FALLBACK)
    axes, extents = _axes_by_extent(axes, mesh.vertices, centroid)
    if extents[0] <= 0.0:
        raise DegenerateMeshError("mesh has zero extent in every direction")
    if extents[1] <= extents[0] * DEGENERATE_REL_TOL:
        raise DegenerateMeshError("mesh is a line segment, no usable box")
    if extents[2] <= extents[0] * DEGENERATE_REL_TOL:
        flags.append(FLAG_FLAT)
    return extents, PrincipalFrame(axes, centroid), flags


def clamp_flat_extents(extents: np.ndarray) -> np.ndarray:
    """Replace a zero smallest extent with one voxel pitch of the largest."""
    out = np.asarray(extents, dtype=np.float64).copy()
    if out[2] <= out[0] * DEGENERATE_REL_TOL:
        out[2] = out[0] / FLAT_CLAMP_DIV
    return out


def compute_ratios(extents: np.ndarray) -> tuple[float, float]:
    """Proportion ratios (e2/e1, e3/e2) from descending extents.

    Both land in (0, 1] and are invariant to uniform scaling.  Flat extents
    must be clamped first (clamp_flat_extents) so the ratios stay positive.
    """
    e = np.asarray(extents, dtype=np.float64)
    if not (e[0] >= e[1] >= e[2]):
        raise ValueError("extents must be sorted descending")
    if e[2] <= 0.0:
        raise ValueError("extents must be positive; clamp flat shapes first")
    return float(e[1] / e[0]), float(e[2] / e[1])


def normalize_extents(extents_mm: np.ndarray) -> tuple[float, np.ndarray]:
    """Scale factor and scaled extents that put the largest extent at 100.

    Returns (scale, normalized) with max(normalized) == 100.0 exactly.
    """
    e = np.asarray(extents_mm, dtype=np.float64)
    if e.shape != (3,) or not np.isfinite(e).all():
        raise ValueError("extents must be 3 finite values")
    largest = float(e.max())
    if largest <= 0.0:
        raise ValueError("largest extent must be positive")
    scale = NORMALIZED_MAX_EXTENT / largest
    normalized = e * scale
    normalized[int(np.argmax(e))] = NORMALIZED_MAX_EXTENT
    return scale, normalized
