"""Rigid alignment of voxel grids and overlap-based similarity scoring.

A sketch grid is aligned to a model grid by point-to-point ICP over the
boundary cell centers of each grid (occupied cells with an exposed face),
run from two families of starts.  Grid starts exploit that both grids come
out of the same canonicalization: every proper signed axis permutation
whose occupied spans agree, anchored span center to span center, so two
voxelizations of the same surface that differ only by the sign or ordering
ambiguity of their principal frames meet lattice-on-lattice.  Frame starts
re-derive principal axes from the boundary clouds and try the four proper
sign combinations; they cover poses the span test cannot see.  The winner
across starts is the pose that scores the highest cell overlap, not the
lowest ICP residual: the residual is blind to which cells are occupied and
can prefer a pose that drapes the sketch over the wrong part of a solid.

Interior cells of a solid grid carry no alignment information: against a
volume of centers the ICP objective is nearly flat under translation, so it
stalls at the start pose instead of converging to the overlap-maximizing
one.  Shell-like grids are their own boundary, so for sketches this is the
full occupied set.  No scaling is applied at any point; both grids are
expected to come from size-normalized inputs.  The aligned sketch centers
(all occupied cells, not just the boundary) are then quantized into the
model grid and the number of distinct occupied model cells hit is the
overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np
from scipy.spatial import cKDTree

from .geometry import DegenerateMeshError, PrincipalFrame, principal_axes
from .voxel import VoxelGrid, quantize

DEFAULT_MAX_ITER = 50
DEFAULT_TOL = 1e-4
PROBE_ITER = 5
REFINE_KEEP = 2

_ORTHO_TOL = 1e-9

# Proper (determinant +1) axis sign flips used as alignment starts.
PROPER_SIGN_COMBOS = (
    (1.0, 1.0, 1.0),
    (1.0, -1.0, -1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
)


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion p -> rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64)
        if rot.shape != (3, 3) or tr.shape != (3,):
            raise ValueError("need a (3,3) rotation and (3,) translation")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class MatchScore:
    """Overlap metrics for one aligned sketch/model pair.

    avg is always the exact mean of the two normalized overlaps and is the
    core ranking value.
    """

    overlap_voxels: int
    sketch_norm: float
    model_norm: float
    avg: float

    @classmethod
    def from_overlap(cls, overlap: int, sketch_count: int, model_count: int) -> "MatchScore":
        s = overlap / sketch_count if sketch_count else 0.0
        m = overlap / model_count if model_count else 0.0
        return cls(int(overlap), s, m, (s + m) / 2.0)


@dataclass
class IcpResult:
    transform: RigidTransform
    rms_residual: float
    iterations: int
    rms_history: list[float] = field(default_factory=list)


def _kabsch(source: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation mapping source onto target."""
    sc = source.mean(axis=0)
    tc = target.mean(axis=0)
    h = (source - sc).T @ (target - tc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, tc - rot @ sc


def icp_align(source: np.ndarray, target: np.ndarray,
              init: RigidTransform | None = None,
              max_iter: int = DEFAULT_MAX_ITER,
              tol: float = DEFAULT_TOL) -> IcpResult:
    """Iterative closest point between two point sets, no scaling.

    Each iteration matches every transformed source point to its nearest
    target point and re-solves the rigid motion in closed form.  Stops when
    the RMS residual change drops below tol, the residual hits zero, or
    max_iter is reached; the best iterate seen is returned either way.
    """
    src = np.asarray(source, dtype=np.float64)
    dst = np.asarray(target, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 3 or len(src) == 0:
        raise ValueError("source must be a non-empty (n, 3) array")
    if dst.ndim != 2 or dst.shape[1] != 3 or len(dst) == 0:
        raise ValueError("target must be a non-empty (m, 3) array")
    return _icp_with_tree(src, dst, cKDTree(dst), init, max_iter, tol)


def _icp_with_tree(src: np.ndarray, dst: np.ndarray, tree,
                   init: RigidTransform | None, max_iter: int,
                   tol: float) -> IcpResult:
    # tree must index dst; split out so multi-start reuses one tree
    if init is None:
        init = RigidTransform.identity()
    rot = init.rotation
    tr = init.translation
    best_rot, best_tr, best_rms, best_it = rot, tr, np.inf, 0
    history: list[float] = []
    prev = None
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        moved = src @ rot.T + tr
        dist, idx = tree.query(moved)
        rms = float(np.sqrt(np.mean(dist ** 2)))
        history.append(rms)
        if rms < best_rms:
            best_rot, best_tr, best_rms, best_it = rot, tr, rms, it
        if rms == 0.0:
            break
        if prev is not None and abs(prev - rms) < tol:
            break
        prev = rms
        rot, tr = _kabsch(src, dst[idx])
    return IcpResult(RigidTransform(best_rot, best_tr), best_rms, iterations, history)


def boundary_centers(grid: VoxelGrid) -> np.ndarray:
    """Centers of occupied cells with at least one exposed face.

    A face is exposed when the 6-neighbor across it is unoccupied or lies
    outside the grid.  For shell grids this returns every occupied center.
    """
    occ = grid.occupancy
    padded = np.zeros((occ.shape[0] + 2, occ.shape[1] + 2, occ.shape[2] + 2), dtype=bool)
    padded[1:-1, 1:-1, 1:-1] = occ
    enclosed = (
        padded[:-2, 1:-1, 1:-1] & padded[2:, 1:-1, 1:-1]
        & padded[1:-1, :-2, 1:-1] & padded[1:-1, 2:, 1:-1]
        & padded[1:-1, 1:-1, :-2] & padded[1:-1, 1:-1, 2:]
    )
    idx = np.argwhere(occ & ~enclosed)
    return np.asarray(grid.origin) + (idx + 0.5) * grid.pitch


def _cloud_frame(pts: np.ndarray) -> PrincipalFrame:
    if len(pts) == 0:
        raise ValueError("grid has no occupied cells")
    try:
        return principal_axes(pts)
    except DegenerateMeshError:
        # a single cell (or coincident cells) has no orientation
        return PrincipalFrame(np.eye(3), pts.mean(axis=0))


SPAN_MATCH_TOL = 0.12
MAX_GRID_STARTS = 16


def _span_perm_rotations(s_span: np.ndarray, m_span: np.ndarray,
                         rel_tol: float = SPAN_MATCH_TOL) -> list[np.ndarray]:
    """Proper signed axis permutations compatible with the occupied spans.

    Row i of a returned matrix is +-e_{p(i)}: model axis i takes sketch
    axis p(i), kept only when those two spans agree within rel_tol.  Shapes
    with distinct spans yield just the four sign flips of the identity;
    near-ties (square plates, cubes) add the permutations the grids could
    have ordered either way.  Near-cubes admit all six permutations, two
    proper sign choices each, so the list is ordered by span mismatch and
    cut at MAX_GRID_STARTS: an exact relation always sits among the best
    agreements, and the tail only repeats coarser versions of it.
    """
    scored: list[tuple[float, int, np.ndarray]] = []
    order = 0
    for perm in permutations(range(3)):
        errs = [
            abs(s_span[perm[i]] - m_span[i])
            / max(s_span[perm[i]], m_span[i], 1e-12)
            for i in range(3)
        ]
        if max(errs) > rel_tol:
            continue
        base = np.zeros((3, 3))
        for i in range(3):
            base[i, perm[i]] = 1.0
        for signs in product((1.0, -1.0), repeat=3):
            rot = np.array(signs)[:, None] * base
            if np.linalg.det(rot) > 0.0:
                scored.append((max(errs), order, rot))
                order += 1
    scored.sort(key=lambda t: (t[0], t[1]))
    return [rot for _, _, rot in scored[:MAX_GRID_STARTS]]


def multi_start_align(sketch: VoxelGrid, model: VoxelGrid,
                      max_iter: int = DEFAULT_MAX_ITER,
                      tol: float = DEFAULT_TOL) -> tuple[RigidTransform, float]:
    """Best ICP alignment of sketch onto model across the start families.

    ICP correspondences use the boundary cell centers of each grid (see
    boundary_centers).  Grid starts are the span-compatible signed
    permutations anchored occupied-span center to center; frame starts
    rotate the boundary cloud's principal frame onto the model's with each
    sign combination in PROPER_SIGN_COMBOS, centroid to centroid.  Starts
    compete on overlap score (ties: lower residual, then start order),
    probed cheaply first and refined to convergence only at the front of
    the field.  A pose that covers every sketch cell wins outright; with
    equal pitches no other pose can average higher.
    """
    s_pts = boundary_centers(sketch)
    m_pts = boundary_centers(model)
    fs = _cloud_frame(s_pts)
    fm = _cloud_frame(m_pts)
    tree = cKDTree(m_pts)

    s_occ = sketch.occupied_centers()
    m_occ = model.occupied_centers()
    s_mid = (s_occ.min(axis=0) + s_occ.max(axis=0)) / 2.0
    m_mid = (m_occ.min(axis=0) + m_occ.max(axis=0)) / 2.0
    s_span = s_occ.max(axis=0) - s_occ.min(axis=0) + sketch.pitch
    m_span = m_occ.max(axis=0) - m_occ.min(axis=0) + model.pitch

    starts: list[RigidTransform] = []
    for rot0 in _span_perm_rotations(s_span, m_span):
        starts.append(RigidTransform(rot0, m_mid - rot0 @ s_mid))
    for signs in PROPER_SIGN_COMBOS:
        rot0 = fm.axes.T @ (np.array(signs)[:, None] * fs.axes)
        starts.append(RigidTransform(rot0, fm.centroid - rot0 @ fs.centroid))

    # probe pass: a few iterations each, then full refinement for the best
    # few by overlap; grid starts begin lattice-aligned and converge almost
    # immediately, so the probe alone usually finds the winner
    probes: list[tuple[tuple[float, float, int], IcpResult]] = []
    for k, start in enumerate(starts):
        res = _icp_with_tree(s_pts, m_pts, tree, start,
                             min(PROBE_ITER, max_iter), tol)
        ov = score(sketch, model, res.transform)
        if ov.sketch_norm >= 1.0:
            return res.transform, res.rms_residual
        probes.append(((-ov.avg, res.rms_residual, k), res))
    probes.sort(key=lambda t: t[0])

    best_key, best_res = probes[0]
    for key0, res0 in probes[:REFINE_KEEP]:
        if max_iter <= PROBE_ITER:
            break
        res = _icp_with_tree(s_pts, m_pts, tree, res0.transform,
                             max_iter - PROBE_ITER, tol)
        ov = score(sketch, model, res.transform)
        key = (-ov.avg, res.rms_residual, key0[2])
        if key < best_key:
            best_key, best_res = key, res
        if ov.sketch_norm >= 1.0:
            break
    return best_res.transform, best_res.rms_residual


def overlap_count(sketch: VoxelGrid, model: VoxelGrid, transform: RigidTransform) -> int:
    """Distinct occupied model cells hit by transformed sketch cell centers."""
    pts = transform.apply(sketch.occupied_centers())
    if len(pts) == 0:
        return 0
    idx = quantize(pts, model)
    dims = np.array(model.dims)
    ok = ((idx >= 0) & (idx < dims)).all(axis=1)
    idx = idx[ok]
    if len(idx) == 0:
        return 0
    hit = model.occupancy[idx[:, 0], idx[:, 1], idx[:, 2]]
    idx = idx[hit]
    if len(idx) == 0:
        return 0
    lin = (idx[:, 0] * dims[1] + idx[:, 1]) * dims[2] + idx[:, 2]
    return int(len(np.unique(lin)))


def score(sketch: VoxelGrid, model: VoxelGrid, transform: RigidTransform) -> MatchScore:
    """Overlap metrics for an aligned pair (see MatchScore)."""
    overlap = overlap_count(sketch, model, transform)
    return MatchScore.from_overlap(overlap, sketch.occupied_count, model.occupied_count)
