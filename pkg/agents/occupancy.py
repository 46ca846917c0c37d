"""
Occupancy Agent: voxelizes the merged cloud and labels it by staged nearest-neighbor matching.

Stage 1 labels every voxel holding a dynamic point from its nearest dynamic
point. Stage 2 labels the remaining occupied voxels from the nearest labeled
static point within the search radius, or leaves them free.
"""

import numpy as np
from scipy.spatial import cKDTree

from models.errors import GridError
from models.geometry import LabeledPointCloud, RigidPose
from models.grid import FREE, UNKNOWN, GridSpec, VoxelGrid
from models.state import PseudoLabelState
from tools.console import debug, log
from tools.geometry import transform_points
from tools.grid_ops import voxel_centers, voxelize_points

CANDIDATES = 8


def squared_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = points - center
    return (diff * diff).sum(axis=-1)


def _pick(points: np.ndarray, index: np.ndarray, center: np.ndarray) -> tuple[int, float]:
    """Smallest (squared distance, point index) among the candidates."""
    index = np.sort(index)
    d2 = squared_distances(points[index], center)
    best = int(np.argmin(d2))  # first minimum = smallest index
    return int(index[best]), float(d2[best])


def nearest_points(points: np.ndarray, queries: np.ndarray, radius: float = np.inf) -> np.ndarray:
    """
    Index of the nearest point to each query with d^2 <= radius^2, ties to the smaller index.

    Returns -1 where no point qualifies.
    """
    n = len(points)
    out = np.full(len(queries), -1, dtype=np.int64)
    if n == 0 or len(queries) == 0:
        return out
    tree = cKDTree(points)
    k = min(CANDIDATES, n)
    bound = radius * (1.0 + 1e-9) + 1e-9 if np.isfinite(radius) else np.inf
    _, idx = tree.query(queries, k=k, distance_upper_bound=bound)
    idx = idx.reshape(len(queries), k)
    for q, (center, cand) in enumerate(zip(queries, idx)):
        cand = cand[cand < n]
        if cand.size == 0:
            continue
        best, best_d2 = _pick(points, cand, center)
        if cand.size == k and k < n:
            # all k candidates may tie; widen to the full ball
            worst = squared_distances(points[cand], center).max()
            if worst <= best_d2 * (1.0 + 1e-9) + 1e-12:
                ball = tree.query_ball_point(center, np.sqrt(best_d2) * (1.0 + 1e-9) + 1e-9)
                best, best_d2 = _pick(points, np.asarray(ball, dtype=np.int64), center)
        if best_d2 <= radius * radius:
            out[q] = best
    return out


def staged_nearest_neighbor(
    members: dict[int, np.ndarray],
    dynamic_pts: LabeledPointCloud,
    static_pts: LabeledPointCloud,
    spec: GridSpec,
    num_classes: int,
    radius: float = 2.0,
) -> VoxelGrid:
    """
    Label occupied voxels, dynamic points first.

    Args:
        members: linear voxel index -> point indices into concat([static_pts, dynamic_pts]).
        dynamic_pts: aggregated object points in the current frame.
        static_pts: labeled static points in the current frame.
        spec: grid the members were computed on.
        num_classes: K; dynamic classes must lie below it.
        radius: stage 2 search radius in meters.

    Returns:
        VoxelGrid with label 0 on unoccupied voxels and on occupied voxels
        that neither stage could label.
    """
    labels = np.full(spec.num_voxels, FREE, dtype=np.uint8)
    if not members:
        return VoxelGrid(spec, labels, num_classes)

    dyn_cls = dynamic_pts.class_ids
    if dyn_cls.size and (dyn_cls.min() < 0 or dyn_cls.max() >= num_classes):
        raise GridError(f"dynamic point class {int(dyn_cls.max())} out of range for {num_classes} classes")

    n_static = len(static_pts)
    occupied = np.array(sorted(members), dtype=np.int64)
    has_dynamic = np.array([members[v][-1] >= n_static for v in occupied.tolist()], dtype=bool)
    centers = voxel_centers(spec, occupied)

    stage1 = occupied[has_dynamic]
    if stage1.size:
        hit = nearest_points(dynamic_pts.xyz, centers[has_dynamic])
        labels[stage1] = dyn_cls[hit]

    stage2 = occupied[~has_dynamic]
    if stage2.size:
        st_cls = static_pts.class_ids
        usable = np.flatnonzero((st_cls != UNKNOWN) & (st_cls >= 0) & (st_cls < num_classes))
        hit = nearest_points(static_pts.xyz[usable], centers[~has_dynamic], radius)
        found = hit >= 0
        labels[stage2[found]] = st_cls[usable[hit[found]]]
    return VoxelGrid(spec, labels, num_classes)


def generate_occupancy(
    static_global: LabeledPointCloud,
    dynamic: LabeledPointCloud,
    current_pose: RigidPose,
    spec: GridSpec,
    num_classes: int,
    radius: float = 2.0,
) -> VoxelGrid:
    """Bring static points into the current frame, merge with dynamic points, voxelize and label."""
    static_local = transform_points(static_global, current_pose.inverse())
    merged = LabeledPointCloud.concat([static_local, dynamic], fields=("class", "conf", "track"))
    vox = voxelize_points(merged, spec, num_classes)
    debug("Generate", f"{len(vox.members)} occupied voxels from {len(merged)} points")
    return staged_nearest_neighbor(vox.members, dynamic, static_local, spec, num_classes, radius)


def occupancy_agent(state: PseudoLabelState) -> dict:
    """
    Returns:
        Partial state with 'occupancy'.
    """
    scene, params = state["scene"], state["params"]
    frames = state.get("frames") or scene.frames
    grid = generate_occupancy(
        state["static_global"],
        state["dynamic"],
        scene.poses[frames[-1]],
        state["grid"],
        state["num_classes"],
        params.stage2_radius,
    )
    occupied = int(np.count_nonzero(grid.occupied))
    log("Generate", f"{occupied} labeled voxels of {grid.spec.num_voxels}")
    return {"occupancy": grid, "counts": {"voxelized": occupied}}
