"""
Noise Filter Agent: removes rain clutter inside the drivable region.

Ground is found by PCA over each point's neighborhood. Non-ground points in
the region are dropped when they hover within the noise band above the
local ground or have too few neighbors; everything else passes.
"""

import warnings
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from config.run_config import PseudoLabelParams
from models.geometry import LabeledPointCloud, RigidPose
from models.scene import DrivableRegion
from models.state import PseudoLabelState
from agents.region import drivable_region
from tools.console import log
from tools.parallel import map_ordered


class Neighborhood(NamedTuple):
    index: np.ndarray  # (N, k) neighbor indices, self included
    valid: np.ndarray  # (N, k) within radius
    count: np.ndarray  # (N,) valid neighbors including self


class GroundEstimate(NamedTuple):
    ground: np.ndarray
    normals: np.ndarray
    planarity: np.ndarray


def neighborhoods(xyz: np.ndarray, k: int, radius: float) -> Neighborhood:
    n = len(xyz)
    k = min(k, n)
    dist, idx = cKDTree(xyz).query(xyz, k=k, distance_upper_bound=radius)
    dist, idx = dist.reshape(n, k), idx.reshape(n, k)
    valid = np.isfinite(dist) & (idx < n)
    return Neighborhood(np.where(valid, idx, 0), valid, valid.sum(axis=1))


def estimate_ground(xyz: np.ndarray, hood: Neighborhood, params: PseudoLabelParams) -> GroundEstimate:
    """Per-point PCA normal and planarity; GROUND needs a flat, level, tight neighborhood."""
    weight = hood.valid[..., None].astype(np.float64)
    count = np.maximum(hood.count, 1)[:, None]
    coords = xyz[hood.index]
    centroid = (coords * weight).sum(axis=1) / count
    diff = (coords - centroid[:, None, :]) * weight
    cov = np.einsum("nki,nkj->nij", diff, diff) / count[..., None]
    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0]
    lam_min, lam_mid = evals[:, 0], evals[:, 1]
    planarity = np.full(len(xyz), np.inf)
    np.divide(np.maximum(lam_min, 0.0), lam_mid, out=planarity, where=lam_mid > 1e-12)
    residual = np.abs(((xyz - centroid) * normals).sum(axis=1))
    ground = (
        (hood.count >= 3)
        & (np.abs(normals[:, 2]) >= np.cos(np.radians(params.normal_cone_deg)))
        & (planarity <= params.planarity)
        & (residual <= params.plane_tolerance)
    )
    return GroundEstimate(ground, normals, planarity)


def noise_mask(cloud: LabeledPointCloud, region: DrivableRegion, params: PseudoLabelParams) -> np.ndarray:
    """Boolean mask of points removed as rain noise. Points outside the region are never removed."""
    xyz = cloud.xyz
    removed = np.zeros(len(xyz), dtype=bool)
    in_region = region.contains(xyz) if len(xyz) else removed
    if not in_region.any():
        return removed

    hood = neighborhoods(xyz, params.knn, params.normal_radius)
    ground = estimate_ground(xyz, hood, params).ground

    is_self = hood.index == np.arange(len(xyz))[:, None]
    neighbor_count = (hood.valid & ~is_self).sum(axis=1)
    ground_nbr = hood.valid & ~is_self & ground[hood.index]
    nbr_z = np.where(ground_nbr, xyz[hood.index, 2], np.nan)
    has_ground = ground_nbr.any(axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        ground_z = np.nanmedian(nbr_z, axis=1)
    height = np.where(has_ground, xyz[:, 2] - np.nan_to_num(ground_z), np.inf)

    hovering = has_ground & (height < params.noise_band)
    sparse = neighbor_count < params.min_neighbors
    return in_region & ~ground & (hovering | sparse)


def filter_noise(cloud: LabeledPointCloud, region: DrivableRegion, params: PseudoLabelParams) -> LabeledPointCloud:
    return cloud.subset(~noise_mask(cloud, region, params))


def noise_filter_agent(state: PseudoLabelState) -> dict:
    """
    Filter each frame's static points inside that frame's drivable region.

    Returns:
        Partial state with 'filtered'.
    """
    scene, params = state["scene"], state["params"]
    static = state["static"]
    frames = list(static)

    def _one(frame):
        region = drivable_region(RigidPose.identity(), scene.boxes.get(frame, []), params)
        return filter_noise(static[frame], region, params)

    filtered = dict(zip(frames, map_ordered(_one, frames)))
    kept = sum(len(c) for c in filtered.values())
    dropped = sum(len(c) for c in static.values()) - kept
    log("Filter", f"removed {dropped} noise points, {kept} static points remain")
    return {"filtered": filtered, "counts": {"filtered": kept, "noise": dropped}}
