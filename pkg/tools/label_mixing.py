"""
Label mixing: builds a training label set that takes a seeded fraction of
frames from ground truth and the rest from pseudo-labels.
"""

import os
from typing import Iterable, Optional

import numpy as np

from models.errors import ConfigError, FormatError
from tools.file_handler import save_to_json
from tools.formats import read_grid, write_grid

MANIFEST = "manifest.json"


def grid_path(directory: str, frame_id: str) -> str:
    return os.path.join(directory, f"{frame_id}.mocg")


def list_frames(directory: str) -> list[str]:
    """Frame ids (file stems) of every .mocg grid in a directory, sorted."""
    if not os.path.isdir(directory):
        raise FormatError("missing directory", directory)
    return sorted(name[:-5] for name in os.listdir(directory) if name.endswith(".mocg"))


def choose_sources(frame_ids: Iterable[str], gt_ratio: float, seed: int) -> dict[str, str]:
    """
    Map each frame to "gt" or "pseudo".

    round(gt_ratio * N) frames are drawn uniformly without replacement.
    """
    if not 0.0 <= gt_ratio <= 1.0:
        raise ConfigError(f"gt ratio must lie in [0, 1], got {gt_ratio}")
    frames = sorted(set(frame_ids))
    n_gt = int(round(gt_ratio * len(frames)))
    rng = np.random.default_rng(seed)
    picked = set(rng.choice(len(frames), size=n_gt, replace=False).tolist()) if n_gt else set()
    return {f: ("gt" if i in picked else "pseudo") for i, f in enumerate(frames)}


def mix_labels(
    frame_ids: Optional[Iterable[str]],
    gt_dir: str,
    pseudo_dir: str,
    gt_ratio: float,
    seed: int,
    out_dir: Optional[str] = None,
) -> dict[str, str]:
    """
    Choose a source per frame and, when `out_dir` is given, write the mixed set.

    Args:
        frame_ids: frames to mix; every grid in `pseudo_dir` when None.
        gt_dir: directory of ground-truth <frame>.mocg grids.
        pseudo_dir: directory of pseudo-label <frame>.mocg grids.
        gt_ratio: fraction of frames taken from ground truth.
        seed: selection seed.
        out_dir: destination for the mixed grids and manifest.json.

    Returns:
        {frame_id: "gt" | "pseudo"}
    """
    if frame_ids is None:
        frame_ids = list_frames(pseudo_dir)
    sources = choose_sources(frame_ids, gt_ratio, seed)
    roots = {"gt": gt_dir, "pseudo": pseudo_dir}
    for frame, source in sources.items():
        path = grid_path(roots[source], frame)
        if not os.path.isfile(path):
            raise FormatError("missing file", path)
    if out_dir is not None:
        for frame, source in sources.items():
            write_grid(grid_path(out_dir, frame), read_grid(grid_path(roots[source], frame)))
        save_to_json(sources, os.path.join(out_dir, MANIFEST))
    return sources
