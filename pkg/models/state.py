"""
LangGraph pipeline state: shared state that flows through the pseudo-label graph.
"""

from typing import Annotated, TypedDict

from config.run_config import PseudoLabelParams
from models.geometry import LabeledPointCloud
from models.grid import GridSpec, VoxelGrid
from models.scene import ObjectPoints, SceneData


def merge_lists(left: list, right: list) -> list:
    """Reducer that appends new entries (stage logs accumulate across nodes)."""
    return left + right


def merge_dicts(left: dict, right: dict) -> dict:
    """Reducer that merges per-stage counters; later stages win on key clashes."""
    return {**left, **right}


class PseudoLabelState(TypedDict, total=False):
    """
    Shared state for the pseudo-label workflow.
    Each stage reads from and writes to this state; per-frame values are keyed
    by frame id.
    """

    # Input: scene bundle and run parameters
    scene: SceneData
    frames: list[int]
    params: PseudoLabelParams
    grid: GridSpec
    num_classes: int

    # Separation output: per-frame object point sets and static remainder
    objects: dict[int, list[ObjectPoints]]
    static: dict[int, LabeledPointCloud]

    # Noise filter output
    filtered: dict[int, LabeledPointCloud]

    # Semantic assignment output
    labeled: dict[int, LabeledPointCloud]

    # Aggregation output: densified dynamic points (current frame) and
    # static points in the global frame
    dynamic: LabeledPointCloud
    static_global: LabeledPointCloud

    # Final output
    occupancy: VoxelGrid

    # Per-stage point counts (extracted, filtered, labeled, voxelized)
    counts: Annotated[dict[str, int], merge_dicts]

    # Accumulated warnings
    warnings: Annotated[list[str], merge_lists]
