"""
BEV image: top-down class-color rendering of a VoxelGrid as binary PPM (P6).
"""

import numpy as np

from config.run_config import ClassEntry
from models.grid import FREE, VoxelGrid
from tools.file_handler import atomic_write_bytes


def top_labels(grid: VoxelGrid) -> np.ndarray:
    """Class of the highest occupied voxel per (ix, iy) column, shape (NX, NY); 0 for empty columns."""
    vol = grid.as_volume()
    occupied = vol != FREE
    nz = vol.shape[2]
    # index of the last occupied z per column
    top = nz - 1 - np.argmax(occupied[:, :, ::-1], axis=2)
    labels = np.take_along_axis(vol, top[..., None], axis=2)[..., 0]
    return np.where(occupied.any(axis=2), labels, FREE)


def palette(table: list[ClassEntry], num_classes: int) -> np.ndarray:
    """(num_classes, 3) uint8 colors; free is black, ids past the table are grey."""
    colors = np.full((max(num_classes, 1), 3), 128, dtype=np.uint8)
    for i, entry in enumerate(table[:num_classes]):
        colors[i] = entry.color
    colors[FREE] = 0
    return colors


def render_bev(grid: VoxelGrid, table: list[ClassEntry]) -> np.ndarray:
    """(NY, NX, 3) image; row 0 is the largest Y so +Y points up, columns run +X."""
    labels = top_labels(grid)
    image = palette(table, grid.num_classes)[labels]  # (NX, NY, 3)
    return np.ascontiguousarray(image.transpose(1, 0, 2)[::-1])


def write_bev_ppm(path: str, grid: VoxelGrid, table: list[ClassEntry]) -> str:
    image = render_bev(grid, table)
    height, width = image.shape[:2]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return atomic_write_bytes(path, header + image.tobytes())
