"""
Tests for tools/label_mixing.py and tools/bev_image.py.
"""

import json

import numpy as np
import pytest

from config.run_config import load_class_table
from models.errors import ConfigError, FormatError
from models.grid import VoxelGrid
from tools.bev_image import palette, render_bev, top_labels, write_bev_ppm
from tools.formats import read_grid, write_grid
from tools.label_mixing import MANIFEST, choose_sources, grid_path, mix_labels

FRAMES = ["000", "001", "002", "003"]


def _grid(spec, cls):
    labels = np.zeros(spec.num_voxels, dtype=np.uint8)
    labels[0] = cls
    return VoxelGrid(spec, labels, 4)


@pytest.fixture
def label_dirs(tmp_path, tiny_grid):
    gt_dir, pseudo_dir = tmp_path / "gt", tmp_path / "pseudo"
    for frame in FRAMES:
        write_grid(grid_path(str(gt_dir), frame), _grid(tiny_grid, 1))
        write_grid(grid_path(str(pseudo_dir), frame), _grid(tiny_grid, 2))
    return str(gt_dir), str(pseudo_dir)


# ── choose_sources ──────────────────────────────────────────────────────────

def test_ratio_zero_and_one():
    assert set(choose_sources(FRAMES, 0.0, 1).values()) == {"pseudo"}
    assert set(choose_sources(FRAMES, 1.0, 1).values()) == {"gt"}


def test_half_ratio_picks_exactly_half():
    for seed in range(10):
        sources = choose_sources(FRAMES, 0.5, seed)
        assert list(sources.values()).count("gt") == 2


def test_selection_is_seeded():
    assert choose_sources(FRAMES, 0.5, 7) == choose_sources(list(reversed(FRAMES)), 0.5, 7)


def test_ratio_outside_unit_interval_rejected():
    with pytest.raises(ConfigError):
        choose_sources(FRAMES, 1.5, 0)


# ── mix_labels ──────────────────────────────────────────────────────────────

def test_mixed_set_copies_chosen_sources(tmp_path, label_dirs):
    gt_dir, pseudo_dir = label_dirs
    out = tmp_path / "mixed"
    sources = mix_labels(None, gt_dir, pseudo_dir, 0.5, 0, str(out))
    assert json.loads((out / MANIFEST).read_text()) == sources
    for frame, source in sources.items():
        assert read_grid(grid_path(str(out), frame)).labels[0] == (1 if source == "gt" else 2)


def test_missing_source_grid_is_named(tmp_path, label_dirs):
    gt_dir, pseudo_dir = label_dirs
    with pytest.raises(FormatError, match="missing file") as info:
        mix_labels(FRAMES + ["004"], gt_dir, pseudo_dir, 0.0, 0)
    assert info.value.path.endswith("004.mocg")


def test_missing_pseudo_directory(tmp_path):
    with pytest.raises(FormatError, match="missing directory"):
        mix_labels(None, str(tmp_path / "gt"), str(tmp_path / "nope"), 0.5, 0)


# ── BEV rendering ───────────────────────────────────────────────────────────

def test_top_label_is_the_highest_occupied_voxel(tiny_grid):
    labels = np.zeros(tiny_grid.num_voxels, dtype=np.uint8)
    labels[tiny_grid.linear_index(2, 3, 0)] = 1
    labels[tiny_grid.linear_index(2, 3, 1)] = 3
    labels[tiny_grid.linear_index(4, 0, 0)] = 2
    top = top_labels(VoxelGrid(tiny_grid, labels, 4))
    assert top.shape == (6, 5)
    assert top[2, 3] == 3 and top[4, 0] == 2
    assert np.count_nonzero(top) == 2


def test_render_puts_positive_y_at_the_top(tiny_grid):
    labels = np.zeros(tiny_grid.num_voxels, dtype=np.uint8)
    labels[tiny_grid.linear_index(0, 4, 0)] = 1  # largest y, smallest x
    table = load_class_table("omnihd")
    image = render_bev(VoxelGrid(tiny_grid, labels, 4), table)
    assert image.shape == (5, 6, 3)
    np.testing.assert_array_equal(image[0, 0], table[1].color)
    assert not image[1:].any()


def test_palette_greys_out_ids_past_the_table():
    colors = palette(load_class_table("omnihd")[:2], 4)
    np.testing.assert_array_equal(colors[0], (0, 0, 0))
    np.testing.assert_array_equal(colors[3], (128, 128, 128))


def test_ppm_file(tmp_path, tiny_grid):
    path = write_bev_ppm(str(tmp_path / "bev.ppm"), _grid(tiny_grid, 1), load_class_table("omnihd"))
    blob = open(path, "rb").read()
    header = b"P6\n6 5\n255\n"
    assert blob.startswith(header)
    assert len(blob) == len(header) + 6 * 5 * 3
