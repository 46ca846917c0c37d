"""
File Handler Tool: atomic writes, JSON/YAML documents and CSV point fixtures.
"""

import csv
import json
import os
import tempfile

import numpy as np
import yaml

from models.errors import FormatError
from models.geometry import ATTRIBUTE_FIELDS, LabeledPointCloud


def atomic_write_bytes(path: str, data: bytes) -> str:
    """
    Write `data` to a temp file next to `path`, then rename over it.

    Returns:
        The written path.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str, text: str) -> str:
    return atomic_write_bytes(path, text.encode("utf-8"))


def save_to_json(data, path: str) -> str:
    """
    Save a JSON document atomically.

    Args:
        data: JSON-serializable object.
        path: Target file.

    Returns:
        Path to the saved file.
    """
    return atomic_write_text(path, json.dumps(data, indent=2, default=str) + "\n")


def load_document(path: str):
    """Load a JSON or YAML document (JSON is valid YAML)."""
    if not os.path.exists(path):
        raise FormatError("missing file", path)
    with open(path, "r") as f:
        try:
            return yaml.safe_load(f)
        except yaml.YAMLError:
            raise FormatError("not valid JSON/YAML", path) from None


def load_points_csv(path: str) -> LabeledPointCloud:
    """
    Load a point fixture from CSV with a header row.

    Columns x, y, z are required; any of vx, vy, amp, snr, t, class, conf,
    track may follow in any order.
    """
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        fields = [name.strip() for name in (reader.fieldnames or [])]
        missing = [axis for axis in ("x", "y", "z") if axis not in fields]
        if missing:
            raise FormatError(f"CSV lacks column(s) {missing}", path)
        unknown = [name for name in fields if name not in ("x", "y", "z") and name not in ATTRIBUTE_FIELDS]
        if unknown:
            raise FormatError(f"unknown CSV column(s) {unknown}", path)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            try:
                rows.append([float(row[name]) for name in reader.fieldnames])
            except (TypeError, ValueError):
                raise FormatError(f"non-numeric or missing value on row {line_no}", path) from None

    data = np.asarray(rows, dtype=np.float64).reshape(-1, len(fields))
    columns = dict(zip(fields, data.T))
    xyz = np.column_stack([columns["x"], columns["y"], columns["z"]]) if len(data) else np.zeros((0, 3))
    attrs = {name: columns[name] for name in fields if name in ATTRIBUTE_FIELDS}
    return LabeledPointCloud(xyz, attrs)


def save_points_csv(cloud: LabeledPointCloud, path: str) -> str:
    names = ["x", "y", "z"] + [f for f in ATTRIBUTE_FIELDS if cloud.has(f)]
    data = np.column_stack([cloud.xyz] + [cloud.attrs[f] for f in names[3:]])
    lines = [",".join(names)] + [",".join(repr(float(v)) for v in row) for row in data]
    return atomic_write_text(path, "\n".join(lines) + "\n")
