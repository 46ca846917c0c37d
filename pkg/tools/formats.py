"""
Binary formats: occupancy grids (MOCG), point clouds (MOPC), segmentation
masks (MOSM) and weight bundles (MOBW). Little-endian throughout; every
writer goes through an atomic temp-file rename.
"""

import io
import struct

import numpy as np

from models.errors import FormatError, GridError, ShapeError
from models.fusion import BlockWeights
from models.geometry import ATTRIBUTE_FIELDS, LabeledPointCloud
from models.grid import GridSpec, VoxelGrid
from models.scene import SemanticMask
from tools.file_handler import atomic_write_bytes

VERSION = 1

_MOCG_HEADER = struct.Struct("<4sI6dd3II")
_MOPC_HEADER = struct.Struct("<4sIII")
_MOSM_HEADER = struct.Struct("<4sI16sII")
_MOBW_HEADER = struct.Struct("<4sII")
_MASK_RECORD = np.dtype([("cls", "u1"), ("conf", "<f4")])

FIELD_WIDTH = 16
NAME_WIDTH = 32


def _read(path: str) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _check_magic(blob: bytes, header: struct.Struct, magic: bytes, path: str) -> tuple:
    if len(blob) < header.size:
        raise FormatError(f"bad {magic.decode()} header", path)
    fields = header.unpack_from(blob, 0)
    if fields[0] != magic or fields[1] != VERSION:
        raise FormatError(f"bad {magic.decode()} header", path)
    return fields


# ── MOCG ────────────────────────────────────────────────────────────────────

def write_grid(path: str, grid: VoxelGrid) -> str:
    spec = grid.spec
    header = _MOCG_HEADER.pack(
        b"MOCG", VERSION, *spec.x_range, *spec.y_range, *spec.z_range,
        spec.voxel_size, *spec.dims, grid.num_classes,
    )
    return atomic_write_bytes(path, header + grid.labels.tobytes())


def read_grid(path: str) -> VoxelGrid:
    blob = _read(path)
    fields = _check_magic(blob, _MOCG_HEADER, b"MOCG", path)
    x0, x1, y0, y1, z0, z1, voxel_size = fields[2:9]
    dims, num_classes = tuple(fields[9:12]), fields[12]
    try:
        spec = GridSpec(x_range=(x0, x1), y_range=(y0, y1), z_range=(z0, z1), voxel_size=voxel_size)
    except ValueError as e:
        raise FormatError(f"bad MOCG grid ({e})", path) from None
    if spec.dims != dims:
        raise FormatError(f"MOCG dims {dims} disagree with ranges {spec.dims}", path)
    body = blob[_MOCG_HEADER.size:]
    if len(body) != spec.num_voxels:
        raise FormatError(f"truncated MOCG body ({len(body)} of {spec.num_voxels} bytes)", path)
    try:
        return VoxelGrid(spec, np.frombuffer(body, dtype=np.uint8).copy(), num_classes)
    except GridError as e:
        raise FormatError(f"bad MOCG labels ({e})", path) from None


# ── MOPC ────────────────────────────────────────────────────────────────────

def write_points(path: str, cloud: LabeledPointCloud) -> str:
    names = ["x", "y", "z"] + [f for f in ATTRIBUTE_FIELDS if cloud.has(f)]
    data = np.column_stack([cloud.xyz] + [cloud.attrs[f] for f in names[3:]]).astype("<f4")
    buf = io.BytesIO()
    buf.write(_MOPC_HEADER.pack(b"MOPC", VERSION, len(cloud), len(names)))
    for name in names:
        buf.write(name.encode("ascii").ljust(FIELD_WIDTH, b" "))
    buf.write(data.tobytes())
    return atomic_write_bytes(path, buf.getvalue())


def read_points(path: str) -> LabeledPointCloud:
    blob = _read(path)
    _, _, n_points, n_fields = _check_magic(blob, _MOPC_HEADER, b"MOPC", path)
    offset = _MOPC_HEADER.size
    if len(blob) < offset + n_fields * FIELD_WIDTH:
        raise FormatError("bad MOPC header", path)
    names = []
    for i in range(n_fields):
        raw = blob[offset + i * FIELD_WIDTH: offset + (i + 1) * FIELD_WIDTH]
        names.append(raw.decode("ascii", errors="replace").strip(" \x00"))
    offset += n_fields * FIELD_WIDTH
    if names[:3] != ["x", "y", "z"]:
        raise FormatError(f"MOPC fields must start with x,y,z, got {names[:3]}", path)
    unknown = [n for n in names[3:] if n not in ATTRIBUTE_FIELDS]
    if unknown:
        raise FormatError(f"unknown MOPC field(s) {unknown}", path)
    expected = n_points * n_fields * 4
    if len(blob) - offset != expected:
        raise FormatError(f"truncated MOPC body ({len(blob) - offset} of {expected} bytes)", path)
    data = np.frombuffer(blob, dtype="<f4", offset=offset).reshape(n_points, n_fields).astype(np.float64)
    try:
        return LabeledPointCloud(data[:, :3], {n: data[:, i + 3] for i, n in enumerate(names[3:])})
    except (ShapeError, GridError) as e:
        raise FormatError(f"bad MOPC data ({e})", path) from None


# ── MOSM ────────────────────────────────────────────────────────────────────

def write_mask(path: str, mask: SemanticMask) -> str:
    name = mask.camera.encode("ascii")
    if len(name) > FIELD_WIDTH:
        raise FormatError(f"camera name longer than {FIELD_WIDTH} bytes", path)
    records = np.empty(mask.classes.size, dtype=_MASK_RECORD)
    records["cls"] = mask.classes.reshape(-1)
    records["conf"] = mask.confidences.reshape(-1)
    header = _MOSM_HEADER.pack(b"MOSM", VERSION, name.ljust(FIELD_WIDTH, b" "), mask.width, mask.height)
    return atomic_write_bytes(path, header + records.tobytes())


def read_mask(path: str) -> SemanticMask:
    blob = _read(path)
    _, _, raw_name, width, height = _check_magic(blob, _MOSM_HEADER, b"MOSM", path)
    expected = width * height * _MASK_RECORD.itemsize
    if len(blob) - _MOSM_HEADER.size != expected:
        raise FormatError(f"truncated MOSM body ({len(blob) - _MOSM_HEADER.size} of {expected} bytes)", path)
    records = np.frombuffer(blob, dtype=_MASK_RECORD, offset=_MOSM_HEADER.size).reshape(height, width)
    conf = records["conf"].astype(np.float64)
    if conf.size and (conf.min() < 0.0 or conf.max() > 1.0 or not np.all(np.isfinite(conf))):
        raise FormatError("MOSM confidences outside [0, 1]", path)
    camera = raw_name.decode("ascii", errors="replace").strip(" \x00")
    return SemanticMask(camera, records["cls"].copy(), conf)


# ── MOBW ────────────────────────────────────────────────────────────────────

def save_weights(path: str, weights: BlockWeights) -> str:
    buf = io.BytesIO()
    names = weights.names()
    buf.write(_MOBW_HEADER.pack(b"MOBW", VERSION, len(names)))
    for name in names:
        raw = name.encode("ascii")
        if len(raw) > NAME_WIDTH:
            raise FormatError(f"tensor name '{name}' longer than {NAME_WIDTH} bytes", path)
        t = np.ascontiguousarray(weights.tensors[name], dtype="<f8")
        buf.write(raw.ljust(NAME_WIDTH, b"\x00"))
        buf.write(struct.pack(f"<I{t.ndim}I", t.ndim, *t.shape))
        buf.write(t.tobytes())
    return atomic_write_bytes(path, buf.getvalue())


def load_weights(path: str) -> BlockWeights:
    blob = _read(path)
    _, _, count = _check_magic(blob, _MOBW_HEADER, b"MOBW", path)
    offset = _MOBW_HEADER.size
    tensors = {}
    try:
        for _ in range(count):
            name = blob[offset: offset + NAME_WIDTH].rstrip(b"\x00").decode("ascii")
            offset += NAME_WIDTH
            (rank,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * size > len(blob):
                raise FormatError(f"truncated MOBW tensor '{name}'", path)
            tensors[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape).copy()
            offset += 8 * size
    except (struct.error, UnicodeDecodeError):
        raise FormatError("truncated MOBW file", path) from None
    if offset != len(blob):
        raise FormatError("trailing bytes after MOBW tensors", path)
    try:
        return BlockWeights(tensors).validate()
    except ShapeError as e:
        raise FormatError(f"bad MOBW data ({e})", path) from None
