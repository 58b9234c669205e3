"""Just enough NIfTI-1 I/O to exchange volumes with the generator.

The generator's on-disk layout is the contract between the two packages, so
this reader is intentionally independent of the generator's code.  It
handles single-file .nii/.nii.gz with the 348-byte little-endian header and
the datatypes the generator writes.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

_DTYPES = {2: np.uint8, 4: np.int16, 8: np.int32, 16: np.float32, 64: np.float64, 512: np.uint16}
_CODES = {np.dtype(np.float32): 16, np.dtype(np.int32): 8}


def read_volume(path: str | Path) -> tuple[np.ndarray, tuple[float, float, float]]:
    """Return (data, spacing); data keeps the stored dtype."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 348:
        raise ValueError(f"{path}: truncated header")
    dim = struct.unpack_from("<8h", raw, 40)
    if not 1 <= dim[0] <= 7:
        raise ValueError(f"{path}: not a little-endian NIfTI-1 file")
    dims = [d for d in dim[1 : 1 + dim[0]]]
    while len(dims) > 3 and dims[-1] == 1:
        dims.pop()
    if len(dims) != 3:
        raise ValueError(f"{path}: expected 3-D volume, got {dims}")
    datatype = struct.unpack_from("<h", raw, 70)[0]
    if datatype not in _DTYPES:
        raise ValueError(f"{path}: unsupported datatype {datatype}")
    pixdim = struct.unpack_from("<8f", raw, 76)
    vox_offset = int(struct.unpack_from("<f", raw, 108)[0])
    count = dims[0] * dims[1] * dims[2]
    data = np.frombuffer(raw, dtype=_DTYPES[datatype], count=count, offset=vox_offset)
    spacing = tuple(abs(p) if p > 0 else 1.0 for p in pixdim[1:4])
    return data.reshape(dims, order="F"), spacing


def write_volume(
    data: np.ndarray, path: str | Path, spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
) -> None:
    """Write float32 or int32 volumes (enough for fixtures and eval dumps)."""
    path = Path(path)
    data = np.asarray(data)
    if data.dtype not in _CODES:
        data = data.astype(np.float32)
    code = _CODES[data.dtype]

    header = bytearray(348)
    struct.pack_into("<i", header, 0, 348)
    struct.pack_into("<8h", header, 40, 3, *data.shape, 1, 1, 1, 1)
    struct.pack_into("<h", header, 70, code)
    struct.pack_into("<h", header, 72, data.dtype.itemsize * 8)
    struct.pack_into("<8f", header, 76, 1.0, *spacing, 1.0, 1.0, 1.0, 1.0)
    struct.pack_into("<f", header, 108, 352.0)
    struct.pack_into("<f", header, 112, 1.0)  # scl_slope
    struct.pack_into("<h", header, 254, 2)  # sform_code
    struct.pack_into("<4f", header, 280, spacing[0], 0.0, 0.0, 0.0)  # srow_x
    struct.pack_into("<4f", header, 296, 0.0, spacing[1], 0.0, 0.0)  # srow_y
    struct.pack_into("<4f", header, 312, 0.0, 0.0, spacing[2], 0.0)  # srow_z
    header[344:348] = b"n+1\x00"

    payload = bytes(header) + b"\x00" * 4 + data.tobytes(order="F")
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(payload)
    else:
        path.write_bytes(payload)
