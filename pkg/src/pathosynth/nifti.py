"""Minimal NIfTI-1 reader and writer.

Supports single-file .nii / .nii.gz volumes with the 348-byte header,
little- or big-endian (detected via the dim[0] range check), and the
datatypes the generator needs: uint8, uint16, int16, int32, float32,
float64.  scl_slope / scl_inter are applied on read and never written
different from (1, 0).  Trailing singleton dimensions are squeezed; the
result must be 3-D.

Written files carry the affine in the sform (code 2) and use deterministic
gzip (mtime 0), so identical volumes produce identical bytes.
"""

from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np

from .errors import NiftiFormatError, VolumeError
from .grid import LabelVolume, ProbVolume, TissueClass, Volume

HEADER_SIZE = 348
VOX_OFFSET = 352  # header + 4 empty extension bytes
MAGIC_SINGLE = b"n+1\x00"

_DTYPE_CODES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}
_CODE_FOR_DTYPE = {v: k for k, v in _DTYPE_CODES.items()}


def _header_dtype(byteorder: str) -> np.dtype:
    e = byteorder
    return np.dtype(
        [
            ("sizeof_hdr", f"{e}i4"),
            ("data_type", "S10"),
            ("db_name", "S18"),
            ("extents", f"{e}i4"),
            ("session_error", f"{e}i2"),
            ("regular", "S1"),
            ("dim_info", "u1"),
            ("dim", f"{e}i2", (8,)),
            ("intent_p1", f"{e}f4"),
            ("intent_p2", f"{e}f4"),
            ("intent_p3", f"{e}f4"),
            ("intent_code", f"{e}i2"),
            ("datatype", f"{e}i2"),
            ("bitpix", f"{e}i2"),
            ("slice_start", f"{e}i2"),
            ("pixdim", f"{e}f4", (8,)),
            ("vox_offset", f"{e}f4"),
            ("scl_slope", f"{e}f4"),
            ("scl_inter", f"{e}f4"),
            ("slice_end", f"{e}i2"),
            ("slice_code", "u1"),
            ("xyzt_units", "u1"),
            ("cal_max", f"{e}f4"),
            ("cal_min", f"{e}f4"),
            ("slice_duration", f"{e}f4"),
            ("toffset", f"{e}f4"),
            ("glmax", f"{e}i4"),
            ("glmin", f"{e}i4"),
            ("descrip", "S80"),
            ("aux_file", "S24"),
            ("qform_code", f"{e}i2"),
            ("sform_code", f"{e}i2"),
            ("quatern_b", f"{e}f4"),
            ("quatern_c", f"{e}f4"),
            ("quatern_d", f"{e}f4"),
            ("qoffset_x", f"{e}f4"),
            ("qoffset_y", f"{e}f4"),
            ("qoffset_z", f"{e}f4"),
            ("srow_x", f"{e}f4", (4,)),
            ("srow_y", f"{e}f4", (4,)),
            ("srow_z", f"{e}f4", (4,)),
            ("intent_name", "S16"),
            ("magic", "S4"),
        ]
    )


assert _header_dtype("<").itemsize == HEADER_SIZE


def _open_for_read(path: Path):
    fh = open(path, "rb")
    magic = fh.read(2)
    fh.seek(0)
    if magic == b"\x1f\x8b":
        return gzip.GzipFile(fileobj=fh, mode="rb")
    return fh


def _quaternion_affine(hdr) -> np.ndarray:
    b, c, d = float(hdr["quatern_b"]), float(hdr["quatern_c"]), float(hdr["quatern_d"])
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(max(a2, 0.0))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    pixdim = np.asarray(hdr["pixdim"], dtype=np.float64)
    qfac = -1.0 if pixdim[0] == -1.0 else 1.0
    scale = np.array([pixdim[1], pixdim[2], pixdim[3] * qfac])
    affine = np.eye(4)
    affine[:3, :3] = rot * scale[None, :]
    affine[:3, 3] = [float(hdr["qoffset_x"]), float(hdr["qoffset_y"]), float(hdr["qoffset_z"])]
    return affine


def _parse_header(raw: bytes, path: Path):
    big_endian = False
    hdr = np.frombuffer(raw, dtype=_header_dtype("<"), count=1)[0]
    ndim = int(hdr["dim"][0])
    if not 1 <= ndim <= 7:
        big_endian = True
        hdr = np.frombuffer(raw, dtype=_header_dtype(">"), count=1)[0]
        ndim = int(hdr["dim"][0])
        if not 1 <= ndim <= 7:
            raise NiftiFormatError(f"{path}: dim[0]={ndim} under both byte orders; not NIfTI-1")
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        raise NiftiFormatError(f"{path}: sizeof_hdr={int(hdr['sizeof_hdr'])}, expected 348")
    magic = bytes(hdr["magic"]).rstrip(b"\x00")
    if magic != MAGIC_SINGLE.rstrip(b"\x00"):
        raise NiftiFormatError(f"{path}: magic-number mismatch: {magic!r}")
    return hdr, big_endian


def read_nifti(path: str | Path, kind: str = "image") -> Volume | LabelVolume | ProbVolume:
    """Read a NIfTI-1 volume.

    kind selects the interpretation: "image" (any finite scalars), "labels"
    (integral values only; the caller attaches the tissue table afterwards
    via :func:`as_label_volume`), or "prob" (values must lie in [0, 1]).
    """
    path = Path(path)
    with _open_for_read(path) as fh:
        raw = fh.read(HEADER_SIZE)
        if len(raw) < HEADER_SIZE:
            raise NiftiFormatError(f"{path}: unexpected end of file at byte {len(raw)} (header needs 348)")
        hdr, big_endian = _parse_header(raw, path)

        code = int(hdr["datatype"])
        if code not in _DTYPE_CODES:
            raise NiftiFormatError(f"{path}: unsupported datatype code {code}")
        dtype = _DTYPE_CODES[code]
        if big_endian:
            dtype = dtype.newbyteorder(">")

        ndim = int(hdr["dim"][0])
        dims = [int(d) for d in hdr["dim"][1 : 1 + ndim]]
        while len(dims) > 3 and dims[-1] == 1:
            dims.pop()
        if len(dims) != 3:
            raise NiftiFormatError(f"{path}: expected a 3-D volume, got dims {dims}")

        offset = int(float(hdr["vox_offset"]))
        skip = offset - HEADER_SIZE
        if skip > 0:
            skipped = fh.read(skip)
            if len(skipped) < skip:
                raise NiftiFormatError(
                    f"{path}: unexpected end of file at byte {HEADER_SIZE + len(skipped)}"
                    f" (data starts at {offset})"
                )
        count = dims[0] * dims[1] * dims[2]
        nbytes = count * dtype.itemsize
        blob = fh.read(nbytes)
        if len(blob) < nbytes:
            raise NiftiFormatError(
                f"{path}: unexpected end of file at byte {offset + len(blob)}"
                f" (expected {offset + nbytes})"
            )

    data = np.frombuffer(blob, dtype=dtype, count=count).reshape(dims, order="F")
    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    if (slope not in (0.0, 1.0)) or inter != 0.0:
        scale = slope if slope != 0.0 else 1.0
        data = data.astype(np.float64) * scale + inter

    pixdim = np.abs(np.asarray(hdr["pixdim"][1:4], dtype=np.float64))
    spacing = tuple(float(p) if p > 0 else 1.0 for p in pixdim)

    if int(hdr["sform_code"]) > 0:
        affine = np.vstack(
            [
                np.asarray(hdr["srow_x"], dtype=np.float64),
                np.asarray(hdr["srow_y"], dtype=np.float64),
                np.asarray(hdr["srow_z"], dtype=np.float64),
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
    elif int(hdr["qform_code"]) > 0:
        affine = _quaternion_affine(hdr)
    else:
        affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])

    if kind == "labels":
        rounded = np.rint(np.asarray(data, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(data, dtype=np.float64)):
            raise NiftiFormatError(f"{path}: label volume contains non-integral values")
        ids = sorted(int(v) for v in np.unique(rounded))
        # placeholder table: every label "other", 0 background; callers that
        # know the real tissue classes use as_label_volume instead
        table = {i: (TissueClass.BACKGROUND if i == 0 else TissueClass.OTHER) for i in ids}
        return LabelVolume(rounded.astype(np.int32), table, spacing, affine)
    if kind == "prob":
        arr = np.asarray(data, dtype=np.float64)
        if arr.min() < -1e-9 or arr.max() > 1.0 + 1e-9:
            raise NiftiFormatError(
                f"{path}: probability values outside [0, 1]: [{arr.min()}, {arr.max()}]"
            )
        return ProbVolume(np.clip(arr, 0.0, 1.0).astype(np.float32), spacing, affine)
    if kind == "image":
        return Volume(np.asarray(data, dtype=np.float32), spacing, affine)
    raise VolumeError(f"unknown read kind: {kind!r}")


def as_label_volume(v: LabelVolume, label_table: dict[int, TissueClass]) -> LabelVolume:
    """Attach a real tissue table to a label volume read from disk."""
    return LabelVolume(v.data, label_table, v.spacing, v.affine)


def write_nifti(v, path: str | Path, datatype: str = "float32") -> None:
    """Write a volume as single-file NIfTI-1; gzip when the path ends in .gz."""
    path = Path(path)
    dtype = np.dtype(datatype)
    if dtype not in _CODE_FOR_DTYPE:
        raise NiftiFormatError(f"unsupported write datatype: {datatype}")
    data = np.asarray(getattr(v, "data", v))
    if data.ndim != 3:
        raise VolumeError("write_nifti expects a 3-D volume")
    spacing = getattr(v, "spacing", (1.0, 1.0, 1.0))
    affine = getattr(v, "affine", None)
    if affine is None:
        affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])

    hdr = np.zeros((), dtype=_header_dtype("<"))
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    hdr["dim"][0] = 3
    hdr["dim"][1:4] = data.shape
    hdr["dim"][4:] = 1
    hdr["datatype"] = _CODE_FOR_DTYPE[dtype]
    hdr["bitpix"] = dtype.itemsize * 8
    hdr["pixdim"][0] = 1.0
    hdr["pixdim"][1:4] = spacing
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["scl_inter"] = 0.0
    hdr["xyzt_units"] = 2  # millimeters
    hdr["qform_code"] = 0
    hdr["sform_code"] = 2
    hdr["srow_x"] = affine[0]
    hdr["srow_y"] = affine[1]
    hdr["srow_z"] = affine[2]
    hdr["magic"] = MAGIC_SINGLE

    payload = hdr.tobytes() + b"\x00\x00\x00\x00" + np.asarray(data, dtype=dtype).tobytes(order="F")
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        with open(path, "wb") as fh:
            # filename="" plus mtime=0 keeps the gzip bytes content-addressed
            with gzip.GzipFile(filename="", fileobj=fh, mode="wb", mtime=0) as gz:
                gz.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)
