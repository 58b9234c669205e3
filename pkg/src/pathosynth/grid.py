"""3D grid primitives: volumes, label maps, probability maps, interpolation.

Conventions shared by every other module:

* voxel index (i, j, k) sits at world position ``affine @ (i, j, k, 1)``;
* volume data is float32, accumulations (means, losses) are float64;
* volumes are treated as immutable after construction -- every operation
  returns a new volume and is a pure function, safe to call concurrently.

Sampling outside the grid returns a configurable border value (default 0,
matching the background label of padded brain volumes).  Resampling instead
clamps to the edge so that constant volumes stay exactly constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import GridMismatchError, InvalidCoordinateError, MissingLabelError, VolumeError


class TissueClass(Enum):
    WHITE_MATTER = "white-matter"
    GRAY_MATTER = "gray-matter"
    CSF = "csf"
    OTHER = "other"
    BACKGROUND = "background"


def default_affine(spacing: tuple[float, float, float]) -> np.ndarray:
    """Axis-aligned voxel-to-world matrix with the origin at voxel (0,0,0)."""
    a = np.eye(4, dtype=np.float64)
    a[0, 0], a[1, 1], a[2, 2] = spacing
    return a


def _validate_grid(data: np.ndarray, spacing, affine) -> None:
    if data.ndim != 3:
        raise VolumeError(f"expected 3-D data, got {data.ndim}-D")
    if len(spacing) != 3 or any(s <= 0 for s in spacing):
        raise VolumeError(f"spacing must be three positive values, got {spacing}")
    if affine.shape != (4, 4):
        raise VolumeError(f"affine must be 4x4, got {affine.shape}")


@dataclass
class Volume:
    """A 3-D scalar grid with voxel spacing and world orientation."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float32)
        self.spacing = tuple(float(s) for s in self.spacing)
        if self.affine is None:
            self.affine = default_affine(self.spacing)
        self.affine = np.asarray(self.affine, dtype=np.float64)
        _validate_grid(self.data, self.spacing, self.affine)
        if not np.isfinite(self.data).all():
            raise VolumeError("volume data contains NaN or Inf")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def with_data(self, data: np.ndarray) -> "Volume":
        """New volume on the same grid."""
        return Volume(data, self.spacing, self.affine)


@dataclass
class LabelVolume:
    """Integer anatomy labels with a label-ID to tissue-class table.

    Label 0 is the background class by convention; every label present in
    the data must have a table entry.
    """

    data: np.ndarray
    label_table: dict[int, TissueClass]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if not np.issubdtype(self.data.dtype, np.integer):
            raise VolumeError("label data must be integral")
        self.data = self.data.astype(np.int32, copy=False)
        self.spacing = tuple(float(s) for s in self.spacing)
        if self.affine is None:
            self.affine = default_affine(self.spacing)
        self.affine = np.asarray(self.affine, dtype=np.float64)
        _validate_grid(self.data, self.spacing, self.affine)
        if self.data.min() < 0:
            raise VolumeError("label IDs must be non-negative")
        present = np.unique(self.data)
        missing = [int(lab) for lab in present if int(lab) not in self.label_table]
        if missing:
            raise MissingLabelError(f"labels without table entry: {missing}")
        if 0 in self.label_table and self.label_table[0] is not TissueClass.BACKGROUND:
            raise VolumeError("label 0 must map to the background class")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    def class_mask(self, tissue: TissueClass) -> np.ndarray:
        """Boolean mask of all voxels whose label maps to `tissue`."""
        ids = [lab for lab, cls in self.label_table.items() if cls is tissue]
        if not ids:
            return np.zeros(self.dims, dtype=bool)
        lut = np.zeros(int(self.data.max()) + 1, dtype=bool)
        for lab in ids:
            if lab < lut.size:
                lut[lab] = True
        return lut[self.data]


@dataclass
class ProbVolume:
    """A probability map: scalar grid with every value in [0, 1]."""

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    affine: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float32)
        self.spacing = tuple(float(s) for s in self.spacing)
        if self.affine is None:
            self.affine = default_affine(self.spacing)
        self.affine = np.asarray(self.affine, dtype=np.float64)
        _validate_grid(self.data, self.spacing, self.affine)
        if not np.isfinite(self.data).all():
            raise VolumeError("probability data contains NaN or Inf")
        lo, hi = float(self.data.min()), float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise VolumeError(f"probability values outside [0, 1]: min={lo}, max={hi}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]


AnyVolume = Volume | LabelVolume | ProbVolume


def same_grid(a: AnyVolume, b: AnyVolume) -> bool:
    return (
        a.dims == b.dims
        and np.allclose(a.spacing, b.spacing)
        and np.allclose(a.affine, b.affine)
    )


def require_same_grid(a: AnyVolume, b: AnyVolume, what: str = "volumes") -> None:
    if not same_grid(a, b):
        raise GridMismatchError(f"{what} are on different grids: {a.dims} vs {b.dims}")


# ---------------------------------------------------------------------------
# Sampling kernels
#
# Both kernels embed the volume in a 1-voxel padding ring, shift coordinates
# by +1 and clip into the padded range: every out-of-grid corner then lands
# on the ring without per-corner masking.  The trilinear kernel uses the
# nested-lerp form v0 + f*(v1 - v0), which returns node values and constant
# fields bit-exactly.
# ---------------------------------------------------------------------------


def _pull_trilinear(
    data: np.ndarray,
    cx: np.ndarray,
    cy: np.ndarray,
    cz: np.ndarray,
    border: float = 0.0,
    clamp: bool = False,
) -> np.ndarray:
    nx, ny, nz = data.shape
    if clamp:
        src = np.pad(data, 1, mode="edge")
    else:
        src = np.pad(data, 1, mode="constant", constant_values=data.dtype.type(border))

    x = np.clip(cx + 1.0, 0.0, nx + 1.0)
    y = np.clip(cy + 1.0, 0.0, ny + 1.0)
    z = np.clip(cz + 1.0, 0.0, nz + 1.0)
    i0x = np.minimum(np.floor(x), nx).astype(np.intp)
    i0y = np.minimum(np.floor(y), ny).astype(np.intp)
    i0z = np.minimum(np.floor(z), nz).astype(np.intp)
    fx = (x - i0x).astype(np.float32)
    fy = (y - i0y).astype(np.float32)
    fz = (z - i0z).astype(np.float32)

    flat = src.ravel()
    step_y = nz + 2
    step_x = (ny + 2) * step_y
    base = i0x * step_x + i0y * step_y + i0z

    c000 = flat[base]
    c001 = flat[base + 1]
    c010 = flat[base + step_y]
    c011 = flat[base + step_y + 1]
    c100 = flat[base + step_x]
    c101 = flat[base + step_x + 1]
    c110 = flat[base + step_x + step_y]
    c111 = flat[base + step_x + step_y + 1]

    c00 = c000 + fz * (c001 - c000)
    c01 = c010 + fz * (c011 - c010)
    c10 = c100 + fz * (c101 - c100)
    c11 = c110 + fz * (c111 - c110)
    c0 = c00 + fy * (c01 - c00)
    c1 = c10 + fy * (c11 - c10)
    return c0 + fx * (c1 - c0)


def _pull_nearest(
    data: np.ndarray,
    cx: np.ndarray,
    cy: np.ndarray,
    cz: np.ndarray,
    border: int | float = 0,
    clamp: bool = False,
) -> np.ndarray:
    nx, ny, nz = data.shape
    if clamp:
        src = np.pad(data, 1, mode="edge")
    else:
        src = np.pad(data, 1, mode="constant", constant_values=data.dtype.type(border))
    # ceil(x - 0.5) rounds to the nearest index with halfway ties going to
    # the lower index, per the documented tie-break (x, then y, then z is
    # irrelevant here because the rule is applied per axis).
    ix = np.clip(np.ceil(cx - 0.5) + 1.0, 0, nx + 1).astype(np.intp)
    iy = np.clip(np.ceil(cy - 0.5) + 1.0, 0, ny + 1).astype(np.intp)
    iz = np.clip(np.ceil(cz - 0.5) + 1.0, 0, nz + 1).astype(np.intp)
    return src[ix, iy, iz]


def _check_point(point) -> np.ndarray:
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,) or not np.isfinite(p).all():
        raise InvalidCoordinateError(f"invalid coordinate: {point!r}")
    return p


def trilinear_sample(v: Volume | ProbVolume, point, border: float = 0.0) -> float:
    """Trilinear interpolation of the 8 voxels surrounding a continuous
    voxel coordinate; outside the grid the border value takes over."""
    p = _check_point(point)
    out = _pull_trilinear(
        v.data, np.array([p[0]]), np.array([p[1]]), np.array([p[2]]), border=border
    )
    return float(out[0])


def nearest_sample(v: LabelVolume, point, border: int = 0) -> int:
    """Label of the voxel center nearest to a continuous coordinate.

    Halfway ties go to the lower index on each axis.
    """
    p = _check_point(point)
    out = _pull_nearest(
        v.data, np.array([p[0]]), np.array([p[1]]), np.array([p[2]]), border=border
    )
    return int(out[0])


def upsample_lattice(coarse: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Trilinearly upsample a control lattice whose corners align with the
    volume corners (lattice index g-1 maps to voxel index n-1)."""
    axes = []
    for n, gn in zip(dims, coarse.shape):
        if n == 1:
            axes.append(np.zeros(1))
        else:
            axes.append(np.arange(n, dtype=np.float64) * ((gn - 1) / (n - 1)))
    cx, cy, cz = np.meshgrid(*axes, indexing="ij")
    return _pull_trilinear(coarse.astype(np.float32), cx, cy, cz, clamp=True)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def dims_for_spacing(
    dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    target_spacing: tuple[float, float, float],
) -> tuple[int, int, int]:
    """Grid size covering the same world extent at a different spacing."""
    return tuple(
        max(1, int(round(n * s / ts))) for n, s, ts in zip(dims, spacing, target_spacing)
    )


def _resample_coords(dims_in, spacing_in, dims_out, spacing_out):
    axes = []
    for n_in, s_in, n_out, s_out in zip(dims_in, spacing_in, dims_out, spacing_out):
        r = s_out / s_in
        axes.append((np.arange(n_out, dtype=np.float64) + 0.5) * r - 0.5)
    return np.meshgrid(*axes, indexing="ij")


def _resample_affine(affine, spacing_in, spacing_out):
    r = np.asarray(spacing_out, dtype=np.float64) / np.asarray(spacing_in, dtype=np.float64)
    pre = np.eye(4)
    pre[0, 0], pre[1, 1], pre[2, 2] = r
    pre[:3, 3] = (r - 1.0) / 2.0
    return affine @ pre


def resample(
    v: AnyVolume,
    target_dims: tuple[int, int, int],
    target_spacing: tuple[float, float, float],
    mode: str = "trilinear",
) -> AnyVolume:
    """Resample onto a new grid covering the same world extent.

    The output voxel at index j samples the input at continuous coordinate
    (j + 1/2) * ratio - 1/2 per axis, so an identical target grid copies the
    input bit-exactly.  Edge-clamped sampling keeps constant volumes constant.
    """
    if any(n <= 0 for n in target_dims) or any(s <= 0 for s in target_spacing):
        raise VolumeError("target dims and spacing must be positive")
    if isinstance(v, LabelVolume) and mode != "nearest":
        raise VolumeError("label volumes must be resampled with mode='nearest'")

    cx, cy, cz = _resample_coords(v.dims, v.spacing, target_dims, target_spacing)
    new_affine = _resample_affine(v.affine, v.spacing, target_spacing)
    spacing = tuple(float(s) for s in target_spacing)

    if mode == "nearest":
        out = _pull_nearest(v.data, cx, cy, cz, clamp=True)
    elif mode == "trilinear":
        out = _pull_trilinear(v.data, cx, cy, cz, clamp=True)
    else:
        raise VolumeError(f"unknown resample mode: {mode!r}")

    if isinstance(v, LabelVolume):
        return LabelVolume(out, v.label_table, spacing, new_affine)
    if isinstance(v, ProbVolume):
        return ProbVolume(np.clip(out, 0.0, 1.0), spacing, new_affine)
    return Volume(out, spacing, new_affine)
