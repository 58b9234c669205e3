"""Random spatial deformation: affine plus smooth nonlinear displacement.

Fields are sampled once per training sample and applied by pull-back
(backward) warping: the output voxel reads the source at the displaced
location, which avoids holes.  Label maps are warped with nearest-neighbor
sampling so classes never mix; scalar and probability volumes use trilinear
sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import VolumeError
from .grid import LabelVolume, ProbVolume, Volume, _pull_nearest, _pull_trilinear, upsample_lattice


@dataclass(frozen=True)
class DeformConfig:
    """Sampling ranges; all zero means the identity field.

    rotation_deg, shear and translation_mm are symmetric half-ranges;
    scaling is sampled in [1 - scaling, 1 + scaling].  The nonlinear part
    is a coarse lattice of Gaussian displacements (std = cap/2) whose vector
    norms are capped at nonlinear_cap_mm.
    """

    rotation_deg: float = 15.0
    scaling: float = 0.15
    shear: float = 0.012
    translation_mm: float = 5.0
    nonlinear_cap_mm: float = 10.0
    control_points: int = 8

    def __post_init__(self) -> None:
        for name in ("rotation_deg", "scaling", "shear", "translation_mm", "nonlinear_cap_mm"):
            if getattr(self, name) < 0:
                raise VolumeError(f"deformation range {name} must be >= 0")
        if self.control_points < 2:
            raise VolumeError("control_points must be >= 2")

    @classmethod
    def identity(cls) -> "DeformConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


def _rotation_matrix(angles_deg: np.ndarray) -> np.ndarray:
    ax, ay, az = (math.radians(a) for a in angles_deg)
    rx = np.array([[1, 0, 0], [0, math.cos(ax), -math.sin(ax)], [0, math.sin(ax), math.cos(ax)]])
    ry = np.array([[math.cos(ay), 0, math.sin(ay)], [0, 1, 0], [-math.sin(ay), 0, math.cos(ay)]])
    rz = np.array([[math.cos(az), -math.sin(az), 0], [math.sin(az), math.cos(az), 0], [0, 0, 1]])
    return rx @ ry @ rz


@dataclass
class DeformationField:
    """A sampled deformation on a fixed grid.

    The mapping is evaluated in millimeters around the volume center c:
    p_src = M @ (p - c) + c + t + u(x), with M the rotation/shear/scaling
    matrix, t the translation and u the trilinearly upsampled coarse
    displacement lattice.  All parameters are recorded so the field is
    reproducible from its seed alone.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    rotation_deg: np.ndarray
    scaling: np.ndarray
    shear: np.ndarray
    translation_mm: np.ndarray
    coarse_mm: np.ndarray  # (3, g, g, g) displacements in mm
    rng_seed: int = 0

    @cached_property
    def source_coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Continuous voxel coordinates each output voxel pulls from."""
        nx, ny, nz = self.dims
        s = np.asarray(self.spacing, dtype=np.float64)
        center = (np.asarray(self.dims, dtype=np.float64) - 1.0) / 2.0

        m = _rotation_matrix(self.rotation_deg)
        sh = np.array(
            [[1.0, self.shear[0], self.shear[1]], [0.0, 1.0, self.shear[2]], [0.0, 0.0, 1.0]]
        )
        m = m @ sh @ np.diag(self.scaling)
        # Fold spacing into the matrix: entries become m[i,j] * s[j] / s[i],
        # which is exactly the identity matrix when m is (s/s == 1.0 in IEEE).
        m_vox = (m * s[None, :]) / s[:, None]
        off = self.translation_mm / s

        ix = np.arange(nx, dtype=np.float64) - center[0]
        iy = np.arange(ny, dtype=np.float64) - center[1]
        iz = np.arange(nz, dtype=np.float64) - center[2]
        gx = ix[:, None, None]
        gy = iy[None, :, None]
        gz = iz[None, None, :]

        cx = m_vox[0, 0] * gx + m_vox[0, 1] * gy + m_vox[0, 2] * gz + (center[0] + off[0])
        cy = m_vox[1, 0] * gx + m_vox[1, 1] * gy + m_vox[1, 2] * gz + (center[1] + off[1])
        cz = m_vox[2, 0] * gx + m_vox[2, 1] * gy + m_vox[2, 2] * gz + (center[2] + off[2])

        if np.any(self.coarse_mm != 0.0):
            for axis, target in enumerate((cx, cy, cz)):
                target += upsample_lattice(self.coarse_mm[axis], self.dims) / s[axis]
        return cx, cy, cz


def sample_deformation(
    dims: tuple[int, int, int],
    spacing: tuple[float, float, float],
    config: DeformConfig,
    rng_seed: int,
) -> DeformationField:
    """Draw a random field; all-zero ranges give the identity bit-exactly."""
    rng = np.random.default_rng(rng_seed)
    rotation = rng.uniform(-config.rotation_deg, config.rotation_deg, 3)
    scaling = rng.uniform(1.0 - config.scaling, 1.0 + config.scaling, 3)
    shear = rng.uniform(-config.shear, config.shear, 3)
    translation = rng.uniform(-config.translation_mm, config.translation_mm, 3)

    g = config.control_points
    cap = config.nonlinear_cap_mm
    if cap > 0:
        coarse = rng.normal(0.0, cap / 2.0, size=(3, g, g, g))
        norms = np.sqrt((coarse**2).sum(axis=0))
        over = norms > cap
        if over.any():
            scale = np.ones_like(norms)
            scale[over] = cap / norms[over]
            coarse = coarse * scale[None]
    else:
        coarse = np.zeros((3, g, g, g))

    return DeformationField(
        dims=tuple(int(n) for n in dims),
        spacing=tuple(float(s) for s in spacing),
        rotation_deg=rotation,
        scaling=scaling,
        shear=shear,
        translation_mm=translation,
        coarse_mm=coarse,
        rng_seed=rng_seed,
    )


def _require_field_grid(v, field_: DeformationField) -> None:
    if v.dims != field_.dims:
        raise VolumeError(f"volume grid {v.dims} does not match field grid {field_.dims}")


def warp_labels(labels: LabelVolume, field_: DeformationField) -> LabelVolume:
    """Nearest-neighbor pull-back; outside the grid becomes background 0."""
    _require_field_grid(labels, field_)
    cx, cy, cz = field_.source_coords
    out = _pull_nearest(labels.data, cx, cy, cz, border=0)
    return LabelVolume(out, labels.label_table, labels.spacing, labels.affine)


def warp_volume(v: Volume | ProbVolume, field_: DeformationField) -> Volume | ProbVolume:
    """Trilinear pull-back; probability volumes stay within [0, 1]."""
    _require_field_grid(v, field_)
    cx, cy, cz = field_.source_coords
    out = _pull_trilinear(v.data, cx, cy, cz, border=0.0)
    if isinstance(v, ProbVolume):
        return ProbVolume(np.clip(out, 0.0, 1.0), v.spacing, v.affine)
    return Volume(out, v.spacing, v.affine)
