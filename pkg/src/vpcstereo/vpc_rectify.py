"""Virtual pinhole cameras carved out of fisheye images.

A virtual pinhole camera (VPC) shares the optical centre of a fisheye camera
and differs from it only by a rotation ``R`` (VPC frame to fisheye frame).
Each VPC pixel maps to a fisheye pixel through

    fisheye_pixel = model.project(R @ vpc.intrinsics.back_project(vpc_pixel))

Evaluating that chain once and storing the source coordinates gives a
:class:`RemapTable` that can be reused for every frame.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera_models import CameraModel, PinholeIntrinsics
from .errors import DimensionMismatchError, FovExceededError, LutFormatError

__all__ = [
    "rot_x",
    "rot_y",
    "rot_z",
    "RigidTransform",
    "VpcSpec",
    "RemapTable",
    "StereoRig",
    "vpc_source_coords",
    "build_lut",
    "bilinear_sample",
    "remap",
    "remap_direct",
    "rectified_rotation",
    "make_stereo_vpcs",
    "save_lut",
    "load_lut",
    "LUT_MAGIC",
]

LUT_MAGIC = b"VPCLUT1"
_HEADER = struct.Struct("<7sII")


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    """Rotation about +y; positive angles turn +z towards +x."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _check_rotation(R, name: str = "rotation") -> np.ndarray:
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.isfinite(R).all():
        raise ValueError(f"{name} must be a finite 3x3 matrix")
    if not np.allclose(R.T @ R, np.eye(3), rtol=0, atol=1e-9):
        raise ValueError(f"{name} is not orthonormal")
    if np.linalg.det(R) <= 0:
        raise ValueError(f"{name} must have determinant +1")
    R = R.copy()
    R.flags.writeable = False
    return R


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Pose of a camera in the world frame.

    ``rotation`` maps camera-frame directions to world directions and
    ``translation`` is the camera centre in world coordinates (metres).
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not np.isfinite(t).all():
            raise ValueError("translation must be finite")
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    def to_world(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def to_camera(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation


@dataclass(frozen=True, eq=False)
class VpcSpec:
    """A virtual pinhole camera: intrinsics plus rotation into the fisheye frame."""

    intrinsics: PinholeIntrinsics
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", _check_rotation(self.rotation))

    @classmethod
    def from_fov(cls, fov: float, width: int, height: int, rotation=None) -> "VpcSpec":
        """VPC with square pixels whose horizontal field of view is ``fov`` radians."""
        intr = PinholeIntrinsics.from_fov(fov, width, height)
        return cls(intr, np.eye(3) if rotation is None else rotation)

    @property
    def width(self) -> int:
        return int(self.intrinsics.width)

    @property
    def height(self) -> int:
        return int(self.intrinsics.height)

    def rays(self, rows: slice = slice(None)) -> np.ndarray:
        """Back-projected pixel rays (z = 1 before rotation) in the fisheye frame."""
        grid = self.intrinsics.pixel_grid()[rows]
        return self.intrinsics.back_project(grid) @ self.rotation.T


@dataclass(eq=False)
class RemapTable:
    """Per-pixel fisheye source coordinates of a VPC image.

    ``map_u`` and ``map_v`` are float32 arrays of shape ``(height, width)``;
    NaN marks pixels whose ray leaves the fisheye field of view or image.
    ``source_shape`` is the ``(height, width)`` of the fisheye image when known;
    it is not persisted by :func:`save_lut`.
    """

    map_u: np.ndarray
    map_v: np.ndarray
    source_shape: tuple[int, int] | None = None

    def __post_init__(self):
        self.map_u = np.ascontiguousarray(self.map_u, dtype=np.float32)
        self.map_v = np.ascontiguousarray(self.map_v, dtype=np.float32)
        if self.map_u.ndim != 2 or self.map_u.shape != self.map_v.shape:
            raise ValueError("map_u and map_v must be 2-D arrays of equal shape")
        if self.map_u.size == 0:
            raise ValueError("empty remap table")
        nan_u = np.isnan(self.map_u)
        if not np.array_equal(nan_u, np.isnan(self.map_v)):
            raise ValueError("invalid entries must be NaN in both maps")
        if np.isinf(self.map_u).any() or np.isinf(self.map_v).any():
            raise ValueError("remap entries must be finite or NaN")
        for a in (self.map_u, self.map_v):
            a.flags.writeable = False

    @property
    def width(self) -> int:
        return self.map_u.shape[1]

    @property
    def height(self) -> int:
        return self.map_u.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.map_u)

    @property
    def entries(self) -> np.ndarray:
        """Row-major ``(height * width, 2)`` view of the (u, v) source coordinates."""
        return np.stack([self.map_u, self.map_v], axis=-1).reshape(-1, 2)

    def __eq__(self, other):
        if not isinstance(other, RemapTable):
            return NotImplemented
        return (
            self.map_u.shape == other.map_u.shape
            and self.map_u.tobytes() == other.map_u.tobytes()
            and self.map_v.tobytes() == other.map_v.tobytes()
        )


_BORDER_TOL = 1e-9


def vpc_source_coords(vpc: VpcSpec, model: CameraModel, rows: slice = slice(None)) -> np.ndarray:
    """Fisheye source coordinates of a block of VPC rows, float32, NaN if unusable.

    Coordinates whose bilinear footprint would leave the fisheye image are
    marked invalid as well.
    """
    lim = np.array([model.width - 1, model.height - 1], dtype=np.float64)
    with np.errstate(invalid="ignore"):
        q = model.project(vpc.rays(rows), check=False)
        inside = ((q >= -_BORDER_TOL) & (q <= lim + _BORDER_TOL)).all(axis=-1)
    # round-off just past the border snaps back onto it
    q = np.clip(q, 0.0, lim)
    q[~inside] = np.nan
    return q.astype(np.float32)


def build_lut(vpc: VpcSpec, model: CameraModel, *, workers: int = 1,
              block_rows: int = 16) -> RemapTable:
    """Precompute the VPC-to-fisheye lookup table.

    Rows are processed in blocks, optionally on a thread pool; every block is
    computed independently so the result does not depend on the schedule.
    """
    if block_rows < 1:
        raise ValueError("block_rows must be positive")
    out = np.empty((vpc.height, vpc.width, 2), dtype=np.float32)
    blocks = [slice(r, min(r + block_rows, vpc.height)) for r in range(0, vpc.height, block_rows)]

    def fill(rows):
        out[rows] = vpc_source_coords(vpc, model, rows)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for rows in blocks:
            fill(rows)
    return RemapTable(out[..., 0], out[..., 1], source_shape=(model.height, model.width))


def bilinear_sample(image: np.ndarray, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear samples of ``image`` at continuous (u, v); returns (values, valid).

    A sample is valid only when all four neighbours exist, i.e. when
    ``0 <= u <= width - 1`` and ``0 <= v <= height - 1``. Invalid samples are 0.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        valid = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uu = np.where(valid, u, 0.0)
    vv = np.where(valid, v, 0.0)
    # the last column/row is reached with weight 1 on the left/top cell
    x0 = np.minimum(np.floor(uu).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(vv).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = uu - x0
    ay = vv - y0
    top = (1 - ax) * img[y0, x0] + ax * img[y0, x1]
    bot = (1 - ax) * img[y1, x0] + ax * img[y1, x1]
    out = (1 - ay) * top + ay * bot
    return np.where(valid, out, 0.0), valid


def _check_source(src: np.ndarray, shape: tuple[int, int] | None):
    if src.ndim != 2:
        raise DimensionMismatchError(f"expected a single-channel image, got shape {src.shape}")
    if shape is not None and tuple(src.shape) != tuple(shape):
        raise DimensionMismatchError(f"source image is {src.shape[::-1]} (w, h) but the table "
                                     f"was built for {tuple(shape)[::-1]}")


def remap(src, lut: RemapTable) -> np.ndarray:
    """Resample a fisheye image through a lookup table; invalid pixels are 0.

    The validity mask of the output is ``lut.valid``.
    """
    src = np.asarray(src, dtype=np.float64)
    _check_source(src, lut.source_shape)
    valid = lut.valid
    if valid.any():
        h, w = src.shape
        if (np.nanmax(lut.map_u) > w - 1) or (np.nanmax(lut.map_v) > h - 1):
            raise DimensionMismatchError("lookup table points outside the source image")
    out, _ = bilinear_sample(src, lut.map_u, lut.map_v)
    return out


def remap_direct(src, vpc: VpcSpec, model: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Rectify without a table: evaluate the projection chain row by row.

    Source coordinates are rounded to float32, the precision a stored table
    keeps, so the result matches :func:`remap` bit for bit.
    """
    src = np.asarray(src, dtype=np.float64)
    _check_source(src, (model.height, model.width))
    out = np.zeros((vpc.height, vpc.width))
    mask = np.zeros((vpc.height, vpc.width), dtype=bool)
    for r in range(vpc.height):
        q = vpc_source_coords(vpc, model, slice(r, r + 1))[0]
        out[r], mask[r] = bilinear_sample(src, q[:, 0], q[:, 1])
    return out, mask


# ---------------------------------------------------------------------------
# stereo pairs


@dataclass(frozen=True, eq=False)
class StereoRig:
    """Two fisheye cameras with known poses in a common world frame."""

    left_model: CameraModel
    right_model: CameraModel
    left_pose: RigidTransform
    right_pose: RigidTransform
    vertical: np.ndarray | None = None

    def __post_init__(self):
        if self.baseline <= 0:
            raise ValueError("camera centres coincide; baseline must be positive")
        if self.vertical is not None:
            v = np.asarray(self.vertical, dtype=np.float64).reshape(3)
            if not np.isfinite(v).all() or np.linalg.norm(v) == 0:
                raise ValueError("vertical axis must be a finite non-zero vector")
            object.__setattr__(self, "vertical", v / np.linalg.norm(v))

    @property
    def baseline_vector(self) -> np.ndarray:
        return self.right_pose.translation - self.left_pose.translation

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.baseline_vector))

    @property
    def vertical_axis(self) -> np.ndarray:
        """World direction of the rig's image-down axis.

        Defaults to the mean of the two cameras' y axes.
        """
        if self.vertical is not None:
            return self.vertical
        v = self.left_pose.rotation[:, 1] + self.right_pose.rotation[:, 1]
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("camera y axes cancel; pass an explicit vertical axis")
        return v / n

    @classmethod
    def divergent(cls, left_model: CameraModel, right_model: CameraModel | None = None, *,
                  baseline: float = 0.20, divergence: float = math.pi / 2) -> "StereoRig":
        """Symmetric rig: centres at ``(-+baseline/2, 0, 0)``, optical axes turned
        outwards by ``divergence / 2`` each about the world y axis.
        """
        right_model = left_model if right_model is None else right_model
        half = divergence / 2.0
        left = RigidTransform(rot_y(-half), [-baseline / 2.0, 0.0, 0.0])
        right = RigidTransform(rot_y(half), [baseline / 2.0, 0.0, 0.0])
        return cls(left_model, right_model, left, right)


def rectified_rotation(rig: StereoRig) -> np.ndarray:
    """World orientation shared by both rectified VPCs (columns: x, y, z axes).

    x follows the baseline, y is the rig vertical made orthogonal to it and
    z completes a right-handed frame.
    """
    x = rig.baseline_vector / rig.baseline
    vert = rig.vertical_axis
    y = vert - np.dot(vert, x) * x
    n = np.linalg.norm(y)
    if n < 1e-9:
        raise ValueError("baseline is parallel to the vertical axis; row alignment is undefined")
    y /= n
    z = np.cross(x, y)
    return np.column_stack([x, y, z])


def _check_vpc_fits(vpc: VpcSpec, model: CameraModel, side: str):
    h, w = vpc.height, vpc.width
    border = np.concatenate([
        np.stack([np.arange(w), np.zeros(w)], -1),
        np.stack([np.arange(w), np.full(w, h - 1)], -1),
        np.stack([np.zeros(h), np.arange(h)], -1),
        np.stack([np.full(h, w - 1), np.arange(h)], -1),
    ]).astype(np.float64)
    rays = vpc.intrinsics.back_project(border) @ vpc.rotation.T
    theta = np.arctan2(np.hypot(rays[:, 0], rays[:, 1]), rays[:, 2])
    if theta.max() > model.half_fov:
        raise FovExceededError(
            f"{side} VPC reaches {math.degrees(theta.max()):.2f} deg off the fisheye axis, "
            f"beyond its {math.degrees(model.half_fov):.2f} deg half field of view"
        )


def make_stereo_vpcs(rig: StereoRig, vpc_fov: float,
                     vpc_resolution: tuple[int, int]) -> tuple[VpcSpec, VpcSpec]:
    """Two VPCs forming a rectified, parallel-axis pair over the rig.

    ``vpc_resolution`` is ``(width, height)``. Both VPCs get identical
    intrinsics and the world orientation from :func:`rectified_rotation`.
    """
    width, height = vpc_resolution
    intr = PinholeIntrinsics.from_fov(vpc_fov, width, height)
    world = rectified_rotation(rig)
    left = VpcSpec(intr, rig.left_pose.rotation.T @ world)
    right = VpcSpec(intr, rig.right_pose.rotation.T @ world)
    _check_vpc_fits(left, rig.left_model, "left")
    _check_vpc_fits(right, rig.right_model, "right")
    return left, right


# ---------------------------------------------------------------------------
# LUT files


def save_lut(lut: RemapTable, path: str | Path) -> None:
    """Write ``VPCLUT1`` + u32 width + u32 height + (f32 u, f32 v) records, little-endian."""
    body = np.stack([lut.map_u, lut.map_v], axis=-1).astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(LUT_MAGIC, lut.width, lut.height))
        fh.write(body.tobytes())


def load_lut(path: str | Path, source_shape: tuple[int, int] | None = None) -> RemapTable:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise LutFormatError(f"{path}: truncated header")
    magic, width, height = _HEADER.unpack_from(data)
    if magic != LUT_MAGIC:
        raise LutFormatError(f"{path}: bad magic {magic!r}")
    if width == 0 or height == 0:
        raise LutFormatError(f"{path}: empty table")
    expected = _HEADER.size + width * height * 8
    if len(data) != expected:
        raise LutFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    body = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(height, width, 2)
    try:
        return RemapTable(body[..., 0].astype(np.float32), body[..., 1].astype(np.float32),
                          source_shape=source_shape)
    except ValueError as exc:
        raise LutFormatError(f"{path}: {exc}") from exc
