"""Block matching, triangulation and the depth-error protocol.

Disparities come from SAD block matching on a row-aligned pair with
left-right consistency and parabolic sub-pixel refinement. Depth follows
``z = f * baseline / d`` and point clouds are lifted through the left VPC
intrinsics. Errors are measured along each pixel's ray against the known
target plane, on a seeded random subset of at most 1000 points.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .camera_models import PinholeIntrinsics
from .errors import (
    BadParamsError,
    DimensionMismatchError,
    EmptyAfterFilterError,
    UnderdeterminedError,
)

__all__ = [
    "DisparityMap",
    "DepthMap",
    "PointCloud",
    "Plane",
    "DepthErrorReport",
    "compute_disparity",
    "disparity_to_depth",
    "reconstruct_pointcloud",
    "evaluate_depth_error",
    "fit_error_curve",
    "write_ply",
    "read_ply",
    "CSV_HEADER",
    "ReportWriter",
]

# SAD margin per window pixel below which two disparities tie
_TIE_PER_PIXEL = 1e-6

CSV_HEADER = ("distance_baselines", "model", "texture", "rms_m", "stddev_m",
              "variance_m2", "n_points", "seed")


@dataclass(frozen=True, eq=False)
class DisparityMap:
    """Per-pixel disparity in pixels, NaN where invalid."""

    disparity: np.ndarray
    max_disparity: int

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.disparity)

    @property
    def shape(self) -> tuple[int, int]:
        return self.disparity.shape


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth (z) in metres, NaN where invalid."""

    depth: np.ndarray

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.depth)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """3-D points in the left VPC frame (metres) and the pixels they came from."""

    points: np.ndarray
    pixels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.size and not (pts[:, 2] > 0).all():
            raise ValueError("every point must lie in front of the camera (z > 0)")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Plane:
    """Infinite plane through ``point`` with unit ``normal``."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=np.float64).reshape(3))
        object.__setattr__(self, "normal", n / np.linalg.norm(n))

    @classmethod
    def from_target(cls, target, pose=None) -> "Plane":
        """Plane of a :class:`~vpcstereo.scene_sim.PlanarTarget`, optionally expressed
        in the frame of a camera at ``pose``."""
        if pose is None:
            return cls(target.center, target.normal)
        return cls(pose.to_camera(target.center), target.normal @ pose.rotation)

    @property
    def distance(self) -> float:
        """Distance from the frame origin to the plane."""
        return float(abs(np.dot(self.point, self.normal)))

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.point) @ self.normal


@dataclass(frozen=True)
class DepthErrorReport:
    distance_baselines: float
    rms_m: float
    stddev_m: float
    variance_m2: float
    n_points: int
    seed: int


# ---------------------------------------------------------------------------
# block matching


def _box_sum(a: np.ndarray, r: int) -> np.ndarray:
    """Sum over (2r+1)^2 windows along the last two axes; NaN where the window
    leaves the array."""
    h, w = a.shape[-2:]
    k = 2 * r + 1
    c = np.zeros(a.shape[:-2] + (h + 1, w + 1))
    c[..., 1:, 1:] = a.cumsum(-2).cumsum(-1)
    s = c[..., k:, k:] - c[..., :-k, k:] - c[..., k:, :-k] + c[..., :-k, :-k]
    out = np.full(a.shape, np.nan)
    out[..., r:h - r, r:w - r] = s
    return out


def _cost_volume(left, right, left_mask, right_mask, r, max_d):
    h, w = left.shape
    D = max_d + 1
    diff = np.full((D, h, w), np.nan)
    bad = np.ones((D, h, w))
    for d in range(D):
        diff[d, :, d:] = np.abs(left[:, d:] - right[:, :w - d])
        bad[d, :, d:] = ~(left_mask[:, d:] & right_mask[:, :w - d])
    diff = np.where(bad > 0, 0.0, diff)
    cost = _box_sum(diff, r)
    touched = _box_sum(bad, r)
    return np.where(touched == 0, cost, np.inf)


def _best(cost: np.ndarray, uniqueness: float, tie: float):
    """Winner-take-all over axis 0 with a uniqueness test; returns (d, c_best, ok).

    Costs closer than ``tie`` count as equal, so resampling round-off on flat
    patches cannot produce a winner.
    """
    D = cost.shape[0]
    best = np.argmin(cost, axis=0)
    c0 = np.take_along_axis(cost, best[None], 0)[0]
    d_idx = np.arange(D)[:, None, None]
    far = np.abs(d_idx - best[None]) > 1
    second = np.min(np.where(far, cost, np.inf), axis=0)
    ok = np.isfinite(c0) & ~(second <= uniqueness * c0 + tie)
    return best, c0, ok


def compute_disparity(left, right, left_mask=None, right_mask=None, *, block_size: int = 9,
                      max_disparity: int = 64, uniqueness: float = 1.05,
                      lr_tolerance: float = 1.0,
                      texture_threshold: float = 0.03,
                      subpixel: str = "parabola") -> DisparityMap:
    """SAD block matching on a rectified pair.

    A left pixel at column x is compared with right pixels at x - d for
    d in [0, max_disparity]. Windows touching a masked-out pixel or the image
    border are not evaluated. Matches fail when another disparity (more than
    one step away) costs no more than ``uniqueness`` times the best, or when
    the right-to-left match disagrees by more than ``lr_tolerance``, or when
    the left window's mean absolute horizontal gradient is below
    ``texture_threshold`` (flat patches and horizontal edges carry no
    disparity information).

    Sub-pixel offsets come from fitting the best cost and its two neighbours
    with a ``"parabola"`` or, optionally, a symmetric V (``"equiangular"``).
    """
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.ndim != 2 or left.shape != right.shape:
        raise DimensionMismatchError(f"image shapes differ: {left.shape} vs {right.shape}")
    if block_size < 3 or block_size % 2 == 0:
        raise BadParamsError("block_size must be an odd integer >= 3")
    if max_disparity < 1 or max_disparity >= left.shape[1]:
        raise BadParamsError("max_disparity must be in [1, width)")
    if uniqueness < 1.0:
        raise BadParamsError("uniqueness ratio must be >= 1")
    if subpixel not in ("equiangular", "parabola"):
        raise BadParamsError(f"unknown subpixel method {subpixel!r}")
    if texture_threshold < 0:
        raise BadParamsError("texture_threshold must be non-negative")
    lm = np.ones(left.shape, bool) if left_mask is None else np.asarray(left_mask, bool)
    rm = np.ones(left.shape, bool) if right_mask is None else np.asarray(right_mask, bool)
    if lm.shape != left.shape or rm.shape != left.shape:
        raise DimensionMismatchError("masks must match the image shape")

    h, w = left.shape
    r = block_size // 2
    tie = _TIE_PER_PIXEL * block_size * block_size
    cost = _cost_volume(left, right, lm, rm, r, max_disparity)
    best, c0, ok = _best(cost, uniqueness, tie)
    grad = np.zeros_like(left)
    grad[:, 1:-1] = 0.5 * np.abs(left[:, 2:] - left[:, :-2])
    with np.errstate(invalid="ignore"):
        ok &= _box_sum(grad, r) >= texture_threshold * block_size * block_size

    # sub-pixel refinement where both neighbours were evaluated
    lo = np.take_along_axis(cost, np.maximum(best - 1, 0)[None], 0)[0]
    hi = np.take_along_axis(cost, np.minimum(best + 1, max_disparity)[None], 0)[0]
    inner = (best > 0) & (best < max_disparity) & np.isfinite(lo) & np.isfinite(hi)
    with np.errstate(invalid="ignore", divide="ignore"):
        if subpixel == "parabola":
            denom = lo - 2 * c0 + hi
        else:
            denom = np.maximum(lo, hi) - c0
        delta = np.where(inner & (denom > 0), (lo - hi) / (2 * denom), 0.0)
    disp = best + np.clip(delta, -0.5, 0.5)

    # right-view costs: right pixel x pairs with left pixel x + d
    cost_r = np.full_like(cost, np.inf)
    for d in range(max_disparity + 1):
        cost_r[d, :, :w - d] = cost[d, :, d:]
    best_r, _, ok_r = _best(cost_r, uniqueness, tie)
    cols = np.arange(w)[None, :] - np.round(disp).astype(np.intp)
    inside = (cols >= 0) & ok
    cols_c = np.clip(cols, 0, w - 1)
    rows = np.arange(h)[:, None]
    d_r = np.where(ok_r[rows, cols_c], best_r[rows, cols_c], -10)
    consistent = inside & (np.abs(disp - d_r) <= lr_tolerance)

    return DisparityMap(np.where(ok & consistent, disp, np.nan), max_disparity)


# ---------------------------------------------------------------------------
# triangulation


def disparity_to_depth(disparity: DisparityMap | np.ndarray, focal: float, baseline: float,
                       d_min: float = 0.1) -> DepthMap:
    """``z = focal * baseline / d``; disparities at or below ``d_min`` are invalid."""
    if focal <= 0 or baseline <= 0:
        raise BadParamsError("focal length and baseline must be positive")
    d = disparity.disparity if isinstance(disparity, DisparityMap) else np.asarray(disparity, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        good = np.isfinite(d) & (d > d_min)
        z = np.where(good, focal * baseline / np.where(good, d, 1.0), np.nan)
    return DepthMap(z)


def reconstruct_pointcloud(depth: DepthMap | np.ndarray, intrinsics: PinholeIntrinsics) -> PointCloud:
    z = depth.depth if isinstance(depth, DepthMap) else np.asarray(depth, float)
    rows, cols = np.nonzero(np.isfinite(z) & (z > 0))
    zz = z[rows, cols]
    pts = np.stack([(cols - intrinsics.cx) * zz / intrinsics.fx,
                    (rows - intrinsics.cy) * zz / intrinsics.fy,
                    zz], axis=-1)
    return PointCloud(pts, np.stack([cols, rows], axis=-1).astype(np.float64))


# ---------------------------------------------------------------------------
# error protocol


def evaluate_depth_error(cloud: PointCloud | np.ndarray, target_plane: Plane,
                         vicinity: float | None = None, seed: int = 0, *,
                         baseline: float | None = None, n_samples: int = 1000) -> DepthErrorReport:
    """Depth error statistics of a reconstructed plane.

    Points farther than ``vicinity`` from the plane are dropped (default: 20%
    of the plane's distance), then ``min(n_samples, remaining)`` points are
    drawn without replacement using ``numpy.random.default_rng(seed)``
    (PCG64). Each residual is the point's depth minus the depth at which its
    ray meets the plane. ``stddev_m`` is the population standard deviation
    and ``variance_m2`` its square.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float).reshape(-1, 3)
    if vicinity is None:
        vicinity = 0.2 * target_plane.distance
    near = np.abs(target_plane.signed_distance(pts)) <= vicinity
    pts = pts[near]
    if len(pts) == 0:
        raise EmptyAfterFilterError("no points within the vicinity of the target plane")
    rng = np.random.default_rng(seed)
    n = min(n_samples, len(pts))
    pts = pts[rng.choice(len(pts), size=n, replace=False)]

    n_vec = target_plane.normal
    expected_scale = np.dot(target_plane.point, n_vec) / (pts @ n_vec)
    residual = pts[:, 2] - expected_scale * pts[:, 2]
    rms = float(np.sqrt(np.mean(residual**2)))
    std = float(np.std(residual))
    dist = target_plane.distance / baseline if baseline else math.nan
    return DepthErrorReport(dist, rms, std, std * std, int(n), int(seed))


def fit_error_curve(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares quadratic ``rms ~ c0 + c1 x + c2 x^2``."""
    data = np.asarray(list(points), dtype=np.float64).reshape(-1, 2)
    x, y = data[:, 0], data[:, 1]
    if len(np.unique(x)) < 3:
        raise UnderdeterminedError("need at least three distinct distances for a quadratic fit")
    A = np.stack([np.ones_like(x), x, x * x], axis=-1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return (float(coef[0]), float(coef[1]), float(coef[2]))


# ---------------------------------------------------------------------------
# files


def write_ply(path: str | Path, cloud: PointCloud | np.ndarray) -> None:
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float).reshape(-1, 3)
    with open(path, "w", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\nend_header\n")
        for x, y, z in pts:
            fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def read_ply(path: str | Path) -> np.ndarray:
    """Read the vertex list of an ASCII PLY written by :func:`write_ply`."""
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n = None
        for line in fh:
            line = line.strip()
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            if line == "end_header":
                break
        if n is None:
            raise ValueError(f"{path}: missing vertex count")
        rows = [fh.readline().split() for _ in range(n)]
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


class ReportWriter:
    """Serialised CSV appender for depth-error rows.

    The header is written when the file is new or empty. ``write`` is safe to
    call from several threads.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, "w", newline="") as fh:
                csv.writer(fh).writerow(CSV_HEADER)

    def write(self, model: str, texture: str, report: DepthErrorReport | None = None, *,
              distance_baselines: float | None = None, seed: int | None = None) -> None:
        if report is not None:
            row: Sequence = (repr(report.distance_baselines), model, texture, repr(report.rms_m),
                             repr(report.stddev_m), repr(report.variance_m2), report.n_points,
                             report.seed)
        else:
            row = (repr(float(distance_baselines)) if distance_baselines is not None else "",
                   model, texture, "", "", "", "", "" if seed is None else seed)
        with self._lock, open(self.path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)
