"""Forward and inverse projection for pinhole and fisheye camera models.

Conventions
-----------
Camera frame: x right, y down, z along the optical axis. Pixel coordinates
``(u, v)`` are continuous with pixel centres on whole numbers; ``u`` runs along
image columns and ``v`` along rows.

Rays and pixels are plain ``numpy`` arrays of shape ``(..., 3)`` and
``(..., 2)``. Every model exposes the same two vectorised methods:

``project(points, check=True)``
    camera-frame points to pixels. With ``check=False`` rays that cannot be
    projected come back as NaN instead of raising.

``unproject(pixels, check=True)``
    pixels to unit-norm rays, NaN for pixels outside the valid region when
    ``check=False``.

The incidence angle is measured from +z; rays beyond the model's half field
of view are rejected, never clamped. The boundary itself is inside.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from .errors import ModelFileError, NoConvergenceError, OutOfFovError, OutOfImageError

__all__ = [
    "PinholeIntrinsics",
    "CameraModel",
    "PinholeModel",
    "KannalaBrandtModel",
    "MeiModel",
    "ScaramuzzaModel",
    "AtanModel",
    "ScaramuzzaSolution",
    "incidence_angle",
    "project",
    "unproject",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
]

_MAX_ITER = 50
_STEP_TOL = 1e-12
_SCARAMUZZA_TOL = 1e-9
# round-off allowance when a pixel sits exactly on the field-of-view edge
_EDGE_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.shape[-1:] != (3,):
        raise ValueError(f"expected points of shape (..., 3), got {p.shape}")
    return p


def _as_pixels(pixels) -> np.ndarray:
    q = np.asarray(pixels, dtype=np.float64)
    if q.shape[-1:] != (2,):
        raise ValueError(f"expected pixels of shape (..., 2), got {q.shape}")
    return q


def incidence_angle(ray) -> np.ndarray | float:
    """Angle between a ray and the +z optical axis, in ``[0, pi]``.

    >>> round(float(incidence_angle([1.0, 0.0, 0.0])), 12)
    1.570796326795
    """
    p = _as_points(ray)
    theta = np.arctan2(np.hypot(p[..., 0], p[..., 1]), p[..., 2])
    return float(theta) if theta.ndim == 0 else theta


def _radial_direction(p: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit direction of (x, y) and its length; zero direction on the axis."""
    r = np.hypot(p[..., 0], p[..., 1])
    safe = np.where(r > 0, r, 1.0)
    cx = np.where(r > 0, p[..., 0] / safe, 0.0)
    cy = np.where(r > 0, p[..., 1] / safe, 0.0)
    return cx, cy, r


def _ray_from_angle(theta: np.ndarray, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Unit ray with incidence ``theta`` whose (x, y) part points along (dx, dy)."""
    rho = np.hypot(dx, dy)
    safe = np.where(rho > 0, rho, 1.0)
    s = np.sin(theta)
    x = np.where(rho > 0, s * dx / safe, 0.0)
    y = np.where(rho > 0, s * dy / safe, 0.0)
    return np.stack([x, y, np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class PinholeIntrinsics:
    """Focal lengths and principal point in pixels plus the raster size."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("intrinsics must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError("width and height must be integers")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("width and height must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, fov: float, width: int, height: int) -> "PinholeIntrinsics":
        """Square-pixel intrinsics whose horizontal field of view is ``fov`` radians.

        The principal point sits at ``(width / 2, height / 2)``.
        """
        if not 0 < fov < math.pi:
            raise ValueError("pinhole field of view must be in (0, pi)")
        f = (width / 2.0) / math.tan(fov / 2.0)
        return cls(f, f, width / 2.0, height / 2.0, int(width), int(height))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        """``(height, width)`` in numpy order."""
        return (int(self.height), int(self.width))

    def normalized(self, pixels) -> tuple[np.ndarray, np.ndarray]:
        q = _as_pixels(pixels)
        return (q[..., 0] - self.cx) / self.fx, (q[..., 1] - self.cy) / self.fy

    def denormalized(self, mx, my) -> np.ndarray:
        return np.stack([self.fx * mx + self.cx, self.fy * my + self.cy], axis=-1)

    def back_project(self, pixels, depth=1.0) -> np.ndarray:
        """Lift pixels to camera-frame points at the given z (not normalised)."""
        mx, my = self.normalized(pixels)
        z = np.broadcast_to(np.asarray(depth, dtype=np.float64), mx.shape)
        return np.stack([mx * z, my * z, z], axis=-1)

    def pixel_grid(self) -> np.ndarray:
        """All pixel centres as an ``(height, width, 2)`` array of (u, v)."""
        v, u = np.mgrid[0:self.height, 0:self.width].astype(np.float64)
        return np.stack([u, v], axis=-1)


class CameraModel(ABC):
    """Common interface of every projection model.

    Subclasses are frozen dataclasses carrying ``intrinsics`` and a full field
    of view ``fov`` in radians, and implement ``_project`` / ``_unproject`` on
    already-validated arrays.
    """

    kind: ClassVar[str]
    intrinsics: PinholeIntrinsics
    fov: float

    @property
    def half_fov(self) -> float:
        return self.fov / 2.0

    @property
    def width(self) -> int:
        return int(self.intrinsics.width)

    @property
    def height(self) -> int:
        return int(self.intrinsics.height)

    def _check_fov(self):
        if not (math.isfinite(self.fov) and 0 < self.fov <= 2 * math.pi):
            raise ValueError("fov must be in (0, 2*pi]")

    def _domain(self, p: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Extra model-specific validity of unit rays (besides the FOV test)."""
        return np.ones(theta.shape, dtype=bool)

    @abstractmethod
    def _project(self, p: np.ndarray, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map unit rays to pixels; returns (pixels, converged)."""

    @abstractmethod
    def _unproject(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map pixels to unit rays; returns (rays, valid)."""

    def project(self, points, *, check: bool = True) -> np.ndarray:
        p = _as_points(points)
        norm = np.linalg.norm(p, axis=-1)
        nonzero = norm > 0
        if check and not nonzero.all():
            raise ValueError("cannot project the zero vector")
        unit = p / np.where(nonzero, norm, 1.0)[..., None]
        theta = np.arctan2(np.hypot(unit[..., 0], unit[..., 1]), unit[..., 2])
        in_fov = nonzero & (theta <= self.half_fov) & self._domain(unit, theta)
        if check and not in_fov.all():
            worst = float(np.max(np.where(in_fov, 0.0, theta)))
            raise OutOfFovError(
                f"{self.kind}: ray at incidence {math.degrees(worst):.3f} deg is outside "
                f"the {math.degrees(self.fov):.1f} deg field of view"
            )
        # dummy on-axis rays keep the solvers away from garbage input
        safe = np.where(in_fov[..., None], unit, np.array([0.0, 0.0, 1.0]))
        pix, converged = self._project(safe, np.where(in_fov, theta, 0.0))
        ok = in_fov & converged & np.isfinite(pix).all(axis=-1)
        if check and not ok.all():
            raise NoConvergenceError(f"{self.kind}: projection solver failed to converge")
        return np.where(ok[..., None], pix, np.nan)

    def unproject(self, pixels, *, check: bool = True) -> np.ndarray:
        q = _as_pixels(pixels)
        rays, ok = self._unproject(q)
        ok = ok & np.isfinite(rays).all(axis=-1)
        if check and not ok.all():
            raise OutOfImageError(f"{self.kind}: pixel outside the valid projection region")
        return np.where(ok[..., None], rays, np.nan)

    def to_dict(self) -> dict[str, Any]:
        return model_to_dict(self)


@dataclass(frozen=True)
class PinholeModel(CameraModel):
    intrinsics: PinholeIntrinsics
    fov: float = math.pi

    kind: ClassVar[str] = "pinhole"

    def __post_init__(self):
        self._check_fov()
        if self.fov > math.pi:
            raise ValueError("a pinhole camera cannot see beyond 180 degrees")

    def _domain(self, p, theta):
        return p[..., 2] > 0

    def _project(self, p, theta):
        z = p[..., 2]
        return self.intrinsics.denormalized(p[..., 0] / z, p[..., 1] / z), z > 0

    def _unproject(self, q):
        mx, my = self.intrinsics.normalized(q)
        ray = np.stack([mx, my, np.ones_like(mx)], axis=-1)
        ray /= np.linalg.norm(ray, axis=-1, keepdims=True)
        theta = np.arccos(np.clip(ray[..., 2], -1.0, 1.0))
        return ray, theta <= self.half_fov + _EDGE_TOL


@dataclass(frozen=True)
class AtanModel(CameraModel):
    """Ideal equidistant fisheye: the radial offset is ``f * theta``.

    The sign of each pixel offset follows the sign of the matching ray
    component, so the map is a bijection inside the field of view.
    """

    intrinsics: PinholeIntrinsics
    fov: float = math.pi

    kind: ClassVar[str] = "atan"

    def __post_init__(self):
        self._check_fov()

    def _project(self, p, theta):
        dx, dy, _ = _radial_direction(p)
        return self.intrinsics.denormalized(theta * dx, theta * dy), np.ones(theta.shape, bool)

    def _unproject(self, q):
        mx, my = self.intrinsics.normalized(q)
        theta = np.hypot(mx, my)
        return _ray_from_angle(theta, mx, my), theta <= self.half_fov + _EDGE_TOL


@dataclass(frozen=True)
class KannalaBrandtModel(CameraModel):
    """Odd-polynomial radial law ``rho = k1 t + k2 t^3 + k3 t^5 + k4 t^7 + k5 t^9``.

    ``rho`` is in normalised units and scaled by ``fx``/``fy``. Construction
    fails unless ``rho`` is strictly increasing over the declared field of view.
    """

    intrinsics: PinholeIntrinsics
    fov: float
    k1: float = 1.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0

    kind: ClassVar[str] = "kannala_brandt"

    def __post_init__(self):
        self._check_fov()
        if not all(math.isfinite(c) for c in self.coefficients):
            raise ValueError("Kannala-Brandt coefficients must be finite")
        theta = np.append(np.arange(0.0, self.half_fov, 1e-3), self.half_fov)
        if np.any(np.diff(self.radius(theta)) <= 0):
            raise ValueError("Kannala-Brandt radial law is not increasing over the field of view")

    @property
    def coefficients(self) -> tuple[float, float, float, float, float]:
        return (self.k1, self.k2, self.k3, self.k4, self.k5)

    def radius(self, theta):
        t = np.asarray(theta, dtype=np.float64)
        t2 = t * t
        return t * (self.k1 + t2 * (self.k2 + t2 * (self.k3 + t2 * (self.k4 + t2 * self.k5))))

    def _radius_derivative(self, t):
        t2 = t * t
        return self.k1 + t2 * (3 * self.k2 + t2 * (5 * self.k3 + t2 * (7 * self.k4 + t2 * 9 * self.k5)))

    def _project(self, p, theta):
        dx, dy, _ = _radial_direction(p)
        rho = self.radius(theta)
        return self.intrinsics.denormalized(rho * dx, rho * dy), np.ones(theta.shape, bool)

    def solve_theta(self, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Invert the radial law by Newton's method; returns (theta, converged)."""
        rho = np.asarray(rho, dtype=np.float64)
        theta = np.clip(rho / self.k1, 0.0, self.half_fov)
        step = np.full(rho.shape, np.inf)
        for _ in range(_MAX_ITER):
            step = (self.radius(theta) - rho) / self._radius_derivative(theta)
            theta = theta - step
            if np.all(np.abs(step) < _STEP_TOL):
                break
        return theta, np.abs(step) < _STEP_TOL

    def _unproject(self, q):
        mx, my = self.intrinsics.normalized(q)
        rho = np.hypot(mx, my)
        # beyond the image circle the polynomial need not be invertible
        inside = rho <= self.radius(self.half_fov) * (1 + _EDGE_TOL)
        theta, converged = self.solve_theta(np.where(inside, rho, 0.0))
        ok = inside & converged & (theta >= 0) & (theta <= self.half_fov + _EDGE_TOL)
        return _ray_from_angle(theta, mx, my), ok


@dataclass(frozen=True)
class MeiModel(CameraModel):
    """Unified sphere model with radial (k1, k2) and tangential (p1, p2) terms.

    A ray is normalised onto the unit sphere, re-projected from a centre
    shifted by ``xi`` along the axis, distorted, then scaled by the intrinsics.
    The radial factor is ``k1 r^2 + k2 r^4`` with ``r^2 = X_u^2 + Y_u^2``.
    """

    intrinsics: PinholeIntrinsics
    fov: float
    xi: float
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    kind: ClassVar[str] = "mei"

    def __post_init__(self):
        self._check_fov()
        if not all(math.isfinite(c) for c in (self.xi, self.k1, self.k2, self.p1, self.p2)):
            raise ValueError("Mei parameters must be finite")
        if self.xi < 0:
            raise ValueError("xi must be non-negative")

    def _domain(self, p, theta):
        return p[..., 2] + self.xi > 0

    def distortion(self, xu, yu) -> tuple[np.ndarray, np.ndarray]:
        """Distortion offset ``m_d`` for undistorted normalised coordinates."""
        r2 = xu * xu + yu * yu
        rad = self.k1 * r2 + self.k2 * r2 * r2
        dx = xu * rad + 2 * self.p1 * xu * yu + self.p2 * (r2 + 2 * xu * xu)
        dy = yu * rad + 2 * self.p2 * xu * yu + self.p1 * (r2 + 2 * yu * yu)
        return dx, dy

    def _project(self, p, theta):
        denom = p[..., 2] + self.xi
        xu = p[..., 0] / denom
        yu = p[..., 1] / denom
        dx, dy = self.distortion(xu, yu)
        return self.intrinsics.denormalized(xu + dx, yu + dy), np.ones(theta.shape, bool)

    def undistort(self, xd, yd) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fixed-point removal of the distortion; returns (x_u, y_u, converged)."""
        xd = np.asarray(xd, dtype=np.float64)
        yd = np.asarray(yd, dtype=np.float64)
        xu, yu = xd.copy(), yd.copy()
        step = np.full(xd.shape, np.inf)
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            for _ in range(_MAX_ITER):
                r2 = xu * xu + yu * yu
                scale = 1.0 + self.k1 * r2 + self.k2 * r2 * r2
                tx = 2 * self.p1 * xu * yu + self.p2 * (r2 + 2 * xu * xu)
                ty = 2 * self.p2 * xu * yu + self.p1 * (r2 + 2 * yu * yu)
                nx = (xd - tx) / scale
                ny = (yd - ty) / scale
                step = np.hypot(nx - xu, ny - yu)
                xu, yu = nx, ny
                if np.all(step < _STEP_TOL):
                    break
        converged = step < _STEP_TOL
        if not converged.all():
            # strong radial terms make the fixed-point map expansive near the rim
            bad = ~converged
            nx, ny, ok = self._undistort_newton(xd[bad], yd[bad])
            xu, yu = xu.copy(), yu.copy()
            xu[bad], yu[bad] = nx, ny
            converged = converged.copy()
            converged[bad] = ok
        return xu, yu, converged

    def _undistort_newton(self, xd, yd):
        xu, yu = xd.copy(), yd.copy()
        step = np.full(xd.shape, np.inf)
        k1, k2, p1, p2 = self.k1, self.k2, self.p1, self.p2
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            for _ in range(_MAX_ITER):
                r2 = xu * xu + yu * yu
                rad = k1 * r2 + k2 * r2 * r2
                drad = k1 + 2 * k2 * r2  # d(rad)/d(r2)
                dx, dy = self.distortion(xu, yu)
                ex = xu + dx - xd
                ey = yu + dy - yd
                # Jacobian of m_u + m_d with respect to (x_u, y_u)
                j11 = 1 + rad + 2 * xu * xu * drad + 2 * p1 * yu + 6 * p2 * xu
                j12 = 2 * xu * yu * drad + 2 * p1 * xu + 2 * p2 * yu
                j21 = 2 * xu * yu * drad + 2 * p2 * yu + 2 * p1 * xu
                j22 = 1 + rad + 2 * yu * yu * drad + 2 * p2 * xu + 6 * p1 * yu
                det = j11 * j22 - j12 * j21
                sx = (j22 * ex - j12 * ey) / det
                sy = (j11 * ey - j21 * ex) / det
                xu, yu = xu - sx, yu - sy
                step = np.hypot(sx, sy)
                if np.all(step < _STEP_TOL):
                    break
        return xu, yu, step < _STEP_TOL

    def lift(self, xu, yu) -> tuple[np.ndarray, np.ndarray]:
        """Lift undistorted normalised coordinates onto the unit sphere."""
        r2 = xu * xu + yu * yu
        disc = 1.0 + (1.0 - self.xi * self.xi) * r2
        with np.errstate(invalid="ignore"):
            lam = (self.xi + np.sqrt(disc)) / (1.0 + r2)
        ray = np.stack([lam * xu, lam * yu, lam - self.xi], axis=-1)
        return ray, disc >= 0

    def _unproject(self, q):
        mx, my = self.intrinsics.normalized(q)
        xu, yu, converged = self.undistort(mx, my)
        ray, liftable = self.lift(xu, yu)
        with np.errstate(invalid="ignore"):
            theta = np.arctan2(np.hypot(ray[..., 0], ray[..., 1]), ray[..., 2])
            ok = converged & liftable & (theta <= self.half_fov + _EDGE_TOL) & (ray[..., 2] + self.xi > 0)
        return ray, ok


@dataclass(frozen=True)
class ScaramuzzaSolution:
    """Per-ray diagnostics of the Scaramuzza forward solver."""

    rho: np.ndarray
    iterations: np.ndarray
    bisected: np.ndarray
    residual: np.ndarray
    converged: np.ndarray


@dataclass(frozen=True)
class ScaramuzzaModel(CameraModel):
    """Polynomial back-projection ``(u', v', a0 + a1 r + a2 r^2 + a3 r^3 + a4 r^4)``.

    ``u', v'`` are pixel offsets from the principal point and ``r`` their
    length, so the focal scale lives inside the polynomial and
    ``intrinsics.fx == intrinsics.fy == 1``. A negative ``a0`` flips the
    polynomial so that the optical axis is always +z.

    Forward projection finds the image radius ``rho`` solving
    ``g(rho) = f(rho) * rho_c - z_c * rho = 0`` with Newton's method seeded
    from an equidistant guess, and falls back to bisection whenever Newton
    leaves ``[0, 1.5 * image_radius]`` or stalls.
    """

    intrinsics: PinholeIntrinsics
    fov: float
    a0: float
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0
    max_iter: int = field(default=_MAX_ITER, compare=False)

    kind: ClassVar[str] = "scaramuzza"

    def __post_init__(self):
        self._check_fov()
        if not all(math.isfinite(c) for c in self.coefficients):
            raise ValueError("Scaramuzza coefficients must be finite")
        if self.a0 == 0:
            raise ValueError("a0 must be non-zero")
        if self.intrinsics.fx != 1.0 or self.intrinsics.fy != 1.0:
            raise ValueError("Scaramuzza intrinsics carry fx = fy = 1")
        if not math.isfinite(self.image_radius):
            raise ValueError("the polynomial never reaches the declared field of view")

    @property
    def coefficients(self) -> tuple[float, float, float, float, float]:
        return (self.a0, self.a1, self.a2, self.a3, self.a4)

    @cached_property
    def _poly(self) -> np.ndarray:
        return math.copysign(1.0, self.a0) * np.array(self.coefficients)

    def f(self, rho):
        """The (sign-normalised) polynomial ``f(rho)``."""
        c = self._poly
        r = np.asarray(rho, dtype=np.float64)
        return c[0] + r * (c[1] + r * (c[2] + r * (c[3] + r * c[4])))

    def df(self, rho):
        c = self._poly
        r = np.asarray(rho, dtype=np.float64)
        return c[1] + r * (2 * c[2] + r * (3 * c[3] + r * 4 * c[4]))

    def ray_angle(self, rho):
        """Incidence angle of the back-projected ray at image radius ``rho``."""
        return np.arctan2(rho, self.f(rho))

    @cached_property
    def image_radius(self) -> float:
        """Radius of the image circle: the first radius reaching the half FOV."""
        limit = 4.0 * math.hypot(self.width, self.height)
        rho = np.linspace(0.0, limit, int(limit * 4) + 2)
        above = np.nonzero(self.ray_angle(rho) >= self.half_fov)[0]
        if above.size == 0:
            return math.inf
        hi = float(rho[above[0]])
        lo = float(rho[above[0] - 1]) if above[0] > 0 else 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.ray_angle(mid) >= self.half_fov:
                hi = mid
            else:
                lo = mid
        return lo

    def solve_rho(self, rays) -> ScaramuzzaSolution:
        """Solve for the image radius of (unit-normalised) in-FOV rays."""
        p = _as_points(rays)
        p = p / np.linalg.norm(p, axis=-1, keepdims=True)
        rc = np.hypot(p[..., 0], p[..., 1])
        z = p[..., 2]
        theta = np.arctan2(rc, z)

        R = self.image_radius
        hi_bound = 1.5 * R

        def g(r):
            return self.f(r) * rc - z * r

        rho = R * theta / self.half_fov
        iters = np.zeros(rc.shape, dtype=np.int64)
        active = np.ones(rc.shape, dtype=bool)
        failed = np.zeros(rc.shape, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for _ in range(self.max_iter):
                active &= ~(np.abs(g(rho)) < _SCARAMUZZA_TOL)
                if not active.any():
                    break
                new = rho - g(rho) / (self.df(rho) * rc - z)
                left = active & (~np.isfinite(new) | (new < 0) | (new > hi_bound))
                failed |= left
                active &= ~left
                rho = np.where(active, new, rho)
                iters += active
            failed |= active

        bisected = failed & (rc > 0)
        if bisected.any():
            rho = rho.copy()
            rho[bisected] = self._bisect(rc[bisected], z[bisected])
        residual = np.abs(g(rho))
        converged = (residual < _SCARAMUZZA_TOL) | (rc == 0)
        rho = np.where(rc == 0, 0.0, rho)
        return ScaramuzzaSolution(rho, iters, bisected, residual, converged)

    def _bisect(self, rc: np.ndarray, z: np.ndarray) -> np.ndarray:
        R = self.image_radius

        def g(r):
            return self.f(r) * rc - z * r

        lo = np.zeros_like(rc)
        hi = np.full_like(rc, 1.5 * R)
        # g(R) < 0 for every in-FOV ray, so R always brackets the root
        hi = np.where(g(hi) < 0, hi, R)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if np.all(np.abs(gm) < _SCARAMUZZA_TOL):
                return mid
            pos = gm > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
        return 0.5 * (lo + hi)

    def _project(self, p, theta):
        sol = self.solve_rho(p)
        dx, dy, _ = _radial_direction(p)
        pix = self.intrinsics.denormalized(sol.rho * dx, sol.rho * dy)
        return pix, sol.converged

    def _unproject(self, q):
        du = q[..., 0] - self.intrinsics.cx
        dv = q[..., 1] - self.intrinsics.cy
        rho = np.hypot(du, dv)
        fz = self.f(rho)
        ray = np.stack([du, dv, fz], axis=-1)
        ray /= np.linalg.norm(ray, axis=-1, keepdims=True)
        theta = np.arctan2(rho, fz)
        ok = (rho <= self.image_radius) & (theta <= self.half_fov + _EDGE_TOL)
        return ray, ok


def project(model: CameraModel, ray, *, check: bool = True) -> np.ndarray:
    """Functional alias of ``model.project``."""
    return model.project(ray, check=check)


def unproject(model: CameraModel, pixel, *, check: bool = True) -> np.ndarray:
    """Functional alias of ``model.unproject``."""
    return model.unproject(pixel, check=check)


# ---------------------------------------------------------------------------
# camera-parameter documents

_PARAM_KEYS = {
    "pinhole": (),
    "atan": (),
    "kannala_brandt": ("k1", "k2", "k3", "k4", "k5"),
    "mei": ("xi", "k1", "k2", "p1", "p2"),
    "scaramuzza": ("a0", "a1", "a2", "a3", "a4"),
}
_REQUIRED_PARAMS = {"mei": ("xi",), "scaramuzza": ("a0",)}
_TOP_KEYS = {"model", "width", "height", "fx", "fy", "cx", "cy", "fov_deg", "params"}


def _number(doc: dict, key: str, where: str) -> float:
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ModelFileError(f"{where}{key} must be a number, got {val!r}")
    if not math.isfinite(val):
        raise ModelFileError(f"{where}{key} must be finite")
    return float(val)


def model_from_dict(doc: dict[str, Any]) -> CameraModel:
    """Build a camera model from a parameter document.

    Raises ModelFileError on unknown keys, missing keys, or invalid values.
    """
    if not isinstance(doc, dict):
        raise ModelFileError("camera-parameter document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ModelFileError(f"unknown keys: {sorted(unknown)}")
    kind = doc.get("model")
    if kind not in _PARAM_KEYS:
        raise ModelFileError(f"unknown model {kind!r}; expected one of {sorted(_PARAM_KEYS)}")

    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ModelFileError("params must be an object")
    bad = set(params) - set(_PARAM_KEYS[kind])
    if bad:
        raise ModelFileError(f"unknown {kind} params: {sorted(bad)}")
    for key in _REQUIRED_PARAMS.get(kind, ()):
        if key not in params:
            raise ModelFileError(f"{kind} requires params.{key}")
    coeffs = {k: _number(params, k, "params.") for k in params}

    needed = ["width", "height", "cx", "cy"]
    if kind != "scaramuzza":
        needed += ["fx", "fy"]
    if kind != "pinhole":
        needed.append("fov_deg")
    missing = [k for k in needed if k not in doc]
    if missing:
        raise ModelFileError(f"missing keys: {missing}")
    for k in ("width", "height"):
        if isinstance(doc[k], bool) or not isinstance(doc[k], int):
            raise ModelFileError(f"{k} must be an integer")

    fx = _number(doc, "fx", "") if "fx" in doc else 1.0
    fy = _number(doc, "fy", "") if "fy" in doc else 1.0
    try:
        intr = PinholeIntrinsics(fx, fy, _number(doc, "cx", ""), _number(doc, "cy", ""),
                                 doc["width"], doc["height"])
        kwargs: dict[str, Any] = {"intrinsics": intr}
        if "fov_deg" in doc:
            kwargs["fov"] = math.radians(_number(doc, "fov_deg", ""))
        if kind == "pinhole":
            return PinholeModel(**kwargs)
        if kind == "atan":
            return AtanModel(**kwargs)
        if kind == "kannala_brandt":
            return KannalaBrandtModel(**kwargs, **coeffs)
        if kind == "mei":
            return MeiModel(**kwargs, **coeffs)
        return ScaramuzzaModel(**kwargs, **coeffs)
    except ValueError as exc:
        raise ModelFileError(str(exc)) from exc


def model_to_dict(model: CameraModel) -> dict[str, Any]:
    intr = model.intrinsics
    doc: dict[str, Any] = {
        "model": model.kind,
        "width": int(intr.width),
        "height": int(intr.height),
    }
    if model.kind != "scaramuzza":
        doc["fx"] = intr.fx
        doc["fy"] = intr.fy
    doc["cx"] = intr.cx
    doc["cy"] = intr.cy
    doc["fov_deg"] = math.degrees(model.fov)
    doc["params"] = {k: getattr(model, k) for k in _PARAM_KEYS[model.kind]}
    return doc


def load_model(path: str | Path) -> CameraModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON ({exc})") from exc
    return model_from_dict(doc)


def save_model(model: CameraModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
