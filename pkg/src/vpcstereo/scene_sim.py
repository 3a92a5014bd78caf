"""Analytic ray-cast renderer for a textured plane, and image comparison.

Any :class:`~vpcstereo.camera_models.CameraModel` can render the scene: each
pixel's back-projected ray is intersected with the target plane and the
texture is sampled bilinearly at the hit point. Because the value depends on
the ray alone, renders through different models agree wherever their rays
coincide, which makes the renderer an exact oracle for rectification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera_models import CameraModel
from .errors import DimensionMismatchError, EmptyMaskError
from .vpc_rectify import RigidTransform, bilinear_sample

__all__ = [
    "TEXTURES",
    "checkerboard_texture",
    "noise_texture",
    "radial_texture",
    "make_texture",
    "PlanarTarget",
    "Scene",
    "render_view",
    "image_difference",
]


def checkerboard_texture(size: int = 512, squares: int = 8) -> np.ndarray:
    idx = (np.arange(size) * squares) // size
    return ((idx[:, None] + idx[None, :]) % 2).astype(np.float64)


def noise_texture(size: int = 512, seed: int = 0, cutoff: float = 24.0) -> np.ndarray:
    """Gaussian white noise low-passed to about ``cutoff`` cycles per texture width.

    Rescaled to mean 0.5, standard deviation 0.18 and clipped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((size, size))
    k = np.fft.fftfreq(size) * size
    kk = k[:, None] ** 2 + k[None, :] ** 2
    smooth = np.fft.ifft2(np.fft.fft2(white) * np.exp(-kk / cutoff**2)).real
    smooth = (smooth - smooth.mean()) / smooth.std()
    return np.clip(0.5 + 0.18 * smooth, 0.0, 1.0)


def radial_texture(size: int = 512, period: float = 40.0) -> np.ndarray:
    """Concentric sinusoid ``0.5 + 0.5 cos(2 pi r / period)``, r in texels from the centre."""
    c = (size - 1) / 2.0
    y, x = np.mgrid[0:size, 0:size]
    r = np.hypot(x - c, y - c)
    return 0.5 + 0.5 * np.cos(2 * np.pi * r / period)


TEXTURES = {
    "checkerboard": checkerboard_texture,
    "noise": noise_texture,
    "radial": radial_texture,
}


def make_texture(name: str, size: int = 512, seed: int = 0) -> np.ndarray:
    if name not in TEXTURES:
        raise ValueError(f"unknown texture {name!r}; expected one of {sorted(TEXTURES)}")
    if name == "noise":
        return noise_texture(size, seed=seed)
    return TEXTURES[name](size)


@dataclass(frozen=True, eq=False)
class PlanarTarget:
    """A textured rectangle in the world frame.

    ``normal`` faces the cameras. The texture's columns run along ``u_axis``
    and its rows along ``cross(u_axis, normal)``; the rectangle spans
    ``[-half_width, half_width] x [-half_height, half_height]`` around
    ``center``.
    """

    center: np.ndarray
    normal: np.ndarray
    half_width: float
    half_height: float
    texture: np.ndarray
    u_axis: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if not (np.isfinite(c).all() and np.isfinite(n).all()):
            raise ValueError("plane centre and normal must be finite")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("target extent must be positive")
        tex = np.asarray(self.texture, dtype=np.float64)
        if tex.ndim != 2 or min(tex.shape) < 2:
            raise ValueError("texture must be a 2-D image of at least 2x2 texels")
        hint = np.array([1.0, 0.0, 0.0]) if self.u_axis is None else np.asarray(self.u_axis, float)
        u = hint - np.dot(hint, n) * n
        if np.linalg.norm(u) < 1e-9:
            u = np.array([0.0, 1.0, 0.0]) - n[1] * n
        u /= np.linalg.norm(u)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "texture", tex)
        object.__setattr__(self, "u_axis", u)

    @classmethod
    def fronto_parallel(cls, distance: float, half_extent: float, texture) -> "PlanarTarget":
        """Square target centred on the +z axis at ``distance``, facing the origin."""
        return cls(np.array([0.0, 0.0, distance]), np.array([0.0, 0.0, -1.0]),
                   half_extent, half_extent, texture)

    @property
    def v_axis(self) -> np.ndarray:
        return np.cross(self.u_axis, self.normal)

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) @ self.normal

    def intersect(self, origin, directions) -> tuple[np.ndarray, np.ndarray]:
        """Ray parameter ``s`` of each hit and a mask of rays hitting the plane in front."""
        d = np.asarray(directions, dtype=np.float64)
        o = np.asarray(origin, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = ((self.center - o) @ self.normal) / (d @ self.normal)
            hit = np.isfinite(s) & (s > 0)
        return s, hit

    def sample(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Texture value at plane points and whether they fall on the rectangle."""
        rel = np.asarray(points, dtype=np.float64) - self.center
        a = rel @ self.u_axis
        b = rel @ self.v_axis
        th, tw = self.texture.shape
        tx = (a / self.half_width + 1.0) * 0.5 * (tw - 1)
        ty = (b / self.half_height + 1.0) * 0.5 * (th - 1)
        return bilinear_sample(self.texture, tx, ty)


@dataclass(frozen=True, eq=False)
class Scene:
    target: PlanarTarget
    background: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.background <= 1.0:
            raise ValueError("background must be in [0, 1]")


def render_view(scene: Scene, model: CameraModel, pose: RigidTransform | None = None,
                *, supersample: int = 1) -> np.ndarray:
    """Render the scene through ``model`` placed at ``pose``.

    Pixels whose ray misses the target show the background; pixels outside
    the model's field of view are 0. ``supersample`` averages an s x s grid
    of rays per pixel.
    """
    pose = RigidTransform() if pose is None else pose
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    h, w = model.height, model.width
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    offsets = (np.arange(supersample) + 0.5) / supersample - 0.5
    acc = np.zeros((h, w))
    for dv in offsets:
        for du in offsets:
            rays = model.unproject(np.stack([u + du, v + dv], axis=-1), check=False)
            in_fov = np.isfinite(rays).all(axis=-1)
            dirs = np.where(in_fov[..., None], rays, 0.0) @ pose.rotation.T
            s, hit = scene.target.intersect(pose.translation, dirs)
            hit &= in_fov
            pts = pose.translation + np.where(hit, s, 0.0)[..., None] * dirs
            tex, on_target = scene.target.sample(pts)
            value = np.where(hit & on_target, tex, scene.background)
            acc += np.where(in_fov, value, 0.0)
    return acc / supersample**2


def image_difference(a, b, mask=None) -> float:
    """Mean absolute difference of two images over the masked-in pixels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise DimensionMismatchError(f"mask shape {mask.shape} does not match {a.shape}")
    if not mask.any():
        raise EmptyMaskError("mask selects no pixels")
    return float(np.mean(np.abs(a[mask] - b[mask])))
