"""PNG input/output for single-channel floating-point images in [0, 1]."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

_LUMA = np.array([0.299, 0.587, 0.114])


def load_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB(A) PNG as float64 in [0, 1].

    Colour images are reduced to luma ``0.299 R + 0.587 G + 0.114 B``.
    """
    with Image.open(path) as im:
        if im.mode in ("L", "P", "1"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        elif im.mode in ("RGB", "RGBA"):
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) @ _LUMA
        elif im.mode in ("I;16", "I"):
            raise ValueError(f"{path}: only 8-bit images are supported")
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) @ _LUMA
    return arr / 255.0


def to_uint8(image) -> np.ndarray:
    img = np.nan_to_num(np.asarray(image, dtype=np.float64), nan=0.0)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path: str | Path, image) -> None:
    """Write an 8-bit grayscale PNG with fixed encoder settings (reproducible bytes)."""
    Image.fromarray(to_uint8(image), mode="L").save(path, format="PNG", optimize=False,
                                                    compress_level=6)


def save_mask(path: str | Path, mask) -> None:
    save_image(path, np.asarray(mask, dtype=bool).astype(np.float64))


def load_mask(path: str | Path) -> np.ndarray:
    return load_image(path) >= 0.5
