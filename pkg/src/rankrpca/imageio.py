"""Grayscale PGM input/output and the built-in test image."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

BUILTIN_IMAGES = ("cameraman",)


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 PGM with maxval 255 as a float64 array in [0, 255]."""
    with Image.open(path) as im:
        if im.format not in ("PPM", "PGM") or im.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit grayscale PGM, got {im.format} {im.mode}")
        return np.asarray(im, dtype=np.float64)


def write_pgm(path, img: np.ndarray) -> None:
    """Write `img` as binary P5, clipped to [0, 255] and rounded."""
    arr = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="L").save(path, format="PPM")


def builtin_image(name: str) -> np.ndarray:
    """256 x 256 cameraman: scikit-image's 512 x 512 copy averaged over 2 x 2 blocks."""
    if name != "cameraman":
        raise ValueError(f"no built-in image {name!r}; pass a PGM path instead")
    try:
        from skimage import data
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ValueError("the built-in cameraman needs scikit-image; pass a PGM path") from exc
    img = data.camera().astype(np.float64)
    h, w = img.shape
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def load_image(source: str) -> np.ndarray:
    if source in BUILTIN_IMAGES:
        return builtin_image(source)
    return read_pgm(source)
