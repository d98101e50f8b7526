"""Image buffers, regions and image<->tensor conversions.

Tensors are plain float64 numpy arrays of shape (channels, height, width).
Pixel values live in [0, 255] throughout; masks are float64 arrays of
shape (height, width) holding 0.0 (hole) or 1.0 (known).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

# Greyscale conversion weights for 8-bit RGB.
GREY_WEIGHTS = (0.212, 0.7154, 0.0721)


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit RGB image, pixels stored as a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.uint8)
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixel array, got {p.shape}")
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class RegionSpec:
    """Rectangular hole (omega) plus a surrounding band of known pixels (psi).

    omega is (x, y, w, h) in image coordinates; psi_band is the band width in
    pixels. The union of omega and the band must fit inside the image.
    """

    omega: tuple[int, int, int, int]
    psi_band: int
    image_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        x, y, w, h = self.omega
        iw, ih = self.image_size
        if w <= 0 or h <= 0:
            raise ValueError("omega must have positive extent")
        if self.psi_band < 0:
            raise ValueError("psi_band must be >= 0")
        if x < 0 or y < 0 or x + w > iw or y + h > ih:
            raise ValueError("omega not inside image")
        b = self.psi_band
        if x - b < 0 or y - b < 0 or x + w + b > iw or y + h + b > ih:
            raise ValueError("omega plus psi band not inside image")

    def omega_mask(self) -> np.ndarray:
        """Boolean (H, W) array, True inside omega."""
        x, y, w, h = self.omega
        iw, ih = self.image_size
        m = np.zeros((ih, iw), dtype=bool)
        m[y : y + h, x : x + w] = True
        return m

    def known_mask(self) -> np.ndarray:
        """Float (H, W) mask: 0.0 inside omega, 1.0 everywhere else."""
        return (~self.omega_mask()).astype(np.float64)

    def phi_mask(self) -> np.ndarray:
        """Boolean (H, W) array, True on the source region (outside omega+psi)."""
        x, y, w, h = self.omega
        b = self.psi_band
        iw, ih = self.image_size
        m = np.ones((ih, iw), dtype=bool)
        m[max(0, y - b) : y + h + b, max(0, x - b) : x + w + b] = False
        return m


def image_to_tensor(img: ImageBuffer) -> np.ndarray:
    """(H, W, 3) uint8 image -> (3, H, W) float64 tensor in [0, 255]."""
    return img.pixels.astype(np.float64).transpose(2, 0, 1).copy()


def tensor_to_image(t: np.ndarray) -> ImageBuffer:
    """Clamp to [0, 255], round half away from zero, pack as 8-bit RGB."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 3 or t.shape[0] != 3:
        raise ValueError(f"expected a 3-channel tensor, got shape {t.shape}")
    clamped = np.clip(t, 0.0, 255.0)
    rounded = np.floor(clamped + 0.5)  # half away from zero; values are >= 0 here
    return ImageBuffer(rounded.transpose(1, 2, 0).astype(np.uint8))


def fill_with_channel_means(t: np.ndarray, region: RegionSpec,
                            source_mask: np.ndarray) -> np.ndarray:
    """Replace omega pixels with the per-channel mean over the source region."""
    source_mask = np.asarray(source_mask, dtype=bool)
    n = int(source_mask.sum())
    if n == 0:
        raise ValueError("source region is empty")
    out = t.copy()
    hole = region.omega_mask()
    for c in range(t.shape[0]):
        out[c][hole] = t[c][source_mask].mean()
    return out


def to_greyscale_region(t: np.ndarray, region: RegionSpec) -> np.ndarray:
    """Convert pixels inside omega to grey; everything else is untouched."""
    if t.shape[0] != 3:
        raise ValueError(f"expected a 3-channel tensor, got shape {t.shape}")
    out = t.copy()
    hole = region.omega_mask()
    wr, wg, wb = GREY_WEIGHTS
    grey = wr * t[0][hole] + wg * t[1][hole] + wb * t[2][hole]
    for c in range(3):
        out[c][hole] = grey
    return out


def read_png(path) -> ImageBuffer:
    img = Image.open(path).convert("RGB")
    return ImageBuffer(np.asarray(img, dtype=np.uint8))


def write_png(img: ImageBuffer, path) -> None:
    Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")


def read_mask_png(path) -> np.ndarray:
    """Greyscale or RGB mask PNG -> boolean hole mask (True = hole)."""
    img = Image.open(path).convert("L")
    return np.asarray(img, dtype=np.uint8) >= 128
