"""Low-level raster operations on single-channel images.

Images are 2-D float64 numpy arrays of shape (height, width) with values in
[0, 1]. Every function returns a new array and never mutates its inputs.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image

from .errors import InvalidParameter


def as_image(data) -> np.ndarray:
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise InvalidParameter(f"expected a non-empty 2-D raster, got shape {img.shape}")
    return img


def kernel_size_for(sigma: float) -> int:
    """Smallest odd integer >= 6*sigma + 1."""
    size = math.ceil(6.0 * sigma + 1.0 - 1e-12)
    return size if size % 2 == 1 else size + 1


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise InvalidParameter(f"sigma must be positive, got {sigma}")
    size = kernel_size_for(sigma)
    half = size // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    ii, jj = np.meshgrid(ax, ax, indexing="ij")
    w = np.exp(-(ii**2 + jj**2) / (2.0 * sigma**2))
    return w / w.sum()


def _separable_factors(kernel: np.ndarray):
    u, s, vt = np.linalg.svd(kernel)
    if s[0] == 0 or (len(s) > 1 and s[1] > 1e-12 * s[0]):
        return None
    col = u[:, 0] * math.sqrt(s[0])
    row = vt[0] * math.sqrt(s[0])
    return col, row


def _conv_rows(padded: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    # true convolution along one axis of an already padded array
    n = len(taps)
    win = sliding_window_view(padded, n, axis=axis)
    return win @ taps[::-1]


def convolve2d(image, kernel) -> np.ndarray:
    """2-D convolution with edge replication; output clamped to [0, 1].

    Rank-1 kernels (every Gaussian) are applied as two 1-D passes.
    """
    img = as_image(image)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise InvalidParameter(f"kernel must be square with odd size, got {k.shape}")
    size = k.shape[0]
    if size > min(img.shape):
        raise InvalidParameter(f"kernel size {size} exceeds image dimensions {img.shape}")
    half = size // 2
    padded = np.pad(img, half, mode="edge")

    factors = _separable_factors(k)
    if factors is not None:
        col, row = factors
        tmp = _conv_rows(padded, row, axis=1)
        out = _conv_rows(tmp, col, axis=0)
    else:
        win = sliding_window_view(padded, (size, size))
        out = np.einsum("hwij,ij->hw", win, k[::-1, ::-1])
    return np.clip(out, 0.0, 1.0)


def add_gaussian_noise(image, sigma: float, seed: int) -> np.ndarray:
    img = as_image(image)
    if sigma < 0:
        raise InvalidParameter(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=img.shape)
    return np.clip(img + noise, 0.0, 1.0)


def sample_bilinear(image, xs, ys) -> np.ndarray:
    """Bilinear samples at fractional (x, y); coordinates clamped to the raster."""
    img = as_image(image)
    h, w = img.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _nearest_index(pos: np.ndarray, n: int) -> np.ndarray:
    return np.clip(np.floor(pos + 0.5).astype(np.intp), 0, n - 1)


def resample(image, scale: float, method: str = "nearest") -> np.ndarray:
    """Downsample by `scale`: out(x', y') = in(scale*x', scale*y')."""
    img = as_image(image)
    if scale < 1:
        raise InvalidParameter(f"scale must be >= 1, got {scale}")
    h, w = img.shape
    oh, ow = math.floor(h / scale), math.floor(w / scale)
    if oh < 1 or ow < 1:
        raise InvalidParameter(f"scale {scale} collapses a {w}x{h} image")
    xs = scale * np.arange(ow, dtype=np.float64)
    ys = scale * np.arange(oh, dtype=np.float64)
    if method == "nearest":
        return img[np.ix_(_nearest_index(ys, h), _nearest_index(xs, w))].copy()
    if method == "bilinear":
        gx, gy = np.meshgrid(xs, ys)
        return sample_bilinear(img, gx, gy)
    raise InvalidParameter(f"unknown resampling method {method!r}")


def upsample_to(image, width: int, height: int, method: str = "nearest") -> np.ndarray:
    """Resample to exact target dimensions using pixel-area alignment."""
    img = as_image(image)
    if width < 1 or height < 1:
        raise InvalidParameter(f"target dimensions must be positive, got {width}x{height}")
    h, w = img.shape
    if (h, w) == (height, width):
        return img.copy()
    if method == "nearest":
        iy = np.minimum((np.arange(height) * h) // height, h - 1)
        ix = np.minimum((np.arange(width) * w) // width, w - 1)
        return img[np.ix_(iy, ix)].copy()
    if method == "bilinear":
        xs = (np.arange(width) + 0.5) * (w / width) - 0.5
        ys = (np.arange(height) + 0.5) * (h / height) - 0.5
        gx, gy = np.meshgrid(xs, ys)
        return sample_bilinear(img, gx, gy)
    raise InvalidParameter(f"unknown resampling method {method!r}")


def composite(base, patch, mask, offset=(0, 0)) -> np.ndarray:
    """Copy `patch` into `base` at (x, y) `offset` wherever `mask` is set."""
    base = as_image(base)
    patch = as_image(patch)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != patch.shape:
        raise InvalidParameter(f"mask shape {mask.shape} != patch shape {patch.shape}")
    x, y = offset
    ph, pw = patch.shape
    if x < 0 or y < 0 or y + ph > base.shape[0] or x + pw > base.shape[1]:
        raise InvalidParameter(f"patch {pw}x{ph} at {offset} falls outside base {base.shape[::-1]}")
    out = base.copy()
    region = out[y : y + ph, x : x + pw]
    region[mask] = patch[mask]
    return out


def load_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG or PGM; v -> v/255."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def to_uint8(image) -> np.ndarray:
    return np.round(np.clip(as_image(image), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(image, path) -> None:
    """Write an 8-bit grayscale PNG (or binary PGM for a .pgm suffix)."""
    path = Path(path)
    Image.fromarray(to_uint8(image), mode="L").save(path)


def load_labels(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8).copy()


def save_labels(labels, path) -> None:
    Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="L").save(Path(path))
