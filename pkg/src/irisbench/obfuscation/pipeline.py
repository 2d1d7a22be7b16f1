"""Glint-preserving obfuscation of the iris region of an eye image."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import InvalidParameter, SegmentationFailure
from ..imagecore import add_gaussian_noise, composite, convolve2d, gaussian_kernel, resample, upsample_to
from ..segmentation import IRIS, IrisAnnulus, detect_glints, fit_annulus
from .polar import swap_iris, unwrap_clean, wrap
from .style import DEFAULT_STEP, STYLE_STRIP, get_extractor, style_transfer


@dataclass(frozen=True)
class Prepared:
    """Per-sample preprocessing shared by every method."""

    annulus: IrisAnnulus
    glints: np.ndarray
    iris: np.ndarray  # bool, iris-class pixels
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)

    def crop(self, arr):
        x0, y0, x1, y1 = self.box
        return arr[y0:y1, x0:x1]


def prepare(sample) -> Prepared:
    annulus = fit_annulus(sample.mask)
    if not annulus.inside(sample.mask.shape):
        raise SegmentationFailure("fitted iris circle leaves the image")
    glints = detect_glints(sample.image, sample.mask)
    iris = np.asarray(sample.mask) == IRIS
    ys, xs = np.nonzero(iris)
    box = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    return Prepared(annulus, glints, iris, box)


@dataclass(frozen=True)
class NoObfuscation:
    name = "baseline"

    @property
    def param(self):
        return "NA"


@dataclass(frozen=True)
class Blur:
    sigma: float
    name = "blur"

    @property
    def param(self):
        return f"sigma={self.sigma:g}"


@dataclass(frozen=True)
class Noise:
    sigma: float
    seed: int = 0
    name = "noise"

    @property
    def param(self):
        return f"sigma={self.sigma:g}"


@dataclass(frozen=True)
class Downsample:
    scale: float
    name = "downsample"

    @property
    def param(self):
        return f"s={self.scale:g}"


@dataclass(frozen=True, eq=False)
class RubberSheet:
    donor: object
    donor_prep: Prepared | None = None
    name = "rubber_sheet"

    @property
    def param(self):
        return "NA"


@dataclass(frozen=True, eq=False)
class StyleTransfer:
    donor: object
    iterations: int = 200
    content_weight: float = 1.0
    style_weight: float = 1.0
    step_size: float = DEFAULT_STEP
    extractor_seed: int = 0
    donor_prep: Prepared | None = None
    name = "style_transfer"

    @property
    def param(self):
        return f"e={self.iterations}"


ObfuscationMethod = Union[NoObfuscation, Blur, Noise, Downsample, RubberSheet, StyleTransfer]


def _donor_prep(method) -> Prepared:
    return method.donor_prep if method.donor_prep is not None else prepare(method.donor)


def stylize_iris(image, annulus, donor_image, donor_annulus, iterations, content_weight=1.0,
                 style_weight=1.0, step_size=DEFAULT_STEP, extractor_seed=0, glints=None,
                 donor_glints=None) -> np.ndarray:
    """Style-transfer in the normalized strip domain and paint the change back.

    Glints are interpolated out of both strips first so their highlights do
    not enter the style statistics. Only the stylization delta is wrapped
    onto the annulus, so an unchanged strip leaves the image bit-identical.
    """
    victim = unwrap_clean(image, annulus, glints, *STYLE_STRIP)
    donor = unwrap_clean(donor_image, donor_annulus, donor_glints, *STYLE_STRIP)
    out = style_transfer(victim, donor, iterations, content_weight, style_weight, step_size,
                         extractor=get_extractor(extractor_seed))
    delta = out - victim
    if not delta.any():
        return np.array(image, dtype=np.float64, copy=True)
    painted = wrap(delta, annulus, np.zeros_like(image, dtype=np.float64))
    return np.clip(image + painted, 0.0, 1.0)


def apply_method(image, prep: Prepared, method) -> np.ndarray:
    """Run one method on a prepared sample and composite it back (steps 3-5)."""
    image = np.asarray(image, dtype=np.float64)
    patch = prep.crop(image)
    if isinstance(method, NoObfuscation):
        return image.copy()
    if isinstance(method, Blur):
        new = convolve2d(patch, gaussian_kernel(method.sigma))
    elif isinstance(method, Noise):
        new = add_gaussian_noise(patch, method.sigma, method.seed)
    elif isinstance(method, Downsample):
        h, w = patch.shape
        new = upsample_to(resample(patch, method.scale, "nearest"), w, h, "nearest")
    elif isinstance(method, RubberSheet):
        dp = _donor_prep(method)
        new = prep.crop(swap_iris(image, prep.annulus, method.donor.image, dp.annulus, donor_glints=dp.glints))
    elif isinstance(method, StyleTransfer):
        dp = _donor_prep(method)
        new = prep.crop(stylize_iris(image, prep.annulus, method.donor.image, dp.annulus,
                                     method.iterations, method.content_weight, method.style_weight,
                                     method.step_size, method.extractor_seed, prep.glints, dp.glints))
    else:
        raise InvalidParameter(f"unknown obfuscation method {method!r}")

    # put the original glints back, then place the iris region into the eye image
    glint_patch = prep.crop(prep.glints)
    new = composite(new, patch, glint_patch)
    x0, y0, _, _ = prep.box
    return composite(image, new, prep.crop(prep.iris), (x0, y0))


def obfuscate(sample, method, prep: Prepared | None = None) -> np.ndarray:
    if prep is None:
        prep = prepare(sample)
    return apply_method(sample.image, prep, method)
