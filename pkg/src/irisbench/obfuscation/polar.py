"""Rubber-sheet normalization: annulus <-> fixed-size polar strip."""
from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParameter
from ..imagecore import as_image, sample_bilinear
from ..segmentation import IrisAnnulus

STRIP_SHAPE = (64, 256)


def _check(annulus: IrisAnnulus, shape) -> None:
    if not annulus.inside(shape):
        raise InvalidParameter(f"annulus {annulus} does not fit inside image of shape {shape}")


def polar_grid(annulus: IrisAnnulus, n_radial: int, n_angular: int):
    """Image (x, y) coordinates for every strip cell.

    Row r sits at normalized radius r/(R-1) between the pupil boundary point
    and the iris boundary point along the same angle, column t at angle
    2*pi*t/T.
    """
    if n_radial < 2 or n_angular < 1:
        raise InvalidParameter("strip needs at least 2 radial and 1 angular samples")
    rho = np.linspace(0.0, 1.0, n_radial)[:, None]
    theta = np.arange(n_angular) * (2 * math.pi / n_angular)
    c, s = np.cos(theta)[None, :], np.sin(theta)[None, :]
    (px, py), pr = annulus.pupil_center, annulus.pupil_radius
    (ix, iy), ir = annulus.iris_center, annulus.iris_radius
    xs = (1 - rho) * (px + pr * c) + rho * (ix + ir * c)
    ys = (1 - rho) * (py + pr * s) + rho * (iy + ir * s)
    return xs, ys


def unwrap(image, annulus: IrisAnnulus, n_radial: int = STRIP_SHAPE[0], n_angular: int = STRIP_SHAPE[1]) -> np.ndarray:
    img = as_image(image)
    _check(annulus, img.shape)
    xs, ys = polar_grid(annulus, n_radial, n_angular)
    return sample_bilinear(img, xs, ys)


def annulus_coordinates(annulus: IrisAnnulus, shape):
    """Pixels inside the annulus and their (normalized radius, angle in [0, 2*pi)).

    Inverts the per-angle linear interpolation between the two circles; for
    non-concentric circles this is a quadratic in the normalized radius.
    """
    h, w = shape
    (px, py), pr = annulus.pupil_center, annulus.pupil_radius
    (ix, iy), ir = annulus.iris_center, annulus.iris_radius
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    inside = ((xx - ix) ** 2 + (yy - iy) ** 2 < ir * ir) & ((xx - px) ** 2 + (yy - py) ** 2 >= pr * pr)
    vx = xx[inside] - px
    vy = yy[inside] - py
    dx, dy = ix - px, iy - py
    span = ir - pr
    a = dx * dx + dy * dy - span * span
    b = -2.0 * (vx * dx + vy * dy + pr * span)
    c = vx * vx + vy * vy - pr * pr
    disc = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
    rho = np.clip((-b - disc) / (2 * a), 0.0, 1.0)
    radius = pr + rho * span
    ux = (vx - rho * dx) / radius
    uy = (vy - rho * dy) / radius
    theta = np.arctan2(uy, ux) % (2 * math.pi)
    return inside, rho, theta


def sample_strip(strip, rho, theta) -> np.ndarray:
    """Bilinear lookup in a strip, periodic along the angular axis."""
    strip = as_image(strip)
    n_radial, n_angular = strip.shape
    wrapped = np.concatenate([strip, strip[:, :1]], axis=1)
    cols = np.mod(theta * (n_angular / (2 * math.pi)), n_angular)
    return sample_bilinear(wrapped, cols, rho * (n_radial - 1))


def wrap(strip, annulus: IrisAnnulus, target) -> np.ndarray:
    """Paint a strip back onto the annulus of `target`; other pixels are untouched."""
    strip = as_image(strip)
    target = as_image(target)
    if strip.shape[0] < 2:
        raise InvalidParameter("strip needs at least 2 radial samples")
    _check(annulus, target.shape)
    inside, rho, theta = annulus_coordinates(annulus, target.shape)
    out = target.copy()
    out[inside] = sample_strip(strip, rho, theta)
    return out


def fill_masked(strip, bad) -> np.ndarray:
    """Replace flagged strip cells by periodic linear interpolation along each row."""
    strip = as_image(strip)
    bad = np.asarray(bad, dtype=bool)
    if bad.shape != strip.shape:
        raise InvalidParameter(f"mask shape {bad.shape} != strip shape {strip.shape}")
    out = strip.copy()
    n = strip.shape[1]
    idx = np.arange(n)
    for row, b in zip(out, bad):
        if b.any() and not b.all():
            row[b] = np.interp(idx[b], idx[~b], row[~b], period=n)
    return out


def unwrap_clean(image, annulus: IrisAnnulus, glints, n_radial: int = STRIP_SHAPE[0],
                 n_angular: int = STRIP_SHAPE[1]) -> np.ndarray:
    """Unwrap with glint-contaminated cells interpolated away."""
    strip = unwrap(image, annulus, n_radial, n_angular)
    if glints is None:
        return strip
    hit = unwrap(np.asarray(glints, dtype=np.float64), annulus, n_radial, n_angular) > 0
    return fill_masked(strip, hit)


def swap_iris(victim_image, victim_annulus: IrisAnnulus, donor_image, donor_annulus: IrisAnnulus,
              shape=STRIP_SHAPE, donor_glints=None) -> np.ndarray:
    """Replace the victim's iris with the donor's, reshaped to the victim's annulus.

    Donor glints, if given, are interpolated out of the donor strip so that
    only the victim's own glints survive the swap.
    """
    strip = unwrap_clean(donor_image, donor_annulus, donor_glints, *shape)
    return wrap(strip, victim_annulus, victim_image)
