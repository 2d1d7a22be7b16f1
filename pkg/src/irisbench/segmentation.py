"""Mask handling, circle fitting, glint detection, IoU and a heuristic segmenter."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidParameter, SegmentationFailure
from .imagecore import as_image, sample_bilinear

SKIN, SCLERA, IRIS, PUPIL = 0, 1, 2, 3
CLASS_NAMES = {SKIN: "skin", SCLERA: "sclera", IRIS: "iris", PUPIL: "pupil"}
GLINT_THRESHOLD = 0.9


@dataclass(frozen=True)
class IrisAnnulus:
    pupil_center: tuple[float, float]
    pupil_radius: float
    iris_center: tuple[float, float]
    iris_radius: float

    def __post_init__(self):
        if not 0 < self.pupil_radius < self.iris_radius:
            raise InvalidParameter(
                f"need 0 < pupil_radius < iris_radius, got {self.pupil_radius}, {self.iris_radius}"
            )
        d = math.dist(self.pupil_center, self.iris_center)
        if d + self.pupil_radius > self.iris_radius + 1.0:
            raise InvalidParameter("pupil circle is not contained in the iris circle")

    def inside(self, shape) -> bool:
        h, w = shape
        cx, cy = self.iris_center
        r = self.iris_radius
        return cx - r >= 0 and cy - r >= 0 and cx + r <= w - 1 and cy + r <= h - 1


def _disk(radius: int) -> np.ndarray:
    ax = np.arange(-radius, radius + 1)
    return (ax[:, None] ** 2 + ax[None, :] ** 2) <= radius * radius


def crack_points(region: np.ndarray) -> np.ndarray:
    """Midpoints between 4-neighbour pixel pairs straddling the region boundary, as (x, y)."""
    region = np.asarray(region, dtype=bool)
    pts = []
    dx = region[:, 1:] != region[:, :-1]
    ys, xs = np.nonzero(dx)
    pts.append(np.stack([xs + 0.5, ys.astype(float)], axis=1))
    dy = region[1:, :] != region[:-1, :]
    ys, xs = np.nonzero(dy)
    pts.append(np.stack([xs.astype(float), ys + 0.5], axis=1))
    return np.concatenate(pts, axis=0)


def fit_circle(points) -> tuple[float, float, float]:
    """Algebraic (Kasa) circle fit followed by one Gauss-Newton step on geometric residuals."""
    p = np.asarray(points, dtype=np.float64)
    if len(p) < 3:
        raise SegmentationFailure("need at least 3 points to fit a circle")
    x, y = p[:, 0], p[:, 1]
    a = np.stack([x, y, np.ones_like(x)], axis=1)
    sol, *_ = np.linalg.lstsq(a, -(x * x + y * y), rcond=None)
    cx, cy = -sol[0] / 2, -sol[1] / 2
    r = math.sqrt(max(cx * cx + cy * cy - sol[2], 1e-12))

    dxs, dys = x - cx, y - cy
    dist = np.hypot(dxs, dys)
    dist = np.maximum(dist, 1e-12)
    res = dist - r
    jac = np.stack([-dxs / dist, -dys / dist, -np.ones_like(dist)], axis=1)
    step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
    return float(cx + step[0]), float(cy + step[1]), float(r + step[2])


def fit_annulus(mask) -> IrisAnnulus:
    labels = np.asarray(mask)
    pupil = labels == PUPIL
    iris = labels == IRIS
    if pupil.sum() < 50 or iris.sum() < 200:
        raise SegmentationFailure(
            f"too few pixels to fit an annulus (pupil={int(pupil.sum())}, iris={int(iris.sum())})"
        )
    pcx, pcy, pr = fit_circle(crack_points(pupil))
    icx, icy, ir = fit_circle(crack_points(pupil | iris))
    d = math.hypot(pcx - icx, pcy - icy)
    limit = ir + 1.0 - d - 1e-6
    pr = min(pr, limit, ir - 1e-3)
    if pr <= 0:
        raise SegmentationFailure("fitted pupil lies outside the fitted iris")
    return IrisAnnulus((pcx, pcy), pr, (icx, icy), ir)


def detect_glints(image, mask, threshold: float = GLINT_THRESHOLD) -> np.ndarray:
    if not 0 < threshold < 1:
        raise InvalidParameter(f"threshold must lie in (0, 1), got {threshold}")
    img = as_image(image)
    labels = np.asarray(mask)
    region = ndimage.binary_dilation((labels == IRIS) | (labels == PUPIL), structure=_disk(2))
    cand = (img >= threshold) & region
    lab, n = ndimage.label(cand, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return cand
    areas = np.bincount(lab.ravel())
    keep = areas >= 2
    keep[0] = False
    return keep[lab]


def glint_centroids(glints) -> list[tuple[float, float]]:
    """Blob centroids as (x, y), ordered by x then y."""
    lab, n = ndimage.label(np.asarray(glints, dtype=bool), structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return []
    cms = ndimage.center_of_mass(np.ones(lab.shape), lab, range(1, n + 1))
    return sorted((float(c[1]), float(c[0])) for c in cms)


def iou(pred, truth, cls: int) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidParameter(f"shape mismatch {pred.shape} vs {truth.shape}")
    a = pred == cls
    b = truth == cls
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


# heuristic segmenter thresholds, matched to the synthetic renderer's intensity ranges
PUPIL_MAX = 0.15
SCLERA_MIN = 0.7


def _fill_over_glints(profiles: np.ndarray) -> np.ndarray:
    out = profiles.copy()
    idx = np.arange(out.shape[1])
    for row in out:
        bad = row >= GLINT_THRESHOLD
        if bad.any() and not bad.all():
            row[bad] = np.interp(idx[bad], idx[~bad], row[~bad])
    return out


def degrade_proxy_segment(image) -> np.ndarray:
    """Intensity/gradient heuristic segmenter; its accuracy tracks image fidelity.

    Pupil is the largest dark blob (holes filled), the limbus is the strongest
    outward brightening along rays from the pupil centre, sclera is bright
    pixels around the iris and everything else is skin.
    """
    img = as_image(image)
    h, w = img.shape
    dark = img < PUPIL_MAX
    lab, n = ndimage.label(dark)
    if n == 0:
        raise SegmentationFailure("no dark blob found")
    areas = np.bincount(lab.ravel())
    areas[0] = 0
    best = int(np.argmax(areas))
    if areas[best] < 30:
        raise SegmentationFailure("dark blob too small to be a pupil")
    pupil = lab == best
    pupil = ndimage.binary_closing(pupil, structure=_disk(2))
    pupil = ndimage.binary_fill_holes(pupil)
    ys, xs = np.nonzero(pupil)
    if (
        pupil.sum() > 0.25 * h * w
        or xs.min() == 0
        or ys.min() == 0
        or xs.max() == w - 1
        or ys.max() == h - 1
    ):
        raise SegmentationFailure("dark region is not a plausible pupil")
    pcx, pcy = xs.mean(), ys.mean()
    pr = math.sqrt(pupil.sum() / math.pi)

    n_rays = 120
    theta = np.arange(n_rays) * (2 * math.pi / n_rays)
    radii = np.arange(math.ceil(pr + 3), math.ceil(4.0 * pr) + 6, dtype=np.float64)
    if len(radii) < 10:
        raise SegmentationFailure("pupil too small for a limbus search")
    xs_r = pcx + np.cos(theta)[:, None] * radii[None, :]
    ys_r = pcy + np.sin(theta)[:, None] * radii[None, :]
    profiles = _fill_over_glints(sample_bilinear(img, xs_r, ys_r))
    k = 3
    csum = np.cumsum(np.pad(profiles, ((0, 0), (1, 0))), axis=1)
    pos = np.arange(k, len(radii) - k)
    after = (csum[:, pos + k + 1] - csum[:, pos + 1]) / k
    before = (csum[:, pos] - csum[:, pos - k]) / k
    score = after - before
    edge_r = radii[pos[np.argmax(score, axis=1)]] + 0.5
    pts = np.stack([pcx + np.cos(theta) * edge_r, pcy + np.sin(theta) * edge_r], axis=1)

    keep = np.ones(n_rays, dtype=bool)
    for _ in range(3):
        icx, icy, ir = fit_circle(pts[keep])
        res = np.abs(np.hypot(pts[:, 0] - icx, pts[:, 1] - icy) - ir)
        new_keep = res < max(2.5, 2.5 * np.median(res[keep]))
        if new_keep.sum() < 20:
            raise SegmentationFailure("limbus edge points are inconsistent")
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    icx, icy, ir = fit_circle(pts[keep])
    if ir <= pr:
        raise SegmentationFailure("limbus found inside the pupil")

    yy, xx = np.mgrid[0:h, 0:w]
    iris_disk = (xx - icx) ** 2 + (yy - icy) ** 2 < ir * ir
    iris_disk |= pupil

    bright = (img > SCLERA_MIN) & ~iris_disk
    bright = ndimage.binary_opening(bright, structure=_disk(1))
    lab, n = ndimage.label(bright)
    sclera = np.zeros_like(bright)
    if n:
        ring = ndimage.binary_dilation(iris_disk, structure=_disk(3)) & ~iris_disk
        touching = np.unique(lab[ring & bright])
        touching = touching[touching > 0]
        if len(touching):
            sclera = np.isin(lab, touching)
        else:
            areas = np.bincount(lab.ravel())
            areas[0] = 0
            sclera = lab == int(np.argmax(areas))
        sclera = ndimage.binary_fill_holes(sclera | iris_disk) & ~iris_disk

    out = np.full((h, w), SKIN, dtype=np.uint8)
    out[sclera] = SCLERA
    out[iris_disk] = IRIS
    out[pupil] = PUPIL
    return out
