"""Model-based gaze estimation from pupil and glint landmarks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FeatureFailure, FitFailure, InvalidParameter
from .segmentation import IRIS, PUPIL, glint_centroids
from .synthgen import angles_from_gaze

N_TERMS = 12
MIN_CALIBRATION = 24


def extract_features(mask, glints) -> np.ndarray:
    """(pupil x, pupil y, pupil-glint dx, pupil-glint dy), in units of iris radius.

    Pupil position is relative to the image centre. With several glints the
    centroid of all glint blobs is used as the corneal reference point.
    """
    labels = np.asarray(mask)
    pupil = labels == PUPIL
    if not pupil.any():
        raise FeatureFailure("no pupil pixels in mask")
    cents = glint_centroids(glints)
    if not cents:
        raise FeatureFailure("no glint found")
    ys, xs = np.nonzero(pupil)
    px, py = xs.mean(), ys.mean()
    iris_r = math.sqrt(np.count_nonzero(pupil | (labels == IRIS)) / math.pi)
    gx = sum(c[0] for c in cents) / len(cents)
    gy = sum(c[1] for c in cents) / len(cents)
    h, w = labels.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    return np.array([(px - cx) / iris_r, (py - cy) / iris_r, (px - gx) / iris_r, (py - gy) / iris_r])


def design_row(f) -> np.ndarray:
    """Bias, linear, squared and three cross terms of the 4 landmark features."""
    px, py, ox, oy = f
    return np.array([1.0, px, py, ox, oy, px * px, py * py, ox * ox, oy * oy, px * py, ox * oy, px * ox])


@dataclass(frozen=True)
class GazeModel:
    coef: np.ndarray  # (12, 2): yaw and pitch columns

    def angles(self, features) -> tuple[float, float]:
        yaw, pitch = design_row(features) @ self.coef
        return float(yaw), float(pitch)


def fit(features, gazes) -> GazeModel:
    """Least-squares fit of (yaw, pitch) on calibration pairs."""
    feats = np.asarray(features, dtype=np.float64)
    if len(feats) < MIN_CALIBRATION:
        raise FitFailure(f"need at least {MIN_CALIBRATION} calibration pairs, got {len(feats)}")
    a = np.array([design_row(f) for f in feats])
    if np.linalg.matrix_rank(a) < N_TERMS:
        raise FitFailure("calibration design matrix is rank deficient")
    y = np.array([angles_from_gaze(g) for g in gazes])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return GazeModel(coef)


def estimate(model: GazeModel, features) -> np.ndarray:
    yaw, pitch = model.angles(features)
    return np.array([math.cos(pitch) * math.sin(yaw), math.sin(pitch), math.cos(pitch) * math.cos(yaw)])


def angular_error(pred, truth) -> float:
    a = np.asarray(pred, dtype=np.float64)
    b = np.asarray(truth, dtype=np.float64)
    for v in (a, b):
        if v.shape != (3,) or abs(np.linalg.norm(v) - 1.0) > 1e-6:
            raise InvalidParameter("angular_error needs unit 3-vectors")
    # atan2 form keeps precision for nearly parallel vectors, where acos does not
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b)))


def fit_on_samples(samples) -> GazeModel:
    """Calibrate on ground-truth masks and glints."""
    feats, gazes = [], []
    for s in samples:
        try:
            feats.append(extract_features(s.mask, s.glints))
        except FeatureFailure:
            continue
        gazes.append(s.gaze_label)
    return fit(feats, gazes)


def evaluate_gaze(model: GazeModel, samples, masks=None, glints=None) -> tuple[float, int]:
    """Mean angular error (degrees) and failure count.

    Masks and glints default to each sample's ground truth.
    """
    errs, failed = [], 0
    for i, s in enumerate(samples):
        m = s.mask if masks is None else masks[i]
        g = s.glints if glints is None else glints[i]
        try:
            f = extract_features(m, g)
        except FeatureFailure:
            failed += 1
            continue
        errs.append(angular_error(estimate(model, f), s.gaze_label))
    return (float(np.mean(errs)) if errs else math.nan), failed
