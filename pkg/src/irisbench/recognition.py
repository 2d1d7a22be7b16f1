"""Iris recognition: Gabor iris codes (c1) and style-statistics templates (c2).

Both recognizers enroll from the enroll split, fix an equal-error-rate
threshold on enroll data once, and then identify probes and score
impersonation attacks against that frozen threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, InvalidState, SegmentationFailure
from .imagecore import as_image
from .obfuscation.polar import STRIP_SHAPE, unwrap
from .obfuscation.style import STYLE_STRIP, get_extractor, style_features
from .segmentation import IrisAnnulus

CODE_SHAPE = (16, 128)
GABOR_WAVELENGTH = 16.0
MAX_SHIFT = 8
MIN_VALID = 0.5
MIN_JOINT_VALID = 0.25
STYLE_SCALE_FLOOR = 1e-6


class IrisCodeRejected(SegmentationFailure):
    pass


@dataclass(frozen=True)
class IrisCode:
    bits: np.ndarray  # (rows, cols, 2) bool
    valid: np.ndarray  # same shape


def gabor_kernel(wavelength: float = GABOR_WAVELENGTH) -> np.ndarray:
    sigma = 0.5 * wavelength
    half = int(math.ceil(3 * sigma))
    n = np.arange(-half, half + 1, dtype=np.float64)
    env = np.exp(-(n**2) / (2 * sigma**2))
    g = env * np.exp(2j * math.pi * n / wavelength)
    # remove the DC response so flat regions give no phase
    return g - env * (g.sum() / env.sum())


def _circular_filter_rows(rows: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    n = rows.shape[1]
    half = len(kernel) // 2
    k = np.zeros(n, dtype=complex)
    for i, v in enumerate(kernel):
        k[(i - half) % n] += v
    return np.fft.ifft(np.fft.fft(rows, axis=1) * np.fft.fft(k)[None, :], axis=1)


def encode_strip(strip, glint_strip=None) -> IrisCode:
    """Iris code from a 64x256 strip: 4x2 block average, row-wise Gabor, 2 phase bits."""
    strip = as_image(strip)
    rows, cols = CODE_SHAPE
    br, bc = strip.shape[0] // rows, strip.shape[1] // cols
    if br < 1 or bc < 1 or strip.shape != (rows * br, cols * bc):
        raise InvalidParameter(f"strip shape {strip.shape} is not a multiple of {CODE_SHAPE}")
    cells = strip.reshape(rows, br, cols, bc).mean(axis=(1, 3))
    resp = _circular_filter_rows(cells, gabor_kernel())
    valid = np.abs(resp) >= 1e-6
    if glint_strip is not None:
        g = np.asarray(glint_strip, dtype=bool).reshape(rows, br, cols, bc).any(axis=(1, 3))
        valid &= ~g
    bits = np.stack([resp.real > 0, resp.imag > 0], axis=-1)
    valid = np.stack([valid, valid], axis=-1)
    if valid.mean() < MIN_VALID:
        raise IrisCodeRejected(f"only {valid.mean():.0%} of iris code cells are valid")
    return IrisCode(bits, valid)


def iris_code(image, annulus: IrisAnnulus, glints=None) -> IrisCode:
    strip = unwrap(image, annulus, *STRIP_SHAPE)
    gstrip = None
    if glints is not None:
        gstrip = unwrap(np.asarray(glints, dtype=np.float64), annulus, *STRIP_SHAPE) > 0
    return encode_strip(strip, gstrip)


def hamming(a: IrisCode, b: IrisCode, max_shift: int = MAX_SHIFT) -> float:
    """Fractional Hamming distance, minimized over angular shifts of b."""
    if a.bits.shape != b.bits.shape:
        raise InvalidParameter(f"code shapes differ: {a.bits.shape} vs {b.bits.shape}")
    total = a.valid.size
    best = 1.0
    for s in range(-max_shift, max_shift + 1):
        bb = np.roll(b.bits, s, axis=1)
        bv = np.roll(b.valid, s, axis=1)
        joint = a.valid & bv
        n = np.count_nonzero(joint)
        if n < MIN_JOINT_VALID * total:
            continue
        d = np.count_nonzero((a.bits != bb) & joint) / n
        best = min(best, d)
    return best


def style_template(image, annulus: IrisAnnulus) -> np.ndarray:
    return style_features(unwrap(image, annulus, *STYLE_STRIP), get_extractor(0))


@dataclass(frozen=True)
class Templates:
    code: IrisCode
    style: np.ndarray


def extract_templates(image, annulus: IrisAnnulus, glints=None) -> Templates:
    return Templates(iris_code(image, annulus, glints), style_template(image, annulus))


def eer_threshold(genuine, impostor) -> float:
    """Distance threshold where false accepts (impostor < t) balance false rejects (genuine >= t).

    When the score sets are separable the midpoint of the gap is returned.
    """
    gen = np.sort(np.asarray(genuine, dtype=np.float64))
    imp = np.sort(np.asarray(impostor, dtype=np.float64))
    if len(gen) == 0 or len(imp) == 0:
        raise InvalidState("EER needs both genuine and impostor scores")
    cands = np.unique(np.concatenate([gen, imp, [gen[-1] + 1e-9, imp[0] - 1e-9]]))
    far = np.searchsorted(imp, cands, side="left") / len(imp)
    frr = 1.0 - np.searchsorted(gen, cands, side="left") / len(gen)
    gap = np.abs(far - frr)
    # far - frr is monotone, so the minimizers form one run of candidates
    best = np.flatnonzero(gap <= gap.min() + 1e-12)
    return float(0.5 * (cands[best[0]] + cands[best[-1]]))


@dataclass
class Gallery:
    codes: dict[int, list[IrisCode]]
    styles: dict[int, np.ndarray]  # (n_enrolled, 224) per identity
    mean: np.ndarray
    scale: np.ndarray
    centroids: dict[int, np.ndarray] = field(default_factory=dict)
    tau_c1: float = float("nan")
    tau_c2: float = float("nan")

    @property
    def identities(self) -> list[int]:
        return sorted(self.codes)

    def standardize(self, v) -> np.ndarray:
        return (np.asarray(v) - self.mean) / self.scale

    def c1_distances(self, code: IrisCode) -> dict[int, float]:
        return {i: min(hamming(code, c) for c in cs) for i, cs in self.codes.items()}

    def c2_distances(self, style) -> dict[int, float]:
        z = self.standardize(style)
        return {i: float(np.linalg.norm(z - c)) for i, c in self.centroids.items()}


def enroll(templates: list[tuple[int, Templates]]) -> Gallery:
    """Build a gallery and freeze both EER thresholds from enroll data only."""
    if not templates:
        raise InvalidState("cannot enroll an empty template set")
    codes: dict[int, list[IrisCode]] = {}
    styles: dict[int, list[np.ndarray]] = {}
    for ident, t in templates:
        codes.setdefault(ident, []).append(t.code)
        styles.setdefault(ident, []).append(t.style)
    all_styles = np.array([t.style for _, t in templates])
    mean = all_styles.mean(axis=0)
    # pooled within-identity spread: dimensions that are stable for one eye weigh more
    resid = np.concatenate([np.array(v) - np.mean(v, axis=0) for v in styles.values()])
    scale = np.maximum(resid.std(axis=0), STYLE_SCALE_FLOOR)
    g = Gallery(codes, {i: np.array(v) for i, v in styles.items()}, mean, scale)
    g.centroids = {i: g.standardize(v).mean(axis=0) for i, v in g.styles.items()}

    gen1, imp1, gen2, imp2 = [], [], [], []
    for ident in g.identities:
        cs = codes[ident]
        zs = g.standardize(g.styles[ident])
        for k, c in enumerate(cs):
            others = [o for j, o in enumerate(cs) if j != k]
            if others:
                gen1.append(min(hamming(c, o) for o in others))
                loo = np.delete(zs, k, axis=0).mean(axis=0)
                gen2.append(float(np.linalg.norm(zs[k] - loo)))
            for other in g.identities:
                if other == ident:
                    continue
                imp1.append(min(hamming(c, o) for o in codes[other]))
                imp2.append(float(np.linalg.norm(zs[k] - g.centroids[other])))
    if not gen1:
        raise InvalidState("need at least two enrolled samples per identity to set thresholds")
    g.tau_c1 = eer_threshold(gen1, imp1)
    g.tau_c2 = eer_threshold(gen2, imp2)
    return g


def _nearest(dists: dict[int, float]) -> tuple[int, float]:
    ident = min(dists, key=lambda i: (dists[i], i))
    return ident, dists[ident]


def identify_c1(probe: IrisCode, gallery: Gallery) -> tuple[int, float]:
    if not gallery.codes:
        raise InvalidState("empty gallery")
    return _nearest(gallery.c1_distances(probe))


def identify_c2(probe_style, gallery: Gallery) -> tuple[int, float]:
    if not gallery.centroids:
        raise InvalidState("empty gallery")
    return _nearest(gallery.c2_distances(probe_style))


@dataclass(frozen=True)
class ProbeScore:
    """Per-probe decisions for both recognizers."""

    correct_c1: bool
    correct_c2: bool
    as_attacker_c1: bool
    as_attacker_c2: bool
    as_other_c1: bool
    as_other_c2: bool


def score_probe(t: Templates, gallery: Gallery, true_id: int, attacker_id: int) -> ProbeScore:
    d1 = gallery.c1_distances(t.code)
    d2 = gallery.c2_distances(t.style)
    id1, dist1 = _nearest(d1)
    id2, dist2 = _nearest(d2)
    return ProbeScore(
        correct_c1=id1 == true_id and dist1 < gallery.tau_c1,
        correct_c2=id2 == true_id and dist2 < gallery.tau_c2,
        as_attacker_c1=d1[attacker_id] < gallery.tau_c1,
        as_attacker_c2=d2[attacker_id] < gallery.tau_c2,
        as_other_c1=id1 != true_id and dist1 < gallery.tau_c1,
        as_other_c2=id2 != true_id and dist2 < gallery.tau_c2,
    )


def summarize(scores: list[ProbeScore]) -> dict[str, float]:
    n = len(scores)
    if n == 0:
        nan = float("nan")
        return dict(acc_c1=nan, acc_c2=nan, far_c1=nan, far_c2=nan, far_any_c1=nan, far_any_c2=nan)
    return dict(
        acc_c1=sum(s.correct_c1 for s in scores) / n,
        acc_c2=sum(s.correct_c2 for s in scores) / n,
        far_c1=sum(s.as_attacker_c1 for s in scores) / n,
        far_c2=sum(s.as_attacker_c2 for s in scores) / n,
        far_any_c1=sum(s.as_other_c1 for s in scores) / n,
        far_any_c2=sum(s.as_other_c2 for s in scores) / n,
    )
