"""Style statistics of a small random conv net, and style transfer by matching them.

The network is three stages of (3x3 conv, ReLU, 2x2 average pool) with
widths 16/32/64 and zero biases. Style of an image is the per-channel mean
and standard deviation of each stage's ReLU output; content is the stage-2
activation map. Gradients w.r.t. pixels are computed by explicit reverse
passes through conv, ReLU and pooling.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import InvalidParameter
from ..imagecore import as_image

WIDTHS = (16, 32, 64)
CONTENT_STAGE = 1
STD_EPS = 1e-12
MIN_PATCH = 16
# strip resolution used for style transfer and style templates
STYLE_STRIP = (32, 128)
# RMS pixel change per step; larger steps overshoot on the first iteration
DEFAULT_STEP = 0.01


def conv_same(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Zero-padded 3x3 cross-correlation. x: (C, H, W), w: (O, C, 3, 3) -> (O, H, W)."""
    c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (C, H, W, 3, 3)
    cols = cols.transpose(1, 2, 0, 3, 4).reshape(h * wd, c * 9)
    out = cols @ w.reshape(w.shape[0], -1).T
    return out.T.reshape(w.shape[0], h, wd)


def conv_same_input_grad(dz: np.ndarray, w: np.ndarray) -> np.ndarray:
    # adjoint of conv_same: correlate with the flipped, channel-transposed kernel
    return conv_same(dz, w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))


def avg_pool2(r: np.ndarray) -> np.ndarray:
    c, h, w = r.shape
    h2, w2 = h // 2, w // 2
    return r[:, : 2 * h2, : 2 * w2].reshape(c, h2, 2, w2, 2).mean(axis=(2, 4))


def avg_pool2_grad(dp: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape)
    h2, w2 = dp.shape[1], dp.shape[2]
    out[:, : 2 * h2, : 2 * w2] = np.repeat(np.repeat(dp, 2, axis=1), 2, axis=2) / 4.0
    return out


def _stats(r: np.ndarray):
    mu = r.mean(axis=(1, 2))
    sd = np.sqrt(r.var(axis=(1, 2)) + STD_EPS)
    return mu, sd


@dataclass
class _Trace:
    zs: list
    rs: list


class FeatureExtractor:
    """Fixed random conv stack; weights are a pure function of the seed."""

    def __init__(self, seed: int = 0, widths=WIDTHS, weights=None):
        if weights is None:
            rng = np.random.default_rng(seed)
            weights = []
            c_in = 1
            for c_out in widths:
                fan_in = c_in * 9
                weights.append(rng.standard_normal((c_out, c_in, 3, 3)) / np.sqrt(fan_in))
                c_in = c_out
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        for w in self.weights:
            w.setflags(write=False)
        self.seed = seed

    @property
    def n_features(self) -> int:
        return 2 * sum(w.shape[0] for w in self.weights)

    def forward(self, x) -> _Trace:
        a = as_image(x)[None]
        zs, rs = [], []
        for i, w in enumerate(self.weights):
            z = conv_same(a, w)
            r = np.maximum(z, 0.0)
            zs.append(z)
            rs.append(r)
            if i + 1 < len(self.weights):
                a = avg_pool2(r)
        return _Trace(zs, rs)

    def style_stats(self, x) -> np.ndarray:
        parts = []
        for r in self.forward(x).rs:
            mu, sd = _stats(r)
            parts.extend([mu, sd])
        return np.concatenate(parts)

    def targets(self, content_image, style_image):
        content = self.forward(content_image).rs[CONTENT_STAGE]
        style = [_stats(r) for r in self.forward(style_image).rs]
        return content, style

    def loss_and_grad(self, x, content_target, style_target, content_weight=1.0, style_weight=1.0,
                      need_grad=True):
        """Content MSE at stage 2 plus per-layer mean/std matching, and dL/dx."""
        x = as_image(x)
        tr = self.forward(x)
        n_stage = len(self.weights)
        loss = 0.0
        d_r = [np.zeros_like(r) for r in tr.rs]

        for l, (r, (mu_t, sd_t)) in enumerate(zip(tr.rs, style_target)):
            n_ch = r.shape[0]
            n_px = r.shape[1] * r.shape[2]
            mu, sd = _stats(r)
            dmu = mu - mu_t
            dsd = sd - sd_t
            loss += style_weight * float(np.sum(dmu**2 + dsd**2)) / n_ch
            if need_grad and style_weight != 0:
                g_mu = style_weight * 2.0 * dmu / n_ch / n_px
                g_sd = style_weight * 2.0 * dsd / n_ch / (n_px * sd)
                d_r[l] += g_mu[:, None, None] + g_sd[:, None, None] * (r - mu[:, None, None])

        rc = tr.rs[CONTENT_STAGE]
        diff = rc - content_target
        loss += content_weight * float(np.mean(diff**2))
        if need_grad and content_weight != 0:
            d_r[CONTENT_STAGE] += content_weight * 2.0 * diff / diff.size

        if not need_grad:
            return loss, None

        g = np.zeros_like(tr.rs[-1])
        for l in range(n_stage - 1, -1, -1):
            g = g + d_r[l]
            dz = g * (tr.zs[l] > 0)
            da = conv_same_input_grad(dz, self.weights[l])
            if l > 0:
                g = avg_pool2_grad(da, tr.rs[l - 1].shape)
            else:
                g = da
        return loss, g[0]


@functools.lru_cache(maxsize=8)
def get_extractor(seed: int = 0) -> FeatureExtractor:
    return FeatureExtractor(seed)


def style_features(patch, extractor: FeatureExtractor | None = None) -> np.ndarray:
    patch = as_image(patch)
    if min(patch.shape) < MIN_PATCH:
        raise InvalidParameter(f"patch must be at least {MIN_PATCH}x{MIN_PATCH}, got {patch.shape}")
    return (extractor or get_extractor(0)).style_stats(patch)


def style_transfer(victim_patch, donor_patch, iterations: int, content_weight: float = 1.0,
                   style_weight: float = 1.0, step_size: float = DEFAULT_STEP,
                   extractor: FeatureExtractor | None = None, trace: list | None = None) -> np.ndarray:
    """Pixel-space gradient descent from the victim towards the donor's style statistics.

    Each step moves pixels along the negative gradient normalized to unit RMS,
    scaled by `step_size` (in intensity units), then clamps to [0, 1]. A step
    that raises the loss is retried once at half the step size (which then
    persists); if it still raises the loss the iterate is kept. Exactly
    `iterations` steps are taken. If `trace` is a list, the loss before the
    first step and after every step is appended to it.
    """
    victim = as_image(victim_patch)
    donor = as_image(donor_patch)
    if victim.shape != donor.shape:
        raise InvalidParameter(f"patch shapes differ: {victim.shape} vs {donor.shape}")
    if iterations < 1:
        raise InvalidParameter("iterations must be >= 1")
    if min(victim.shape) < MIN_PATCH:
        raise InvalidParameter(f"patch must be at least {MIN_PATCH}x{MIN_PATCH}")
    ext = extractor or get_extractor(0)
    content_t, style_t = ext.targets(victim, donor)

    x = victim.copy()
    loss, g = ext.loss_and_grad(x, content_t, style_t, content_weight, style_weight)
    if trace is not None:
        trace.append(loss)
    lr = step_size
    for _ in range(iterations):
        rms = float(np.sqrt(np.mean(g * g)))
        if rms == 0.0 or loss == 0.0:
            if trace is not None:
                trace.append(loss)
            continue
        cand = np.clip(x - lr * g / rms, 0.0, 1.0)
        cand_loss, cand_g = ext.loss_and_grad(cand, content_t, style_t, content_weight, style_weight)
        if cand_loss > loss:
            lr *= 0.5
            cand = np.clip(x - lr * g / rms, 0.0, 1.0)
            cand_loss, cand_g = ext.loss_and_grad(cand, content_t, style_t, content_weight, style_weight)
        if cand_loss <= loss:
            x, loss, g = cand, cand_loss, cand_g
        if trace is not None:
            trace.append(loss)
    return x
