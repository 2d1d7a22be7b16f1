import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irisbench.errors import InvalidParameter
from irisbench.imagecore import (
    add_gaussian_noise,
    composite,
    convolve2d,
    gaussian_kernel,
    kernel_size_for,
    load_image,
    resample,
    sample_bilinear,
    save_image,
    upsample_to,
)

unit = st.floats(0.0, 1.0, allow_nan=False)


def brute_convolve(img, k):
    # direct sum with clamped indices, kernel flipped
    h, w = img.shape
    half = k.shape[0] // 2
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i in range(-half, half + 1):
                for j in range(-half, half + 1):
                    yy = min(max(y - i, 0), h - 1)
                    xx = min(max(x - j, 0), w - 1)
                    acc += k[i + half, j + half] * img[yy, xx]
            out[y, x] = acc
    return np.clip(out, 0, 1)


@pytest.mark.parametrize("sigma,size", [(0.5, 5), (1.0, 7), (1.5, 11), (2.0, 13), (5.0, 31)])
def test_kernel_size(sigma, size):
    assert kernel_size_for(sigma) == size
    assert gaussian_kernel(sigma).shape == (size, size)


@given(st.floats(0.3, 6.0))
def test_gaussian_kernel_normalized_symmetric(sigma):
    k = gaussian_kernel(sigma)
    assert abs(k.sum() - 1.0) < 1e-12
    assert np.allclose(k, k.T)
    assert np.allclose(k, k[::-1, :])
    assert np.allclose(k, k[:, ::-1])
    c = k.shape[0] // 2
    assert k[c, c] == k.max()


def test_gaussian_kernel_rejects_nonpositive():
    with pytest.raises(InvalidParameter):
        gaussian_kernel(0.0)


def test_ramp_box_against_hand_values():
    img = np.tile(np.arange(5) / 10.0, (5, 1))
    box = np.full((3, 3), 1 / 9)
    out = convolve2d(img, box)
    # interior columns keep the ramp; edge columns average a replicated border
    expected_row = np.array([(0 + 0 + 0.1) / 3, 0.1, 0.2, 0.3, (0.3 + 0.4 + 0.4) / 3])
    assert np.allclose(out, np.tile(expected_row, (5, 1)), atol=1e-12)


def test_convolution_is_true_convolution(rng):
    img = np.zeros((9, 9))
    img[4, 4] = 1.0
    k = rng.uniform(0, 0.2, (3, 3))
    out = convolve2d(img, k)
    assert np.allclose(out[3:6, 3:6], k)


@pytest.mark.parametrize("seed", range(3))
def test_convolution_matches_brute_force(seed):
    r = np.random.default_rng(seed)
    img = r.uniform(0, 1, (7, 10))
    k = r.uniform(0, 1, (5, 5))
    k /= k.sum()
    assert np.allclose(convolve2d(img, k), brute_convolve(img, k), atol=1e-12)
    g = gaussian_kernel(0.7)
    assert np.allclose(convolve2d(img, g), brute_convolve(img, g), atol=1e-12)


@given(arrays(np.float64, (6, 8), elements=unit))
def test_convolution_identity_kernel(img):
    k = np.zeros((3, 3))
    k[1, 1] = 1.0
    assert np.allclose(convolve2d(img, k), img, atol=1e-15)


@given(unit, st.floats(0.3, 1.5))
def test_convolution_constant_image(c, sigma):
    img = np.full((12, 12), c)
    assert np.allclose(convolve2d(img, gaussian_kernel(sigma)), c, atol=1e-12)


def test_convolution_kernel_too_large():
    with pytest.raises(InvalidParameter):
        convolve2d(np.zeros((4, 20)), np.ones((5, 5)) / 25)


def test_noise_deterministic_and_statistics():
    img = np.full((1000, 1000), 0.5)
    a = add_gaussian_noise(img, 0.05, seed=3)
    b = add_gaussian_noise(img, 0.05, seed=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, add_gaussian_noise(img, 0.05, seed=4))
    d = a - 0.5
    # 1e6 samples: standard errors are 5e-5 (mean) and 3.5e-5 (std)
    assert abs(d.mean()) < 3e-4
    assert abs(d.std() - 0.05) < 3e-4


@given(arrays(np.float64, (5, 7), elements=unit), st.floats(0.0, 2.0), st.integers(0, 2**32))
def test_noise_stays_in_range(img, sigma, seed):
    out = add_gaussian_noise(img, sigma, seed)
    assert out.min() >= 0 and out.max() <= 1
    assert out.shape == img.shape


@given(arrays(np.float64, (6, 9), elements=unit))
def test_resample_identity(img):
    assert np.array_equal(resample(img, 1.0), img)
    assert np.array_equal(upsample_to(img, 9, 6), img)


@given(arrays(np.float64, (4, 5), elements=unit), st.sampled_from([2, 3, 4]))
def test_down_up_block_fixed_point(cells, s):
    img = np.kron(cells, np.ones((s, s)))
    down = resample(img, float(s))
    assert np.array_equal(down, cells)
    assert np.array_equal(upsample_to(down, img.shape[1], img.shape[0]), img)


def test_checkerboard_down_up():
    board = (np.indices((8, 8)).sum(axis=0) % 2).astype(float)
    # nearest sampling at even positions sees only zeros
    assert np.array_equal(resample(board, 2.0), np.zeros((4, 4)))
    blocks = np.kron(board[:4, :4], np.ones((2, 2)))
    assert np.array_equal(upsample_to(resample(blocks, 2.0), 8, 8), blocks)


def test_resample_output_dims():
    assert resample(np.zeros((10, 11)), 1.5).shape == (6, 7)
    assert resample(np.zeros((10, 11)), 3.0).shape == (3, 3)


def test_bilinear_midpoints():
    img = np.array([[0.0, 1.0], [0.5, 0.25]])
    assert sample_bilinear(img, 0.5, 0.0) == pytest.approx(0.5)
    assert sample_bilinear(img, 0.5, 0.5) == pytest.approx(0.4375)
    assert sample_bilinear(img, 1.0, 1.0) == pytest.approx(0.25)


def test_composite_enumerates_2x2_masks():
    base = np.zeros((2, 2))
    patch = np.ones((2, 2))
    for code in range(16):
        mask = np.array([(code >> i) & 1 for i in range(4)], dtype=bool).reshape(2, 2)
        out = composite(base, patch, mask)
        assert np.array_equal(out, mask.astype(float))
    assert np.array_equal(base, np.zeros((2, 2)))


@given(arrays(np.float64, (6, 6), elements=unit), arrays(np.float64, (3, 4), elements=unit),
       arrays(bool, (3, 4)), st.integers(0, 2), st.integers(0, 3))
def test_composite_idempotent(base, patch, mask, x, y):
    once = composite(base, patch, mask, (x, y))
    assert np.array_equal(composite(once, patch, mask, (x, y)), once)
    outside = np.ones_like(base, dtype=bool)
    outside[y : y + 3, x : x + 4] = ~mask
    assert np.array_equal(once[outside], base[outside])


def test_composite_out_of_bounds():
    with pytest.raises(InvalidParameter):
        composite(np.zeros((4, 4)), np.zeros((2, 2)), np.ones((2, 2)), (3, 0))


def test_png_roundtrip(tmp_path, rng):
    img = np.round(rng.uniform(0, 1, (9, 13)) * 255) / 255
    save_image(img, tmp_path / "a.png")
    assert np.array_equal(load_image(tmp_path / "a.png"), img)
