import numpy as np
import pytest

from irisbench.obfuscation.pipeline import (
    Blur,
    Downsample,
    NoObfuscation,
    Noise,
    RubberSheet,
    StyleTransfer,
    apply_method,
    obfuscate,
    prepare,
)
from irisbench.segmentation import IRIS


@pytest.fixture(scope="module")
def pair(small_dataset):
    victim = small_dataset.probe[0]
    donor = next(s for s in small_dataset.probe if s.identity_id != victim.identity_id)
    return victim, donor, prepare(victim)


def methods(donor):
    return [
        NoObfuscation(),
        Blur(3.0),
        Noise(0.2, seed=5),
        Downsample(4.0),
        RubberSheet(donor),
        StyleTransfer(donor, iterations=3),
    ]


def test_glints_bit_exact_through_every_method(pair):
    victim, donor, prep = pair
    assert prep.glints.any()
    for m in methods(donor):
        out = apply_method(victim.image, prep, m)
        assert np.array_equal(out[prep.glints], victim.image[prep.glints]), m.name


def test_only_iris_pixels_change(pair):
    victim, donor, prep = pair
    keep = ~(victim.mask == IRIS)
    for m in methods(donor):
        out = apply_method(victim.image, prep, m)
        assert np.array_equal(out[keep], victim.image[keep]), m.name
        assert out.shape == victim.image.shape
        assert 0 <= out.min() and out.max() <= 1


def test_methods_change_the_iris(pair):
    victim, donor, prep = pair
    iris = prep.iris & ~prep.glints
    for m in methods(donor)[1:]:
        out = apply_method(victim.image, prep, m)
        assert np.abs(out[iris] - victim.image[iris]).mean() > 1e-3, m.name


def test_baseline_is_identity(pair):
    victim, _, prep = pair
    assert np.array_equal(obfuscate(victim, NoObfuscation()), victim.image)


def test_noise_is_seeded(pair):
    victim, _, prep = pair
    a = apply_method(victim.image, prep, Noise(0.1, 1))
    assert np.array_equal(a, apply_method(victim.image, prep, Noise(0.1, 1)))
    assert not np.array_equal(a, apply_method(victim.image, prep, Noise(0.1, 2)))


def test_self_style_transfer_leaves_image(pair):
    victim, _, prep = pair
    out = apply_method(victim.image, prep, StyleTransfer(victim, iterations=5))
    assert np.array_equal(out, victim.image)


def test_param_labels(pair):
    _, donor, _ = pair
    labels = [(m.name, m.param) for m in methods(donor)]
    assert labels == [("baseline", "NA"), ("blur", "sigma=3"), ("noise", "sigma=0.2"),
                      ("downsample", "s=4"), ("rubber_sheet", "NA"), ("style_transfer", "e=3")]


def test_rubber_sheet_pupil_untouched_and_donor_texture(pair, small_dataset):
    from irisbench.obfuscation.polar import unwrap_clean
    from irisbench.recognition import extract_templates, hamming
    from irisbench.segmentation import PUPIL

    victim, donor, prep = pair
    dp = prepare(donor)
    out = apply_method(victim.image, prep, RubberSheet(donor, dp))
    pupil = victim.mask == PUPIL
    assert np.array_equal(out[pupil], victim.image[pupil])
    a = unwrap_clean(out, prep.annulus, prep.glints)
    b = unwrap_clean(donor.image, dp.annulus, dp.glints)
    # the outermost rows straddle the iris-class boundary and keep victim pixels
    r = np.corrcoef(a[2:-2].ravel(), b[2:-2].ravel())[0, 1]
    assert r > 0.9
    # the swapped image now matches the donor's enrolled eyes
    enrolled = [s for s in small_dataset.enroll if s.identity_id == donor.identity_id]
    code = extract_templates(out, prep.annulus, prep.glints).code
    for s in enrolled:
        p = prepare(s)
        assert hamming(code, extract_templates(s.image, p.annulus, p.glints).code) < 0.3


def test_trivial_parameters_are_identities(pair):
    victim, donor, prep = pair
    assert np.array_equal(apply_method(victim.image, prep, Noise(0.0, 1)), victim.image)
    assert np.array_equal(apply_method(victim.image, prep, Downsample(1.0)), victim.image)
    out = apply_method(victim.image, prep, StyleTransfer(donor, iterations=4, style_weight=0.0))
    assert np.array_equal(out, victim.image)


def test_blur_interior_matches_direct_blur(pair):
    from scipy import ndimage

    from irisbench.imagecore import convolve2d, gaussian_kernel

    victim, _, prep = pair
    out = apply_method(victim.image, prep, Blur(1.0))
    direct = convolve2d(prep.crop(victim.image), gaussian_kernel(1.0))
    interior = ndimage.binary_erosion(prep.crop(prep.iris), iterations=4) & ~prep.crop(prep.glints)
    assert np.array_equal(prep.crop(out)[interior], direct[interior])


def test_obfuscation_is_deterministic(pair):
    victim, donor, prep = pair
    for m in methods(donor):
        assert np.array_equal(apply_method(victim.image, prep, m), apply_method(victim.image, prep, m))
