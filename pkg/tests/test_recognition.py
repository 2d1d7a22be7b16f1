import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irisbench.errors import InvalidParameter, InvalidState
from irisbench.obfuscation.pipeline import prepare
from irisbench.recognition import (
    CODE_SHAPE,
    IrisCode,
    IrisCodeRejected,
    eer_threshold,
    encode_strip,
    enroll,
    extract_templates,
    gabor_kernel,
    hamming,
    identify_c1,
    identify_c2,
    score_probe,
    summarize,
)

SHAPE = CODE_SHAPE + (2,)


def random_code(rng):
    return IrisCode(rng.random(SHAPE) < 0.5, np.ones(SHAPE, dtype=bool))


def codes_from_seed(seed, n=3):
    r = np.random.default_rng(seed)
    return [random_code(r) for _ in range(n)]


def test_gabor_kernel_has_no_dc():
    g = gabor_kernel()
    assert abs(g.sum()) < 1e-12
    assert len(g) == 2 * 24 + 1


@given(st.integers(0, 2**31))
def test_hamming_metric_axioms(seed):
    a, b, c = codes_from_seed(seed)
    assert hamming(a, a, 0) == 0.0
    assert hamming(a, b, 0) == hamming(b, a, 0)
    assert hamming(a, c, 0) <= hamming(a, b, 0) + hamming(b, c, 0) + 1e-12
    # shift search is symmetric too and never exceeds the unshifted distance
    assert hamming(a, b) == pytest.approx(hamming(b, a))
    assert hamming(a, b) <= hamming(a, b, 0)


def test_random_codes_mean_half():
    rng = np.random.default_rng(5)
    d = [hamming(random_code(rng), random_code(rng), 0) for _ in range(400)]
    assert abs(np.mean(d) - 0.5) < 0.02


def test_hamming_ignores_invalid_bits():
    rng = np.random.default_rng(0)
    a = random_code(rng)
    valid = np.ones(SHAPE, dtype=bool)
    valid[:, :40] = False
    flipped = a.bits.copy()
    flipped[:, :40] ^= True
    assert hamming(a, IrisCode(flipped, valid), 0) == 0.0


def test_hamming_shape_mismatch():
    a = IrisCode(np.zeros((4, 4, 2), bool), np.ones((4, 4, 2), bool))
    with pytest.raises(InvalidParameter):
        hamming(a, IrisCode(np.zeros((4, 5, 2), bool), np.ones((4, 5, 2), bool)))


def test_rolled_strip_rolls_code():
    rng = np.random.default_rng(2)
    strip = rng.uniform(0.2, 0.8, (64, 256))
    a = encode_strip(strip)
    for cols in (2, 8, 16):
        b = encode_strip(np.roll(strip, cols, axis=1))
        # two strip columns collapse into one code column
        assert np.array_equal(np.roll(a.bits, cols // 2, axis=1), b.bits)
        assert hamming(a, b) == 0.0
    assert hamming(a, b, 0) > 0.4


def test_flat_strip_rejected():
    with pytest.raises(IrisCodeRejected):
        encode_strip(np.full((64, 256), 0.5))


def test_eer_threshold_separable_midpoint():
    assert eer_threshold([0.1, 0.2], [0.4, 0.5]) == pytest.approx(0.3)


def test_eer_threshold_overlap_balances_rates():
    gen = np.array([0.1, 0.2, 0.3, 0.45])
    imp = np.array([0.35, 0.5, 0.6, 0.7])
    t = eer_threshold(gen, imp)
    far = np.mean(imp < t)
    frr = np.mean(gen >= t)
    assert far == frr == 0.25


def test_eer_threshold_needs_both():
    with pytest.raises(InvalidState):
        eer_threshold([], [0.4])


def _gallery(ds):
    ts = []
    for s in ds.enroll:
        p = prepare(s)
        ts.append((s.identity_id, extract_templates(s.image, p.annulus, p.glints)))
    return enroll(ts)


def test_gallery_identifies_probes(small_dataset):
    g = _gallery(small_dataset)
    assert 0.2 < g.tau_c1 < 0.4
    scores = []
    for s in small_dataset.probe:
        p = prepare(s)
        t = extract_templates(s.image, p.annulus, p.glints)
        assert identify_c1(t.code, g)[0] == s.identity_id
        other = next(i for i in g.identities if i != s.identity_id)
        scores.append(score_probe(t, g, s.identity_id, other))
        identify_c2(t.style, g)
    res = summarize(scores)
    assert res["acc_c1"] == 1.0
    assert res["far_c1"] == 0.0


def test_enroll_needs_two_per_identity(small_dataset):
    s = small_dataset.enroll[0]
    p = prepare(s)
    with pytest.raises(InvalidState):
        enroll([(s.identity_id, extract_templates(s.image, p.annulus, p.glints))])


# frozen from scripts/calibrate_distances.py on the default 20x10 set:
# genuine max 0.286, impostor p1 0.386, impostor mean 0.455
GENUINE_MAX = 0.32
IMPOSTOR_P1 = 0.37


def test_genuine_impostor_separation():
    import itertools

    from irisbench.synthgen import generate_dataset

    ds = generate_dataset(8, 6, master_seed=2024)
    temps = []
    for s in ds.samples:
        p = prepare(s)
        temps.append((s.identity_id, extract_templates(s.image, p.annulus, p.glints).code))
    gen, imp = [], []
    for (ia, a), (ib, b) in itertools.combinations(temps, 2):
        (gen if ia == ib else imp).append(hamming(a, b))
    assert max(gen) < GENUINE_MAX
    assert np.percentile(imp, 1) > IMPOSTOR_P1
    assert np.mean(imp) > 0.43
