import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_convolve
from rpcp.random_projection import (
    RpConfig,
    RpFilter,
    blend,
    convolve,
    perturb_region,
    refine,
    restandardize,
    sample_filter,
)
from rpcp.seeding import make_rng


def identity_filter(h=3, w=3):
    wt = np.zeros((h, w, 3, 3))
    wt[h // 2, w // 2] = np.eye(3)
    return RpFilter(wt)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"h": 4}, {"w": 0}, {"sigma": -1}, {"alpha": 1.5}, {"alpha": -0.1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            RpConfig(**kw)

    def test_filter_shape_checked(self):
        with pytest.raises(ValueError):
            RpFilter(np.zeros((3, 3, 3, 4)))


class TestSampleFilter:
    def test_zero_sigma(self, rng):
        assert not sample_filter(rng, RpConfig(sigma=0.0)).weights.any()

    def test_weight_count(self, rng):
        f = sample_filter(rng, RpConfig())
        assert f.weights.shape == (3, 3, 3, 3) and f.weights.size == 81

    def test_deterministic(self):
        a = sample_filter(make_rng(5), RpConfig()).weights
        b = sample_filter(make_rng(5), RpConfig()).weights
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        r = make_rng(2024)
        cfg = RpConfig(sigma=0.2)
        w = np.concatenate([sample_filter(r, cfg).weights.ravel() for _ in range(1235)])[:100_000]
        assert abs(w.std() - 0.2) < 0.005


class TestConvolve:
    def test_zero_filter(self, rng):
        assert not convolve(rng.uniform(size=(6, 6, 3)), RpFilter(np.zeros((3, 3, 3, 3)))).any()

    @pytest.mark.parametrize("size", [1, 3, 5])
    def test_identity(self, rng, size):
        img = rng.uniform(size=(7, 9, 3))
        np.testing.assert_array_equal(convolve(img, identity_filter(size, size)), img)

    def test_one_by_one_channel_mix(self):
        img = np.array([[[0.2, 0.4, 0.6]]])
        wt = np.zeros((1, 1, 3, 3))
        wt[0, 0] = [[1.0, 0.0, 2.0], [0.5, -1.0, 0.0], [0.0, 3.0, 1.0]]  # [c_in, c_out]
        out = convolve(img, RpFilter(wt))
        # c_out0 = .2*1 + .4*.5 + .6*0 ; c_out1 = .4*-1 + .6*3 ; c_out2 = .2*2 + .6*1
        np.testing.assert_allclose(out[0, 0], [0.4, 1.4, 1.0], atol=1e-12)

    def test_against_naive(self, rng):
        img = rng.uniform(size=(8, 8, 3))
        f = sample_filter(rng, RpConfig(h=3, w=5))
        assert np.abs(convolve(img, f) - naive_convolve(img, f.weights)).max() < 1e-6

    def test_linear(self, rng):
        img = rng.uniform(size=(10, 10, 3))
        f = sample_filter(rng, RpConfig())
        np.testing.assert_allclose(convolve(0.37 * img, f), 0.37 * convolve(img, f), atol=1e-6)


class TestRestandardize:
    def test_already_matching(self, rng):
        ref = rng.uniform(size=(6, 6, 3))
        mask = np.ones((6, 6), bool)
        np.testing.assert_allclose(restandardize(ref, ref, mask), np.clip(ref, 0, 1), atol=1e-6)

    def test_constant_raw(self, rng):
        ref = np.full((5, 5, 3), 0.4)
        ref[0, 0] = 0.9  # outside the mask
        mask = np.zeros((5, 5), bool)
        mask[2:4, 1:4] = True
        out = restandardize(np.full((5, 5, 3), -3.0), ref, mask)
        np.testing.assert_allclose(out[mask], 0.4, atol=1e-12)

    def test_moments_match(self, rng):
        raw = rng.normal(size=(12, 12, 3)) * 3 - 1
        ref = rng.uniform(size=(12, 12, 3))
        mask = rng.uniform(size=(12, 12)) < 0.5
        out = restandardize(raw, ref, mask, clip=False)
        np.testing.assert_allclose(out[mask].mean(0), ref[mask].mean(0), atol=1e-6)
        np.testing.assert_allclose(out[mask].std(0), ref[mask].std(0), atol=1e-6)

    def test_empty_mask(self, rng):
        with pytest.raises(ValueError):
            restandardize(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), np.zeros((2, 2), bool))


def _mask(shape, box):
    m = np.zeros(shape, bool)
    y0, y1, x0, x1 = box
    m[y0:y1, x0:x1] = True
    return m


class TestRefine:
    def test_alpha_zero(self, rng):
        img = rng.uniform(size=(10, 10, 3))
        out = refine(img, _mask((10, 10), (2, 6, 2, 6)), RpConfig(alpha=0.0), rng)
        np.testing.assert_array_equal(out, img)

    def test_empty_mask(self, rng):
        img = rng.uniform(size=(10, 10, 3))
        np.testing.assert_array_equal(refine(img, np.zeros((10, 10), bool), RpConfig(), rng), img)

    def test_sigma_zero_bypass(self, rng):
        img = rng.uniform(size=(10, 10, 3))
        np.testing.assert_array_equal(refine(img, _mask((10, 10), (0, 10, 0, 10)), RpConfig(sigma=0.0), rng), img)

    def test_alpha_one_is_clipped_x(self, rng):
        img = rng.uniform(size=(12, 12, 3))
        mask = _mask((12, 12), (3, 8, 0, 5))
        cfg = RpConfig(alpha=1.0, restandardize=False)
        out = refine(img, mask, cfg, make_rng(8))
        x = convolve(img, sample_filter(make_rng(8), cfg))
        np.testing.assert_array_equal(out[mask], np.clip(x, 0, 1)[mask])
        np.testing.assert_array_equal(out[~mask], img[~mask])

    def test_single_pixel_hand_value(self):
        img = np.full((3, 3, 3), 0.5)
        img[1, 1] = [0.2, 0.4, 0.6]
        mask = np.zeros((3, 3), bool)
        mask[1, 1] = True
        wt = np.zeros((1, 1, 3, 3))
        wt[0, 0] = np.eye(3) * 0.5  # X = 0.5 * I' at the pixel
        (_, _, _, _), x = perturb_region(img, mask, RpFilter(wt), restandardize_output=False)
        out = blend(img[1:2, 1:2], x, mask[1:2, 1:2], 0.8)
        # 0.8 * 0.5 * v + 0.2 * v = 0.6 * v
        np.testing.assert_allclose(out[0, 0], [0.12, 0.24, 0.36], atol=1e-12)

    def test_box_restricted_matches_whole_image(self, rng):
        img = rng.uniform(size=(20, 20, 3))
        for box in [(0, 3, 0, 4), (8, 12, 9, 11), (15, 20, 16, 20)]:
            mask = _mask((20, 20), box)
            f = sample_filter(rng, RpConfig(h=5, w=7))
            (y0, y1, x0, x1), x = perturb_region(img, mask, f, restandardize_output=False)
            whole = convolve(img, f)
            sub = mask[y0:y1, x0:x1]
            assert np.abs(x[sub] - whole[y0:y1, x0:x1][sub]).max() < 1e-6

    def test_restandardized_brightness_preserved(self, rng):
        img = np.clip(0.5 + 0.05 * rng.normal(size=(24, 24, 3)), 0, 1)
        mask = _mask((24, 24), (6, 18, 6, 18))
        out = refine(img, mask, RpConfig(), make_rng(1))
        np.testing.assert_allclose(out[mask].mean(0), img[mask].mean(0), atol=0.02)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.sampled_from([0.0, 0.05, 0.2, 0.3]), st.booleans())
def test_outside_mask_untouched_and_range(seed, alpha, sigma, restd):
    r = np.random.default_rng(seed)
    img = r.uniform(size=(14, 14, 3))
    mask = r.uniform(size=(14, 14)) < 0.3
    out = refine(img, mask, RpConfig(sigma=sigma, alpha=alpha, restandardize=restd), r)
    np.testing.assert_array_equal(out[~mask], img[~mask])
    assert out.min() >= 0.0 and out.max() <= 1.0
