import numpy as np
import pytest

from geodenoise.image import Image
from geodenoise.metrics import psnr, rmse, score, ssim


class TestPsnr:
    def test_identical_images_infinite(self, random_image):
        assert psnr(random_image, random_image) == float("inf")

    def test_maximal_error_is_zero_db(self):
        white = Image(np.full((8, 8), 255.0))
        black = Image(np.zeros((8, 8)))
        assert psnr(white, black) == 0.0

    def test_direct_formula_20db(self):
        ref = Image(np.zeros((4, 4)))
        test = Image(np.full((4, 4), 25.5))
        # RMSE 25.5 -> 20*log10(255/25.5) = 20*log10(10)
        assert psnr(ref, test) == pytest.approx(20.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            psnr(Image(np.zeros((2, 2))), Image(np.zeros((3, 2))))

    def test_strictly_decreasing_in_noise_scale(self, rng):
        clean = Image(rng.uniform(40, 215, (24, 24)))
        values = []
        for scale in (2.0, 10.0, 40.0):
            noisy = Image(clean.pixels + rng.normal(0, scale, clean.shape))
            values.append(psnr(clean, noisy))
        assert values[0] > values[1] > values[2]


class TestSsim:
    def test_identical_nonconstant_is_one(self, random_image):
        assert ssim(random_image, random_image) == pytest.approx(1.0, abs=1e-12)

    def test_inverted_high_contrast_is_negative(self):
        # half 0 / half 255: mean 127.5; inversion flips the structure term
        ref = Image(np.concatenate([np.zeros((4, 8)), np.full((4, 8), 255.0)]))
        inverted = Image(255.0 - ref.pixels)
        assert ssim(ref, inverted) < 0.0

    def test_equal_constant_images_are_one(self):
        a = Image(np.full((5, 5), 77.0))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_symmetric(self, rng):
        a = Image(rng.uniform(0, 255, (10, 10)))
        b = Image(rng.uniform(0, 255, (10, 10)))
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_range_on_random_pairs(self, rng):
        for _ in range(100):
            a = Image(rng.uniform(0, 255, (6, 6)))
            b = Image(rng.uniform(0, 255, (6, 6)))
            assert -1.0 <= ssim(a, b) <= 1.0

    def test_needs_two_pixels(self):
        one = Image(np.array([[5.0]]))
        with pytest.raises(ValueError):
            ssim(one, one)


class TestInvariances:
    def test_transpose_invariance(self, rng):
        a = Image(rng.uniform(0, 255, (9, 13)))
        b = Image(rng.uniform(0, 255, (9, 13)))
        at, bt = Image(a.pixels.T), Image(b.pixels.T)
        assert psnr(a, b) == pytest.approx(psnr(at, bt), abs=1e-12)
        assert ssim(a, b) == pytest.approx(ssim(at, bt), abs=1e-12)


class TestReport:
    def test_score_bundles_all_three(self, random_image, rng):
        other = Image(np.clip(random_image.pixels + rng.normal(0, 5, (16, 16)), 0, 255))
        rep = score(random_image, other)
        assert rep.psnr_db == psnr(random_image, other)
        assert rep.ssim == ssim(random_image, other)
        assert rep.rmse == rmse(random_image, other)

    def test_infinite_psnr_iff_zero_rmse(self, random_image):
        rep = score(random_image, random_image)
        assert rep.rmse == 0.0
        assert rep.psnr_db == float("inf")
