"""Dequantization, discrete bounds, and the adversarial mixture constructions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from geneval import (
    IsotropicGaussian,
    MixtureTrickModel,
    QuantizedImageSet,
    SampleMatrix,
    build_lookup_table_model,
    dequantize,
    discrete_log_likelihood,
    gmm_log_density,
    jensen_bound_check,
    make_rng,
    mixture_trick_log_density,
    nats_to_bits_per_dim,
    posterior_alpha,
    sample,
    sample_mixture_trick,
)
from geneval.parzen import ParzenEstimator, parzen_log_likelihood

LN256 = math.log(256.0)


def _images(data, geometry):
    return QuantizedImageSet(np.asarray(data, dtype=np.int64), geometry)


class TestQuantizedImageSet:
    def test_range_validation(self):
        with pytest.raises(ValueError, match="0..255"):
            _images([[256]], (1, 1, 1))

    def test_geometry_validation(self):
        with pytest.raises(ValueError, match="inconsistent"):
            _images([[0, 0, 0]], (2, 2, 1))

    def test_float_data_rejected(self):
        with pytest.raises(ValueError, match="integer"):
            QuantizedImageSet(np.zeros((1, 4)), (2, 2, 1))


class TestDequantize:
    def test_zero_image_range(self):
        imgs = _images(np.zeros((3, 4)), (2, 2, 1))
        out = dequantize(imgs, 5)
        assert out.data.min() >= 0.0 and out.data.max() < 1.0

    def test_rescaled_range(self):
        imgs = _images(np.zeros((3, 4)), (2, 2, 1))
        out = dequantize(imgs, 5, rescale=True)
        assert out.value_range == (0.0, 1.0)
        assert out.data.max() < 1.0 / 256

    def test_determinism(self):
        imgs = _images(make_rng(1).integers(0, 256, (5, 9)), (3, 3, 1))
        a = dequantize(imgs, 42)
        b = dequantize(imgs, 42)
        np.testing.assert_array_equal(a.data, b.data)

    def test_noise_mean_is_half(self):
        imgs = _images(make_rng(2).integers(0, 256, (1000, 1000)), (1000, 1, 1))
        out = dequantize(imgs, 3)
        noise = out.data - imgs.data
        assert noise.mean() == pytest.approx(0.5, abs=0.002)


class TestDiscreteLogLikelihood:
    def test_uniform_model_is_exact(self):
        d = 4

        def uniform_log_density(points):
            return np.full(points.shape[0], -d * LN256)

        for mc in (1, 7, 100):
            est = discrete_log_likelihood(uniform_log_density, [10, 20, 30, 40], mc, 0)
            assert est.mean_log_mass == pytest.approx(-d * LN256, abs=1e-12)

    def test_cell_constant_model_is_exact(self):
        c = -3.21

        def const(points):
            return np.full(points.shape[0], c)

        est = discrete_log_likelihood(const, [5], 50, 1)
        assert est.mean_log_mass == pytest.approx(c, abs=1e-12)
        assert est.std_error == pytest.approx(0.0, abs=1e-12)

    def test_standard_normal_cell_mass_vs_erf_oracle(self):
        model = IsotropicGaussian(np.zeros(1), 1.0)
        est = discrete_log_likelihood(model, [0], 10**6, 11)
        oracle = math.log(norm.cdf(1.0) - norm.cdf(0.0))
        assert oracle == pytest.approx(-1.07485, abs=1e-4)
        assert est.mean_log_mass == pytest.approx(oracle, abs=0.005)
        assert est.std_error < 0.002

    def test_all_draws_minus_inf(self):
        def nowhere(points):
            return np.full(points.shape[0], -np.inf)

        est = discrete_log_likelihood(nowhere, [0, 0], 20, 2)
        assert est.mean_log_mass == -np.inf
        assert est.std_error == np.inf

    def test_seed_determinism(self):
        model = IsotropicGaussian(np.zeros(2), 3.0)
        a = discrete_log_likelihood(model, [1, 2], 500, 9)
        b = discrete_log_likelihood(model, [1, 2], 500, 9)
        assert a.mean_log_mass == b.mean_log_mass

    def test_stable_in_mc_samples(self):
        model = IsotropicGaussian(np.full(2, 0.5), 2.0)
        small = discrete_log_likelihood(model, [0, 1], 2000, 4)
        large = discrete_log_likelihood(model, [0, 1], 50000, 5)
        combined = math.hypot(small.std_error, large.std_error)
        assert abs(small.mean_log_mass - large.mean_log_mass) <= 3 * combined

    def test_mc_samples_validated(self):
        with pytest.raises(ValueError):
            discrete_log_likelihood(IsotropicGaussian(np.zeros(1), 1.0), [0], 0, 1)


class TestJensenBound:
    def test_cell_constant_model_has_zero_gap(self):
        d = 4

        def uniform_log_density(points):
            return np.full(points.shape[0], -d * LN256)

        imgs = _images(make_rng(3).integers(0, 256, (10, d)), (2, 2, 1))
        check = jensen_bound_check(uniform_log_density, imgs, 7, 64)
        assert check.gap == pytest.approx(0.0, abs=1e-12)
        assert check.continuous_ll == pytest.approx(-d * LN256, abs=1e-12)

    def test_single_point_average_respects_bound(self):
        # Per-draw values fluctuate above and below the cell mass; their
        # average over many seeds must stay below it (Jensen in expectation).
        model = IsotropicGaussian(np.zeros(1), 1.0)
        imgs = _images([[0]], (1, 1, 1))
        continuous = np.array(
            [jensen_bound_check(model, imgs, s, 200).continuous_ll for s in range(100)]
        )
        discrete = discrete_log_likelihood(model, [0], 10**5, 12345)
        se = continuous.std(ddof=1) / 10 + discrete.std_error
        assert continuous.mean() <= discrete.mean_log_mass + 3 * se
        assert discrete.mean_log_mass == pytest.approx(-1.07485, abs=0.01)

    def test_curved_model_has_strict_gap(self):
        # Strong within-cell curvature: sigma well below the cell size.
        model = IsotropicGaussian(np.full(1, 0.5), 0.1)
        imgs = _images([[0]] * 50, (1, 1, 1))
        check = jensen_bound_check(model, imgs, 17, 400)
        assert check.gap > 3 * check.gap_se > 0

    def test_bound_holds_on_gaussian_patches(self):
        rng = make_rng(8)
        data = np.clip(np.rint(rng.normal(128, 40, (100, 16))), 0, 255).astype(np.int64)
        imgs = _images(data, (4, 4, 1))
        model = IsotropicGaussian(np.full(16, 128.0), 40.0)
        check = jensen_bound_check(model, imgs, 21, 100)
        assert check.bound_holds()


class TestBitsPerDim:
    def test_uniform_eight_bits(self):
        for d in (1, 4, 100):
            assert nats_to_bits_per_dim(-d * LN256, d) == pytest.approx(8.0, abs=1e-12)

    def test_zero(self):
        assert nats_to_bits_per_dim(0.0, 10) == 0.0

    def test_known_conversion(self):
        assert nats_to_bits_per_dim(-4.61, 1) == pytest.approx(6.651, abs=1e-3)

    def test_invalid_dim(self):
        with pytest.raises(ValueError):
            nats_to_bits_per_dim(-1.0, 0)


class TestLookupTableModel:
    def test_single_row(self):
        model = build_lookup_table_model(SampleMatrix([[1.0, 2.0]]), 0.5)
        assert model.n_components == 1
        np.testing.assert_array_equal(model.means, [[1.0, 2.0]])
        np.testing.assert_allclose(model.variances, 0.25)

    def test_peaks_at_training_points(self):
        train = SampleMatrix(make_rng(4).standard_normal((20, 2)) * 3)
        model = build_lookup_table_model(train, 0.05)
        at_train = gmm_log_density(model, train.data[3])
        shifted = train.data[3] + 0.2  # more than 2 epsilon away from everything
        assert at_train > gmm_log_density(model, shifted)

    def test_matches_parzen_estimator(self):
        rng = make_rng(5)
        train = SampleMatrix(rng.standard_normal((30, 3)))
        test = SampleMatrix(rng.standard_normal((15, 3)))
        eps = 0.3
        model = build_lookup_table_model(train, eps)
        via_gmm = float(np.mean(gmm_log_density(model, test.data)))
        via_parzen = parzen_log_likelihood(ParzenEstimator(train, eps), test)
        assert via_gmm == pytest.approx(via_parzen, abs=1e-9)

    def test_epsilon_validated(self):
        with pytest.raises(ValueError):
            build_lookup_table_model(SampleMatrix([[0.0]]), 0.0)


class TestMixtureTrick:
    def test_equal_densities(self):
        c = -7.5

        def const(points):
            return np.full(points.shape[0], c)

        model = MixtureTrickModel(const, const, 0.3)
        assert mixture_trick_log_density(model, np.zeros(3)) == pytest.approx(c, abs=1e-12)

    def test_vanishing_bad_model_costs_ln_100(self):
        good = IsotropicGaussian(np.zeros(2), 1.0)

        def nothing(points):
            return np.full(points.shape[0], -1e6)

        model = MixtureTrickModel(good, nothing, 0.01)
        pts = make_rng(6).standard_normal((100, 2))
        log_p = np.asarray(gmm_log_density(good.as_mixture(), pts))
        penalty = log_p - np.asarray(mixture_trick_log_density(model, pts))
        np.testing.assert_allclose(penalty, math.log(100), atol=1e-6)
        assert math.log(100) == pytest.approx(4.6052, abs=1e-4)

    def test_penalty_bounded_between_zero_and_ln_inverse_weight(self):
        good = IsotropicGaussian(np.zeros(1), 1.0)
        bad = IsotropicGaussian(np.full(1, 3.0), 2.0)
        for w in (0.01, 0.1, 0.5, 0.9):
            model = MixtureTrickModel(good, bad, w)
            pts = make_rng(7).uniform(-6, 6, (200, 1))
            mix = np.asarray(mixture_trick_log_density(model, pts))
            log_p = np.asarray(gmm_log_density(good.as_mixture(), pts))
            log_q = np.asarray(gmm_log_density(bad.as_mixture(), pts))
            assert np.all(mix >= log_p + math.log(w) - 1e-12)
            dominated = log_q <= log_p  # mixing can only cost where p wins
            assert np.all(mix[dominated] <= log_p[dominated] + 1e-12)

    def test_weight_validation(self):
        g = IsotropicGaussian(np.zeros(1), 1.0)
        for w in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                MixtureTrickModel(g, g, w)


class TestSampleMixtureTrick:
    @staticmethod
    def _samplers():
        good_model = IsotropicGaussian(np.zeros(1), 1.0)
        bad_model = IsotropicGaussian(np.full(1, 100.0), 1.0)

        def sampler_good(n, seed):
            return sample(good_model, n, seed)

        def sampler_bad(n, seed):
            return sample(bad_model, n, seed)

        return sampler_good, sampler_bad

    def test_all_good_when_weight_is_one_sided(self):
        sg, sb = self._samplers()
        model = MixtureTrickModel(lambda p: p, lambda p: p, 0.999999999)
        _, labels = sample_mixture_trick(model, sg, sb, 500, 1)
        assert labels.sum() == 500

    def test_bad_fraction_matches_weight(self):
        sg, sb = self._samplers()
        model = MixtureTrickModel(lambda p: p, lambda p: p, 0.01)
        _, labels = sample_mixture_trick(model, sg, sb, 10**5, 2)
        frac_bad = 1 - labels.mean()
        assert frac_bad == pytest.approx(0.99, abs=0.003)

    def test_labels_match_components(self):
        sg, sb = self._samplers()
        model = MixtureTrickModel(lambda p: p, lambda p: p, 0.5)
        out, labels = sample_mixture_trick(model, sg, sb, 1000, 3)
        assert np.all(out.data[labels == 1] < 50)
        assert np.all(out.data[labels == 0] > 50)

    def test_determinism(self):
        sg, sb = self._samplers()
        model = MixtureTrickModel(lambda p: p, lambda p: p, 0.3)
        a, la = sample_mixture_trick(model, sg, sb, 100, 4)
        b, lb = sample_mixture_trick(model, sg, sb, 100, 4)
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(la, lb)


class TestPosteriorAlpha:
    def test_equal_evidence_gives_prior(self):
        assert posterior_alpha(0.0, 0.0, 0.01) == pytest.approx(0.01, abs=1e-12)

    def test_ln99_evidence_gives_half(self):
        assert posterior_alpha(math.log(99), 0.0, 0.01) == pytest.approx(0.5, abs=1e-12)

    def test_strong_evidence_saturates(self):
        # 50 nats of evidence: alpha differs from 1 by ~2e-20, below float
        # resolution around 1.0.
        assert posterior_alpha(50.0, 0.0, 0.01) == pytest.approx(1.0, abs=1e-15)

    def test_monotonicity(self):
        grid = np.linspace(-10, 10, 41)
        alphas = posterior_alpha(grid, 0.0, 0.2)
        assert np.all(np.diff(alphas) > 0)
        alphas_q = posterior_alpha(0.0, grid, 0.2)
        assert np.all(np.diff(alphas_q) < 0)

    @given(
        st.floats(-200, 200),
        st.floats(-200, 200),
        st.floats(0.001, 0.999),
    )
    @settings(max_examples=200, deadline=None)
    def test_complement_identity(self, lp, lq, w):
        total = posterior_alpha(lp, lq, w) + posterior_alpha(lq, lp, 1 - w)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_weight_validation(self):
        with pytest.raises(ValueError):
            posterior_alpha(0.0, 0.0, 0.0)
