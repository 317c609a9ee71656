import json

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from gsmark.channel import (
    Awgn,
    Burst,
    ChannelSpec,
    Drop,
    RandomFlip,
    apply_channel,
    effective_flip_probability,
    from_json,
    from_json_obj,
    to_json,
    to_json_obj,
)
from gsmark.errors import InvalidSpec
from gsmark.modem import LatentTensor


def latent(seed, size=16384):
    rng = np.random.default_rng(seed)
    return LatentTensor(1, 1, size, rng.standard_normal(size))


class TestStages:
    def test_awgn_zero_sigma_is_identity(self):
        z = latent(0)
        out = apply_channel(z, ChannelSpec((Awgn(0.0),)), np.random.default_rng(1))
        assert np.array_equal(out.values, z.values)

    def test_flip_one_is_negation(self):
        z = latent(1)
        out = apply_channel(z, ChannelSpec((RandomFlip(1.0),)), np.random.default_rng(2))
        assert np.array_equal(out.values, -z.values)

    def test_flip_zero_is_identity(self):
        z = latent(2)
        out = apply_channel(z, ChannelSpec((RandomFlip(0.0),)), np.random.default_rng(3))
        assert np.array_equal(out.values, z.values)

    def test_flip_rate_concentrates(self):
        n = 100_000
        z = latent(3, n)
        p = 0.3
        out = apply_channel(z, ChannelSpec((RandomFlip(p),)), np.random.default_rng(4))
        flipped = (out.values != z.values).mean()
        assert abs(flipped - p) < 3 * np.sqrt(p * (1 - p) / n)

    def test_burst_only_touches_window(self):
        z = latent(4)
        spec = ChannelSpec((Burst(start_index=100, length=50, flip_p=1.0),))
        out = apply_channel(z, spec, np.random.default_rng(5))
        assert np.array_equal(out.values[100:150], -z.values[100:150])
        assert np.array_equal(out.values[:100], z.values[:100])
        assert np.array_equal(out.values[150:], z.values[150:])

    def test_drop_zero_fraction(self):
        n = 100_000
        z = latent(5, n)
        p = 0.25
        out = apply_channel(z, ChannelSpec((Drop(p),)), np.random.default_rng(6))
        zero_fraction = (out.values == 0.0).mean()
        assert abs(zero_fraction - p) < 3 * np.sqrt(p * (1 - p) / n)

    def test_input_untouched(self):
        z = latent(6)
        before = z.values.copy()
        apply_channel(z, ChannelSpec((RandomFlip(0.5), Drop(0.5))), np.random.default_rng(7))
        assert np.array_equal(z.values, before)


class TestComposition:
    def test_order_matters(self):
        z = latent(7)
        ab = ChannelSpec((Awgn(1.0), Drop(0.3)))
        ba = ChannelSpec((Drop(0.3), Awgn(1.0)))
        out_ab = apply_channel(z, ab, np.random.default_rng(8))
        out_ba = apply_channel(z, ba, np.random.default_rng(8))
        # dropping after noise leaves exact zeros; noise after dropping leaves none
        assert (out_ab.values == 0.0).sum() > 1000
        assert (out_ba.values == 0.0).sum() == 0

    def test_seed_determinism(self):
        z = latent(8)
        spec = ChannelSpec((Awgn(0.5), RandomFlip(0.1), Burst(0, 4096, 0.5), Drop(0.05)))
        a = apply_channel(z, spec, np.random.default_rng(9))
        b = apply_channel(z, spec, np.random.default_rng(9))
        assert np.array_equal(a.values, b.values)


class TestValidation:
    def test_bad_probabilities(self):
        with pytest.raises(InvalidSpec):
            ChannelSpec((RandomFlip(1.5),))
        with pytest.raises(InvalidSpec):
            ChannelSpec((Drop(-0.1),))
        with pytest.raises(InvalidSpec):
            ChannelSpec((Burst(0, 10, 2.0),))
        with pytest.raises(InvalidSpec):
            ChannelSpec((Awgn(-1.0),))
        with pytest.raises(InvalidSpec):
            ChannelSpec((Awgn(float("nan")),))

    def test_burst_out_of_bounds(self):
        z = latent(9, 1000)
        spec = ChannelSpec((Burst(900, 200, 0.5),))
        with pytest.raises(InvalidSpec):
            apply_channel(z, spec, np.random.default_rng(10))


class TestEffectiveFlipProbability:
    def test_identity_is_zero(self):
        assert effective_flip_probability(ChannelSpec(), 1000, np.random.default_rng(11)) == 0.0

    def test_random_flip_estimate(self):
        n = 100_000
        est = effective_flip_probability(
            ChannelSpec((RandomFlip(0.2),)), n, np.random.default_rng(12)
        )
        assert abs(est - 0.2) < 3 * np.sqrt(0.2 * 0.8 / n)

    def test_awgn_matches_quadrature_oracle(self):
        # error probability for a half-normal magnitude under N(0, sigma^2):
        # integral over x>0 of 2*phi(x)*Phi(-x/sigma) dx
        sigma = 1.0
        oracle = quad(lambda x: 2 * norm.pdf(x) * norm.cdf(-x / sigma), 0, 40)[0]
        n = 200_000
        est = effective_flip_probability(
            ChannelSpec((Awgn(sigma),)), n, np.random.default_rng(13)
        )
        assert abs(est - oracle) < 3 * np.sqrt(oracle * (1 - oracle) / n)

    def test_trials_guard(self):
        with pytest.raises(InvalidSpec):
            effective_flip_probability(ChannelSpec(), 0, np.random.default_rng(14))


class TestJson:
    def test_roundtrip(self):
        spec = ChannelSpec((Awgn(0.5), RandomFlip(0.12), Burst(0, 4096, 0.5), Drop(0.25)))
        obj = to_json_obj(spec)
        assert obj[0] == {"type": "awgn", "sigma": 0.5}
        assert from_json_obj(obj) == spec
        assert from_json(to_json(spec)) == spec
        assert from_json(json.dumps(obj)) == spec

    def test_bad_entries(self):
        with pytest.raises(InvalidSpec):
            from_json_obj({"type": "awgn"})
        with pytest.raises(InvalidSpec):
            from_json_obj([{"type": "squash", "p": 0.1}])
        with pytest.raises(InvalidSpec):
            from_json_obj([{"type": "awgn", "nope": 1}])
        with pytest.raises(InvalidSpec):
            from_json_obj([{"p": 0.1}])
