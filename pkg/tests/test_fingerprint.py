import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binaryshield.errors import CorruptPayload, DimensionMismatch
from binaryshield.fingerprint import (BinaryFingerprint, DenseEmbedding,
                                      PrivacyBudget, expected_self_distortion,
                                      flip_probability, hamming,
                                      keep_probability, pack_bits, packed_length,
                                      quantize, randomize, random_fingerprint,
                                      unpack_bits)

from conftest import naive_hamming_bits

# frozen with 50-digit arithmetic: e^2 / (e^2 + 1)
KEEP_P_ALPHA2 = 0.8807970779778823


def _embedding(values, model="test"):
    return DenseEmbedding(values=np.asarray(values, dtype=np.float64),
                          model_id=model, dim=len(values))


class TestQuantize:
    def test_sign_rule_with_zero(self):
        fp = quantize(_embedding([0.3, -1.2, 0.0, 2.5]))
        assert unpack_bits(fp.bits, 4).tolist() == [1, 0, 0, 1]

    def test_all_negative_768_gives_zero_payload(self):
        fp = quantize(_embedding([-1.0] * 768))
        assert fp.bits == b"\x00" * 96

    def test_seeded_normal_popcount_near_half(self):
        # sign symmetry of the generator: popcount ~ Binomial(768, 1/2),
        # 4 sigma = 4 * sqrt(768)/2 ~ 55
        rng = np.random.Generator(np.random.Philox(key=99))
        fp = quantize(_embedding(rng.standard_normal(768)))
        assert abs(fp.popcount() - 384) <= 55

    def test_rejects_non_finite_with_index(self):
        values = np.zeros(8)
        values[5] = np.nan
        with pytest.raises(ValueError, match="index 5"):
            _embedding(values)

    def test_popcount_equals_positive_coordinate_count(self):
        rng = np.random.Generator(np.random.Philox(key=100))
        values = rng.standard_normal(200)
        fp = quantize(_embedding(values))
        assert fp.popcount() == int((values > 0).sum())

    @given(st.floats(min_value=1e-6, max_value=1e6,
                     allow_nan=False, allow_infinity=False))
    @settings(max_examples=30)
    def test_positive_scaling_invariance(self, scale):
        rng = np.random.Generator(np.random.Philox(key=101))
        values = rng.standard_normal(64)
        assert quantize(_embedding(values * scale)).bits == \
            quantize(_embedding(values)).bits


class TestKeepProbability:
    def test_paper_operating_point(self):
        assert round(keep_probability(0.25), 3) == 0.562

    def test_alpha_two_high_precision(self):
        assert keep_probability(2.0) == pytest.approx(KEEP_P_ALPHA2, abs=1e-15)

    def test_limits(self):
        assert keep_probability(1e-9) == pytest.approx(0.5, abs=1e-9)
        assert keep_probability(100.0) == pytest.approx(1.0, abs=1e-12)
        assert 0.5 < keep_probability(0.01) < keep_probability(3.0) < 1.0

    def test_rejects_nonpositive_alpha(self):
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                keep_probability(bad)

    def test_flip_probability_no_overflow(self):
        assert flip_probability(2.0) == pytest.approx(1 - KEEP_P_ALPHA2, abs=1e-15)
        assert flip_probability(5000.0) == 0.0


class TestExpectedSelfDistortion:
    def test_spot_values(self):
        assert expected_self_distortion(0.2, 768) == pytest.approx(345.73, abs=0.01)
        assert expected_self_distortion(1.0, 768) == pytest.approx(206.547, abs=0.001)
        assert expected_self_distortion(2.0, 768) == pytest.approx(91.55, abs=0.01)

    def test_vanishes_for_large_alpha(self):
        assert expected_self_distortion(50.0, 768) < 1e-10

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            expected_self_distortion(1.0, 0)


class TestRandomize:
    def _fp(self, seed=7, dim=768):
        return random_fingerprint(dim, seed)

    def test_deterministic_given_same_inputs(self):
        fp = self._fp()
        assert randomize(fp, 1.0, 42).bits == randomize(fp, 1.0, 42).bits

    def test_different_seeds_differ(self):
        fp = self._fp()
        assert randomize(fp, 1.0, 1).bits != randomize(fp, 1.0, 2).bits

    def test_huge_alpha_is_identity(self):
        fp = self._fp()
        for seed in (0, 1, 2**63, 2**64 - 1):
            assert randomize(fp, 50.0, seed).bits == fp.bits

    def test_draw_order_contract(self):
        # reimplement the documented contract bit by bit: Philox(seed),
        # d float64 draws in index order, keep iff u < p (strict)
        fp = self._fp(dim=75)
        alpha, seed = 0.8, 12345
        p = keep_probability(alpha)
        u = np.random.Generator(np.random.Philox(key=seed)).random(75)
        bits = unpack_bits(fp.bits, 75)
        expected = np.array([b if u[i] < p else 1 - b
                             for i, b in enumerate(bits)], dtype=np.uint8)
        got = randomize(fp, alpha, seed)
        assert unpack_bits(got.bits, 75).tolist() == expected.tolist()

    def test_mean_distortion_tracks_theory(self):
        fp = self._fp()
        n = 200
        dists = [hamming(fp, randomize(fp, 1.0, s)) for s in range(n)]
        theory = expected_self_distortion(1.0, 768)
        p = keep_probability(1.0)
        stderr = math.sqrt(768 * p * (1 - p) / n)
        assert abs(np.mean(dists) - theory) <= 4 * stderr

    def test_carries_alpha_and_seed(self):
        out = randomize(self._fp(), PrivacyBudget(2.0), 9)
        assert out.alpha.alpha == 2.0
        assert out.noise_seed == 9
        assert out.dim == 768

    def test_rejects_bad_seed(self):
        with pytest.raises(ValueError, match="uint64"):
            randomize(self._fp(), 1.0, -1)


class TestHamming:
    def test_identical_is_zero(self):
        fp = random_fingerprint(768, 5)
        assert hamming(fp, fp) == 0

    def test_four_bit_example(self):
        a = BinaryFingerprint(bits=pack_bits([1, 0, 1, 1]), dim=4)
        b = BinaryFingerprint(bits=pack_bits([1, 1, 1, 0]), dim=4)
        assert hamming(a, b) == 2

    def test_random_pair_mean_near_half_dim(self):
        dists = [hamming(random_fingerprint(768, 2 * i),
                         random_fingerprint(768, 2 * i + 1)) for i in range(200)]
        assert abs(np.mean(dists) - 384) <= 4 * 13.86 / math.sqrt(200)

    def test_dimension_mismatch_names_both(self):
        a = random_fingerprint(768, 1)
        b = random_fingerprint(512, 2)
        with pytest.raises(DimensionMismatch, match="768 vs 512"):
            hamming(a, b)

    def test_mixed_types_allowed(self):
        fp = random_fingerprint(64, 3)
        priv = randomize(fp, 2.0, 4)
        assert hamming(fp, priv) == naive_hamming_bits(fp.bits, priv.bits, 64)

    @given(st.integers(min_value=1, max_value=200), st.data())
    @settings(max_examples=50)
    def test_metric_properties(self, dim, data):
        seeds = data.draw(st.tuples(*[st.integers(0, 2**32)] * 3))
        a, b, c = (random_fingerprint(dim, s) for s in seeds)
        assert hamming(a, b) == hamming(b, a)
        assert (hamming(a, b) == 0) == (a.bits == b.bits)
        assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


class TestPacking:
    def test_nine_bit_example(self):
        assert pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 1]) == bytes([0x01, 0x01])

    def test_768_payload_length(self):
        assert packed_length(768) == 96
        assert len(pack_bits([0] * 768)) == 96

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=900))
    @settings(max_examples=80)
    def test_roundtrip_identity(self, bits):
        assert unpack_bits(pack_bits(bits), len(bits)).tolist() == bits

    def test_nonzero_padding_rejected(self):
        with pytest.raises(CorruptPayload, match="padding"):
            unpack_bits(b"\xff", 3)

    def test_wrong_length_rejected(self):
        with pytest.raises(CorruptPayload, match="expected"):
            unpack_bits(b"\x00\x00", 3)

    def test_non_binary_values_rejected(self):
        with pytest.raises(ValueError):
            pack_bits([0, 2, 1])


class TestTypes:
    def test_embedding_length_validation(self):
        with pytest.raises(DimensionMismatch):
            DenseEmbedding(values=np.zeros(3), model_id="m", dim=4)

    def test_embedding_values_readonly(self):
        e = _embedding([1.0, -1.0])
        with pytest.raises(ValueError):
            e.values[0] = 5.0

    def test_privacy_budget_validation(self):
        with pytest.raises(ValueError):
            PrivacyBudget(0.0)
        assert PrivacyBudget.of(1.5).alpha == 1.5
        assert PrivacyBudget.of(PrivacyBudget(2.0)).alpha == 2.0

    def test_fingerprint_padding_validation(self):
        with pytest.raises(CorruptPayload):
            BinaryFingerprint(bits=b"\xff", dim=3)
