from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from marsit.compressor import (AggregateSign, SsdmPacket, elias_gamma_length, inverted_merge_probability,
                               keep_received_fraction, merge_signs, ssdm_compress, ssdm_decompress,
                               ssdm_probabilities, ssdm_quantize, sum_code_bits, transient_vector, zigzag)
from marsit.errors import ParameterError, ProtocolError
from marsit.rng import RngStream
from marsit.vectorcore import PackedSignVector

bitvecs = st.integers(1, 200).flatmap(lambda n: st.tuples(
    arrays(bool, n), arrays(bool, n), st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32)))


def agg(bits, count=1):
    return AggregateSign(PackedSignVector.from_bits(bits), count)


def test_merge_truth_table():
    recv = agg([0, 0, 1, 1])
    local = agg([0, 1, 0, 1])
    m = merge_signs(recv, local, RngStream(0))
    b = m.bits.bits()
    assert m.count == 2
    assert not b[0] and b[3]  # agreement is kept verbatim


def test_merge_length_mismatch():
    with pytest.raises(ProtocolError):
        merge_signs(agg([1, 0]), agg([1]), RngStream(0))


def test_keep_fraction_and_fault_hook():
    assert keep_received_fraction(3, 1) == Fraction(3, 4)
    with inverted_merge_probability():
        assert keep_received_fraction(3, 1) == Fraction(1, 4)
    assert keep_received_fraction(3, 1) == Fraction(3, 4)


def test_aggregate_count_must_be_positive():
    with pytest.raises(ParameterError):
        agg([1], 0)


@given(bitvecs)
def test_merge_is_bitwise_formula(case):
    a, b, ca, cb, seed = case
    recv, local, rng = agg(a, ca), agg(b, cb), RngStream(seed)
    v = np.unpackbits(transient_vector(recv, local, rng), count=len(a), bitorder="little").astype(bool)
    m = merge_signs(recv, local, rng)
    np.testing.assert_array_equal(m.bits.bits(), (a & b) | ((a ^ b) & v))
    assert m.count == ca + cb
    # agreeing coordinates pass through unchanged
    np.testing.assert_array_equal(m.bits.bits()[a == b], a[a == b])


def test_transient_uses_fixed_counters():
    # lazily drawn transient equals a fully pre-drawn vector restricted to disagreements
    n = 64
    rng = RngStream(5, worker_id=3)
    a = np.arange(n) % 3 == 0
    b = np.arange(n) % 2 == 0
    full = rng.uniforms(n) < 0.5
    v = np.unpackbits(transient_vector(agg(a), agg(b), rng), count=n, bitorder="little").astype(bool)
    d = a ^ b
    np.testing.assert_array_equal(v[d], np.where(full[d], a[d], b[d]))


def test_ssdm_probabilities_range_and_zero():
    p = ssdm_probabilities(np.array([3.0, -4.0]))
    np.testing.assert_allclose(p, [0.5 + 0.3, 0.5 - 0.4])
    np.testing.assert_array_equal(ssdm_probabilities(np.zeros(3)), [0.5] * 3)


def test_ssdm_compress_matches_quantize():
    v = np.array([1.0, -2.0, 0.5, 0.0, 3.0])
    rng = RngStream(9, worker_id=1)
    q = ssdm_quantize(v, rng.uniforms(len(v)))
    np.testing.assert_array_equal(ssdm_decompress(ssdm_compress(v, rng)), q)


def test_ssdm_packet_validation():
    with pytest.raises(ParameterError):
        SsdmPacket(-1.0, PackedSignVector.from_bits([1]))
    with pytest.raises(ParameterError):
        SsdmPacket(float("inf"), PackedSignVector.from_bits([1]))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-10, 10)), st.integers(0, 2**32))
def test_ssdm_unbiased(v, seed):
    n = 40_000
    gen = np.random.default_rng(seed)
    q = ssdm_quantize(np.broadcast_to(v, (n, len(v))), gen.random((n, len(v))))
    se = np.linalg.norm(v) / np.sqrt(n)
    assert np.all(np.abs(q.mean(axis=0) - v) <= 5 * se + 1e-12)
    assert np.allclose(np.abs(q), np.linalg.norm(v))


def test_elias_gamma_lengths():
    assert [elias_gamma_length(n) for n in (1, 2, 3, 4, 7, 8, 1023, 1024)] == [1, 3, 3, 5, 5, 7, 19, 21]
    with pytest.raises(ParameterError):
        elias_gamma_length(0)


@given(st.lists(st.integers(-2**40, 2**40), min_size=1, max_size=50))
def test_sum_code_bits_matches_scalar(sums):
    s = np.array(sums)
    z = zigzag(s)
    assert np.all(z >= 0)
    assert sum_code_bits(s) == sum(elias_gamma_length(int(x) + 1) for x in z)


def test_zigzag_order():
    np.testing.assert_array_equal(zigzag([0, -1, 1, -2, 2]), [0, 1, 2, 3, 4])
