import numpy as np
import pytest
from fractions import Fraction

from sidlab.channel import ChannelParams, transmit
from sidlab.conv_codec import DEFAULT_RSC, bcjr_decode
from sidlab.turbo_codec import (
    DEFAULT_TURBO,
    TurboSpec,
    deinterleave,
    interleave,
    interleaver_permutation,
    turbo_decode,
    turbo_decode_all,
    turbo_decode_trace,
    turbo_encode,
)


def test_interleave_hand_example():
    assert "".join(interleave(list("abcdef"), 3)) == "adbecf"


def test_interleaver_is_bijection_for_all_lengths():
    for n in range(1, 401):
        perm = interleaver_permutation(n, 17)
        assert np.array_equal(np.sort(perm), np.arange(n))
        x = np.arange(n)
        assert np.array_equal(deinterleave(interleave(x, 17), 17), x)


def test_interleave_constant():
    assert np.array_equal(interleave(np.ones(50), 17), np.ones(50))


def test_encode_shape_and_systematic_stream():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 320)
    out = turbo_encode(bits)
    assert out.size == 3 * 320 + 4 == DEFAULT_TURBO.coded_length(320)
    assert np.array_equal(out[: 3 * 320 : 3], bits)
    assert not turbo_encode(np.zeros(64, dtype=int)).any()


def test_encode_rejects_empty():
    with pytest.raises(ValueError):
        turbo_encode([])


def test_spec_validation():
    with pytest.raises(ValueError):
        TurboSpec(iterations=0)
    with pytest.raises(ValueError):
        TurboSpec(constituent=DEFAULT_RSC.__class__())  # feedforward


def test_decode_rejects_bad_length():
    with pytest.raises(ValueError):
        turbo_decode(np.zeros(3 * 10 + 3))


@pytest.mark.parametrize("k", [1, 5, 17, 40, 320])
def test_noiseless_decode_exact_every_iteration(k):
    bits = np.random.default_rng(k).integers(0, 2, k)
    llrs = 4.0 * (1 - 2.0 * turbo_encode(bits))
    for post in turbo_decode_all(llrs):
        assert np.array_equal(post < 0, bits.astype(bool))


def test_first_half_iteration_is_plain_bcjr():
    rng = np.random.default_rng(9)
    k = 30
    bits = rng.integers(0, 2, k)
    llrs = transmit(turbo_encode(bits), ChannelParams(1.0, Fraction(1, 3), 2), 0)
    body = llrs[: 3 * k].reshape(k, 3)
    tail = llrs[3 * k:].reshape(-1, 2)
    own_obs = np.concatenate([body[:, :2], tail]).reshape(-1)

    first = turbo_decode_trace(llrs)[0]
    plain = bcjr_decode(own_obs, DEFAULT_RSC)
    assert np.allclose(first.post1[0], plain, atol=1e-12)
    assert np.allclose(first.extrinsic12[0], plain - body[:, 0], atol=1e-12)


def test_extrinsic_terms_add_up():
    rng = np.random.default_rng(4)
    k = 50
    llrs = transmit(turbo_encode(rng.integers(0, 2, k)), ChannelParams(1.5, Fraction(1, 3), 2), 1)
    sys = llrs[: 3 * k : 3]
    for t in turbo_decode_trace(llrs):
        assert np.allclose(t.posterior[0], sys + t.extrinsic12[0] + t.extrinsic21[0], atol=1e-9)


@pytest.mark.slow
def test_iterations_reduce_ber_at_2db():
    k, blocks = 320, 1000
    rng = np.random.default_rng(2)
    info = rng.integers(0, 2, (blocks, k))
    params = ChannelParams(2.0, Fraction(1, 3), 5)
    llrs = np.stack([transmit(turbo_encode(b), params, i) for i, b in enumerate(info)])
    history = turbo_decode_all(llrs)
    ber = [np.mean((h < 0) != info) for h in history]
    assert ber[2] <= ber[0]
