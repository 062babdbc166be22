import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from fibcq.errors import DomainError, UnsupportedError
from fibcq.fibbinary import fibbinary_mask
from fibcq.quantizer import (
    AffineParams,
    QuantizedTensor,
    Scheme,
    apply_fcq,
    dequantize,
    mse,
    quantize_uniform,
    reconstruct,
    round_half_away,
)


def test_round_half_away():
    assert list(round_half_away(np.array([0.5, 1.5, -0.5, -1.5, 2.4, -2.6]))) == [1, 2, -1, -2, 2, -3]


def test_quantize_8bit_example():
    q = quantize_uniform([0.0, 0.5, 1.0], 8)
    assert list(q.codes) == [0, 128, 255]
    assert q.params.scale == pytest.approx(1 / 255)
    assert q.params.zero_point == 0
    assert q.scheme is Scheme.UNIFORM


def test_quantize_constant_tensor():
    q = quantize_uniform([2.0, 2.0], 8)
    assert list(q.codes) == [0, 0]
    assert (q.params.scale, q.params.zero_point, q.params.minimum) == (1.0, 0, 2.0)
    assert list(dequantize(q)) == [0.0, 0.0]


def test_quantize_16bit_endpoints():
    q = quantize_uniform([-1.0, 1.0], 16)
    assert list(q.codes) == [0, 65535]
    assert q.codes.dtype == np.uint16


@pytest.mark.parametrize("bad", [[], [1.0, np.nan], [np.inf]])
def test_quantize_domain_errors(bad):
    with pytest.raises(DomainError):
        quantize_uniform(bad, 8)


def test_quantize_rejects_bitwidth():
    with pytest.raises(DomainError):
        quantize_uniform([0.0, 1.0], 12)


def test_dequantize_examples():
    p = AffineParams(1 / 255, 0, 8)
    assert dequantize(QuantizedTensor("t", (1,), [0], p))[0] == 0.0
    assert dequantize(QuantizedTensor("t", (1,), [255], p))[0] == pytest.approx(1.0)


def test_round_trip_16bit_half_step():
    x = np.array([0.0, 0.5, 1.0])
    q = quantize_uniform(x, 16)
    assert np.all(np.abs(dequantize(q) - x) <= q.params.scale / 2 + 1e-15)


@settings(max_examples=200)
@given(
    arrays(np.float64, st.integers(2, 64), elements=st.floats(-1e3, 1e3, allow_nan=False)),
    st.sampled_from([8, 16]),
)
def test_round_trip_error_bound(x, bits):
    q = quantize_uniform(x, bits)
    if x.max() == x.min():
        return
    err = np.abs(dequantize(q) - x)
    # only elements whose unclamped code lands inside the code range
    raw = round_half_away(x / q.params.scale) + q.params.zero_point
    in_range = (raw >= 0) & (raw <= q.params.qmax)
    slack = 1e-9 * max(1.0, np.abs(x).max())
    assert np.all(err[in_range] <= q.params.scale / 2 + slack)


def test_zero_excluding_tensor_saturates():
    # the zero point is clamped to the code range, so [1, 2] cannot be represented
    q = quantize_uniform([1.0, 2.0], 8)
    assert q.params.zero_point == 0
    assert list(q.codes) == [255, 255]


def test_apply_fcq_examples():
    p = AffineParams(0.01, 128, 8)
    q = QuantizedTensor("w", (3,), [3, 7, 200], p)
    f = apply_fcq(q)
    assert list(f.codes) == [2, 8, 170]
    assert f.scheme is Scheme.FCQ
    assert (f.name, f.shape, f.params) == (q.name, q.shape, q.params)
    same = apply_fcq(QuantizedTensor("w", (3,), [0, 5, 170], p))
    assert list(same.codes) == [0, 5, 170]
    assert mse(dequantize(same), dequantize(QuantizedTensor("w", (3,), [0, 5, 170], p))) == 0.0
    assert mse(dequantize(f), dequantize(q)) > 0


def test_apply_fcq_rejects():
    q16 = quantize_uniform([0.0, 1.0], 16)
    with pytest.raises(UnsupportedError):
        apply_fcq(q16)
    f = apply_fcq(quantize_uniform([0.0, 1.0], 8))
    with pytest.raises(UnsupportedError):
        apply_fcq(f)


def test_fcq_tensor_invariant_enforced():
    with pytest.raises(DomainError):
        QuantizedTensor("w", (1,), [3], AffineParams(1.0, 0, 8), Scheme.FCQ)


def test_fcq_outputs_all_codes_fibbinary():
    q = QuantizedTensor("w", (256,), np.arange(256), AffineParams(1.0, 0, 8))
    assert fibbinary_mask(apply_fcq(q).codes).all()


def test_mse_examples():
    x = np.arange(5.0)
    assert mse(x, x) == 0
    assert mse([0, 0], [1, 1]) == 1
    with pytest.raises(DomainError):
        mse([0, 0], [1, 1, 1])


def test_mse_noise_model_16bit():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 200_000)
    q = quantize_uniform(x, 16)
    err = mse(x, dequantize(q))
    s2 = q.params.scale**2
    assert err <= s2 / 4
    assert s2 / 24 <= err <= s2 / 6


def test_mse_ordering():
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, 10_000)
    q8 = quantize_uniform(x, 8)
    m16 = mse(x, dequantize(quantize_uniform(x, 16)))
    m8 = mse(x, dequantize(q8))
    mf = mse(x, dequantize(apply_fcq(q8)))
    assert m16 < m8 < mf


def test_reconstruct_restores_constant_tensors():
    q = quantize_uniform([0.7, 0.7, 0.7], 8)
    assert list(dequantize(q).ravel()) == [0.0] * 3
    assert list(reconstruct(q).ravel()) == [0.7] * 3
    r = quantize_uniform([-1.0, 0.0, 1.0], 8)
    assert np.array_equal(reconstruct(r), dequantize(r))
