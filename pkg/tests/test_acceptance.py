"""Acceptance criteria, one test each, at the stated tolerances.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from fibcq import container as fqz
from fibcq.cli import sample_weights_bytes
from fibcq.codec import (
    IndexSequence,
    compress_grouped,
    compress_sequence,
    compression_ratio,
    compression_report,
    word_count_compress,
    word_count_decompress,
    word_length_compress,
)
from fibcq.demo import forced_inq
from fibcq.errors import ContainerFormatError
from fibcq.fibbinary import fibbinary_mask, fibbinary_table, index_to_value, value_to_index
from fibcq.hwmodel import build_array, cost_report, discover_replaceable, fibbinary_operand_grid, or_multiply
from fibcq.inq import RefinementPolicy, one_shot_ptq, run_inq
from fibcq.pipeline import is_fcq_entry, quantize_container
from fibcq.quantizer import Scheme, dequantize, mse, quantize_fcq, quantize_uniform
from fibcq.toynet import TrainConfig, gradients, loss, pretrained_network, retrain_hook_for, validation_loss

from oracles import brute_fibbinary, fib_sequence

FIXTURES = Path(__file__).parent / "fixtures"
criterion = pytest.mark.criterion


@pytest.fixture(scope="module")
def toy():
    return pretrained_network(0)


@criterion("AC1", "fibbinary census: |table(b)| = Fib(b+2) for b = 1..12, 55 at b = 8, < 1 s")
def test_ac01_census():
    start = time.perf_counter()
    fib = fib_sequence(16)  # fib[k - 1] = F(k), F(1) = F(2) = 1
    for b in range(1, 13):
        brute = brute_fibbinary(b)
        table = fibbinary_table.__wrapped__(b)
        assert list(table.values) == brute
        assert len(brute) == fib[b + 1]
    assert len(fibbinary_table(8).values) == 55
    assert time.perf_counter() - start < 1.0


@criterion("AC2", "Zeckendorf bijection over all 55 ranks, monotone, 54 <-> 170")
def test_ac02_bijection():
    table = fibbinary_table(8)
    values = [index_to_value(r, table) for r in range(55)]
    assert all(value_to_index(v, table) == r for r, v in enumerate(values))
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values == brute_fibbinary(8)
    assert index_to_value(54, table) == 170 and value_to_index(170, table) == 54


def _random_ranks(rng, n, skewed):
    if not skewed:
        return rng.integers(0, 55, size=n)
    a, b = rng.choice(55, size=2, replace=False)
    p_ab = rng.uniform(0.3, 0.95)
    split = rng.uniform(0.5, 0.9)
    kind = rng.random(n)
    out = rng.integers(0, 55, size=n)
    out[kind < p_ab * split] = a
    out[(kind >= p_ab * split) & (kind < p_ab)] = b
    # lengthen runs by repeating each symbol a random number of times
    reps = rng.integers(1, 6, size=n)
    return np.repeat(out, reps)[:n]


@criterion("AC3", "codec lossless on >= 1e4 random tensors, per-tensor and grouped, < 60 s")
def test_ac03_codec_lossless():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    count = 10_000
    lengths = np.floor(np.exp(rng.uniform(0, np.log(10_001), size=count))).astype(int) - 1
    lengths[:3] = [0, 1, 10_000]
    seqs = [IndexSequence(_random_ranks(rng, n, skewed=bool(i % 2))) for i, n in enumerate(lengths)]
    for seq in seqs:
        assert word_count_decompress(compress_sequence(seq)) == seq
    for k in (3, 7):
        streams = compress_grouped(seqs, k)
        assert all(word_count_decompress(s) == seq for s, seq in zip(streams, seqs))
    assert time.perf_counter() - start < 60.0


@criterion("AC4", "codec worked examples reproduce the expected octets")
def test_ac04_worked_examples():
    assert list(word_count_compress([5, 12], 5, 7).codewords) == [0x4C]
    assert list(word_count_compress([5, 5, 5, 9, 12, 5, 7, 7], 5, 7).codewords) == [0xC3, 0x09, 0x0C, 0xF3, 0xE1]
    assert list(word_count_compress([5] * 20, 5, 7).codewords) == [0xCF, 0xC5]


@criterion("AC5a", "CR formula: UL=1843840, CL=1160744, 8-bit words -> 1.59")
def test_ac05a_cr_formula():
    assert round(compression_ratio(1843840, 8, 1160744, 8), 2) == 1.59


def _sample_fcq_sequences():
    src = fqz.read(sample_weights_bytes())
    out, _ = quantize_container(src, "fcq8")
    entries = sorted((e for e in out if is_fcq_entry(e)), key=lambda e: e.name)
    return [word_length_compress(e.to_array().ravel(), e.name) for e in entries]


@criterion("AC5b", "grouping: CR(k=3) >= CR(k=1) on bundled FCQ toy weights")
def test_ac05b_grouping_does_not_hurt():
    seqs = _sample_fcq_sequences()
    sizes = [len(s) for s in seqs]
    cr1 = compression_report(sizes, compress_grouped(seqs, 1)).CR
    cr3 = compression_report(sizes, compress_grouped(seqs, 3)).CR
    assert cr3 >= cr1, f"CR(k=3) = {cr3:.4f} < CR(k=1) = {cr1:.4f}"


@criterion("AC6", "cost model: n=8, 28 replaced -> 58 / 44 / 45 percent")
def test_ac06_cost_model():
    rep = cost_report(8, 28)
    assert (rep.percent(rep.replaced_fraction), rep.percent(rep.area_saving), rep.percent(rep.power_saving)) == (58, 44, 45)


@criterion("AC7", "OR multiplier exact on 55 x 256 fibbinary pairs; exact array on 256 x 256; < 30 s")
def test_ac07_or_multiplier():
    start = time.perf_counter()
    array = build_array(8)
    replaceable = discover_replaceable(array)
    assert replaceable
    w, x = fibbinary_operand_grid(8)
    assert np.array_equal(or_multiply(array.with_replacements(replaceable), w, x), w * x)
    ww, xx = np.meshgrid(np.arange(256), np.arange(256), indexing="ij")
    assert np.array_equal(or_multiply(array, ww, xx), ww * xx)
    assert time.perf_counter() - start < 30.0


@criterion("AC8", "INQ on the toy net: all frozen + fibbinary, stable snapshots, tau=inf equals PTQ")
def test_ac08_inq_invariants(toy):
    net, task, _ = toy
    metric = lambda p: validation_loss(net, task, p)  # noqa: E731
    hook = retrain_hook_for(net, task, TrainConfig(seed=0))
    result = run_inq(net.params, net.weight_names, metric, hook, policy=RefinementPolicy(retrain_steps=300))
    assert set(result.frozen) == set(net.weight_names)
    assert all(q.scheme is Scheme.FCQ and fibbinary_mask(q.codes).all() for q in result.frozen.values())
    committed = {}
    for e in result.events:
        for name, codes in committed.items():
            assert e.snapshot[name] == codes
        if e.kind == "quantize" and e.action != "rollback":
            committed.update({t: e.snapshot[t] for t in e.tensors})
    assert len(result.quantization_events()) <= 2 * len(net.weight_names)

    noop = lambda p, masks, steps: p  # noqa: E731
    inf = run_inq(net.params, net.weight_names, metric, noop, policy=RefinementPolicy(tau=math.inf))
    assert inf.frozen == one_shot_ptq(net.params, net.weight_names, Scheme.FCQ)


@criterion("AC9", "forced degradation: rollback, 1+2+2 split, then singletons")
def test_ac09_refinement():
    result = forced_inq()
    actions = [(e.kind, e.tensors, e.action) for e in result.events]
    frac = ("t10", "t11", "t12", "t13", "t14")
    i = actions.index(("rollback", frac, "split:1+2+2"))
    assert actions[i - 1] == ("quantize", frac, "rollback")
    assert [a[1] for a in actions[i + 1 : i + 4]] == [("t10",), ("t11", "t12"), ("t13", "t14")]
    assert actions[i + 4] == ("rollback", ("t13", "t14"), "split:1+1")
    assert [a[1] for a in actions[i + 5 : i + 7]] == [("t13",), ("t14",)]


@criterion("AC10", "analytic vs central-difference gradients, rel. error < 1e-4 on 100 params")
def test_ac10_gradients(toy):
    net, task, _ = toy
    x, y = task.x_train[:256], task.y_train[:256]
    _, grads = gradients(net, x, y)
    rng = np.random.default_rng(5)
    names = sorted(net.params)
    eps = 1e-6
    for _ in range(100):
        name = names[rng.integers(len(names))]
        idx = tuple(int(rng.integers(s)) for s in net.params[name].shape)
        hi = {k: v.copy() for k, v in net.params.items()}
        lo = {k: v.copy() for k, v in net.params.items()}
        hi[name][idx] += eps
        lo[name][idx] -= eps
        numeric = (loss(net, x, y, hi) - loss(net, x, y, lo)) / (2 * eps)
        analytic = grads[name][idx]
        assert abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8) < 1e-4, (name, idx)


@criterion("AC11", "container golden fixtures round-trip; 1e4 truncations give structured errors")
def test_ac11_container():
    blobs = [bytes.fromhex(p.read_text()) for p in sorted(FIXTURES.glob("*.hex"))]
    assert len(blobs) >= 3
    for blob in blobs:
        assert fqz.write(fqz.read(blob)) == blob
    rng = np.random.default_rng(9)
    nonempty = [b for b in blobs if len(b) > 9]
    for _ in range(10_000):
        blob = nonempty[rng.integers(len(nonempty))]
        cut = int(rng.integers(0, len(blob)))
        with pytest.raises(ContainerFormatError) as exc:
            fqz.read(blob[:cut])
        assert isinstance(exc.value.offset, int)


@criterion("AC12", "noise ordering MSE16 < MSE8 < MSE_FCQ and MSE16 <= scale^2/4")
def test_ac12_noise_ordering():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-1, 1, size=4096)
        q16, q8, qf = quantize_uniform(x, 16), quantize_uniform(x, 8), quantize_fcq(x)
        m16, m8, mf = mse(x, dequantize(q16)), mse(x, dequantize(q8)), mse(x, dequantize(qf))
        assert m16 < m8 < mf
        assert np.max((x - dequantize(q16)) ** 2) <= q16.params.scale**2 / 4 * (1 + 1e-9)
