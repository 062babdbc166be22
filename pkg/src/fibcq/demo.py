"""End-to-end INQ runs on the toy network, plus a synthetic degradation fixture."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inq import InqResult, RefinementPolicy, mixed_policy_run, run_inq
from .quantizer import Scheme
from .toynet import TrainConfig, pretrained_network, retrain_hook_for, validation_loss

FORCED_TENSORS = tuple(f"t{i:02d}" for i in range(18))
# tensors 13 and 14 each cost 8%; together they cross a 10% threshold
FORCED_PENALTY = {"t13": 1.08, "t14": 1.08}


def forced_degradation_fixture(seed: int = 0):
    """18 weight tensors whose metric jumps when t13 and t14 are quantized in one step.

    Returns ``(params, weight_ids, metric, hook)``. The hook is a no-op, so the
    metric only reflects which tensors currently hold quantized values. Under
    the default schedule the fifth fraction (t10..t14) degrades, its third
    subfraction (t13, t14) degrades again, and the two singletons pass.
    """
    rng = np.random.default_rng(seed)
    params = {t: rng.normal(size=(4, 4)) for t in FORCED_TENSORS}
    original = {t: v.copy() for t, v in params.items()}

    def metric(p):
        value = 1.0
        for t in FORCED_TENSORS:
            if not np.array_equal(p[t], original[t]):
                value *= FORCED_PENALTY.get(t, 1.0)
        return value

    def hook(p, masks, steps):
        return p

    return params, list(FORCED_TENSORS), metric, hook


@dataclass
class DemoOutcome:
    result: InqResult
    float_loss: float
    final_loss: float
    baseline_loss: float

    def summary(self) -> str:
        fib = sum(1 for q in self.result.frozen.values() if q.scheme is Scheme.FCQ)
        return (
            f"record=inq_summary float_loss={self.float_loss:.6g} final_loss={self.final_loss:.6g} "
            f"constant_baseline={self.baseline_loss:.6g} frozen={len(self.result.frozen)} fcq_tensors={fib} "
            f"events={len(self.result.events)}"
        )


def toy_inq(seed: int = 0, tau: float = 0.10, steps: int = 1000, mixed_split: int | None = None,
            pretrain_steps: int = 5000) -> DemoOutcome:
    net, task, _ = pretrained_network(seed, pretrain_steps)
    metric = lambda p: validation_loss(net, task, p)  # noqa: E731
    hook = retrain_hook_for(net, task, TrainConfig(seed=seed))
    policy = RefinementPolicy(tau=tau, retrain_steps=steps)
    if mixed_split is None:
        result = run_inq(net.params, net.weight_names, metric, hook, scheme=Scheme.FCQ, policy=policy)
    else:
        result = mixed_policy_run(net.params, net.weight_names, mixed_split, metric, hook, policy)
    return DemoOutcome(result, metric(net.params), metric(result.params), task.baseline_loss())


def forced_inq(tau: float = 0.10) -> InqResult:
    params, ids, metric, hook = forced_degradation_fixture()
    return run_inq(params, ids, metric, hook, policy=RefinementPolicy(tau=tau))


def parse_tau(text: str) -> float:
    value = float(text)
    if math.isnan(value) or value <= 0:
        raise ValueError(f"tau must be positive, got {text}")
    return value
