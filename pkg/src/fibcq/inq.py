"""Incremental network quantization at tensor granularity.

The scheduler walks an ordered list of fractions (disjoint groups of weight
tensors). For each fraction it quantizes the group, freezes it, lets a
caller-supplied hook retrain whatever is still floating, and compares the
validation metric against its value just before the fraction. If the
relative increase exceeds ``tau`` the fraction is rolled back and re-run as
smaller subfractions: the policy's split pattern first (1 + 2 + 2 by
default), singletons after that.

Frozen tensors are written back into the parameter dict in dequantized form,
so the network stays a float network that happens to carry quantized values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, DomainError
from .quantizer import QuantizedTensor, Scheme, quantize_fcq, quantize_uniform, reconstruct

Params = dict
RetrainHook = Callable[[Params, dict, int], Params]
Metric = Callable[[Params], float]


@dataclass(frozen=True)
class FractionSchedule:
    fractions: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        seen: set = set()
        for frac in self.fractions:
            if not frac:
                raise DomainError("empty fraction in schedule")
            overlap = seen.intersection(frac)
            if overlap or len(set(frac)) != len(frac):
                raise DomainError(f"fractions overlap on {sorted(overlap) or frac}")
            seen.update(frac)

    @property
    def tensors(self) -> list[str]:
        return [t for frac in self.fractions for t in frac]

    @property
    def sizes(self) -> list[int]:
        return [len(f) for f in self.fractions]


def default_schedule(tensor_ids: Sequence[str]) -> FractionSchedule:
    """Fractions of size 1, 2, 3, ... in layer order; the last takes the remainder."""
    ids = list(tensor_ids)
    if not ids:
        raise DomainError("schedule needs at least one tensor")
    fractions = []
    pos, size = 0, 1
    while pos < len(ids):
        fractions.append(tuple(ids[pos : pos + size]))
        pos += size
        size += 1
    return FractionSchedule(tuple(fractions))


@dataclass(frozen=True)
class RefinementPolicy:
    tau: float = 0.10
    split_pattern: tuple[int, ...] = (1, 2, 2)
    retrain_steps: int = 1000

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if any(s < 1 for s in self.split_pattern):
            raise DomainError("split pattern entries must be >= 1")

    def split(self, fraction: tuple[str, ...], depth: int) -> list[tuple[str, ...]]:
        if depth == 0 and sum(self.split_pattern) == len(fraction) and len(self.split_pattern) > 1:
            parts, pos = [], 0
            for size in self.split_pattern:
                parts.append(fraction[pos : pos + size])
                pos += size
            return parts
        return [(t,) for t in fraction]


@dataclass
class InqEvent:
    kind: str  # "quantize" or "rollback"; the outcome is in ``action``
    tensors: tuple[str, ...]
    scheme: str
    metric_before: float
    metric_quantized: float
    metric_after: float
    action: str
    depth: int
    retrained: bool
    frozen: tuple[str, ...] = ()
    snapshot: dict = field(default_factory=dict, repr=False)  # name -> code bytes

    def to_text(self) -> str:
        rec = {
            "event": self.kind,
            "tensors": ",".join(self.tensors),
            "scheme": self.scheme,
            "metric_before": _fmt(self.metric_before),
            "metric_quantized": _fmt(self.metric_quantized),
            "metric_after": _fmt(self.metric_after),
            "action": self.action,
            "depth": self.depth,
            "retrained": str(self.retrained).lower(),
            "frozen": len(self.frozen),
        }
        return " ".join(f"{k}={v}" for k, v in rec.items())


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6g}"


@dataclass
class InqResult:
    params: Params
    frozen: dict  # name -> QuantizedTensor
    events: list[InqEvent]

    def event_log(self) -> str:
        return "\n".join(e.to_text() for e in self.events)

    def quantization_events(self) -> list[InqEvent]:
        return [e for e in self.events if e.kind == "quantize"]


def _quantize(name: str, values: np.ndarray, scheme: Scheme) -> QuantizedTensor:
    if scheme is Scheme.FCQ:
        return quantize_fcq(values, name)
    return quantize_uniform(values, 8, name)


def _relative_increase(before: float, after: float) -> float:
    if after <= before:
        return 0.0
    if before <= 0:
        return math.inf
    return (after - before) / before


class _Scheduler:
    def __init__(self, params: Params, metric: Metric, hook: RetrainHook, policy: RefinementPolicy,
                 frozen: dict | None = None, events: list | None = None):
        self.params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        self.metric = metric
        self.hook = hook
        self.policy = policy
        self.frozen: dict = dict(frozen or {})
        self.events: list[InqEvent] = events if events is not None else []

    def masks(self) -> dict:
        return {k: np.full(v.shape, k in self.frozen, dtype=bool) for k, v in self.params.items()}

    def float_weights(self, weight_ids) -> list[str]:
        return [t for t in weight_ids if t not in self.frozen]

    def check_frozen(self, params: Params):
        for name, q in self.frozen.items():
            if name not in params or not np.array_equal(params[name], reconstruct(q)):
                raise ContractViolation(f"retrain hook modified frozen tensor {name}")

    def snapshot(self) -> dict:
        return {k: q.codes.tobytes() for k, q in self.frozen.items()}

    def run_fraction(self, fraction, scheme: Scheme, weight_ids, depth: int = 0):
        saved_params = {k: v.copy() for k, v in self.params.items()}
        saved_frozen = dict(self.frozen)
        before = self.metric(self.params)
        for name in fraction:
            q = _quantize(name, self.params[name], scheme)
            self.frozen[name] = q
            self.params[name] = reconstruct(q)
        quantized = self.metric(self.params)
        remaining = self.float_weights(weight_ids)
        retrained = bool(remaining) and self.policy.retrain_steps > 0
        if retrained:
            updated = self.hook({k: v.copy() for k, v in self.params.items()}, self.masks(), self.policy.retrain_steps)
            self.check_frozen(updated)
            self.params = {k: np.array(v, dtype=np.float64) for k, v in updated.items()}
        after = self.metric(self.params)
        degraded = _relative_increase(before, after) > self.policy.tau

        def log(kind, action):
            self.events.append(InqEvent(kind, tuple(fraction), scheme.value, before, quantized, after,
                                        action, depth, retrained, tuple(self.frozen), self.snapshot()))

        if degraded and len(fraction) > 1:
            log("quantize", "rollback")
            self.params, self.frozen = saved_params, saved_frozen
            parts = self.policy.split(tuple(fraction), depth)
            self.events.append(InqEvent("rollback", tuple(fraction), scheme.value, before, quantized, after,
                                        "split:" + "+".join(str(len(p)) for p in parts), depth, retrained,
                                        tuple(self.frozen), self.snapshot()))
            for part in parts:
                self.run_fraction(part, scheme, weight_ids, depth + 1)
        else:
            log("quantize", "accept-degraded" if degraded else ("commit" if retrained else "commit-ptq"))

    def run(self, schedule: FractionSchedule, scheme: Scheme, weight_ids):
        for frac in schedule.fractions:
            self.run_fraction(frac, scheme, weight_ids)

    def result(self) -> InqResult:
        return InqResult(self.params, self.frozen, self.events)


def run_inq(
    params: Params,
    weight_ids: Sequence[str],
    metric: Metric,
    hook: RetrainHook,
    schedule: FractionSchedule | None = None,
    scheme: Scheme = Scheme.FCQ,
    policy: RefinementPolicy | None = None,
) -> InqResult:
    """Quantize ``weight_ids`` fraction by fraction, retraining the float rest.

    ``params`` holds every trainable tensor (biases included); only
    ``weight_ids`` are quantized. ``hook(params, masks, steps)`` must return
    new params leaving frozen tensors untouched.
    """
    weight_ids = list(weight_ids)
    schedule = schedule or default_schedule(weight_ids)
    missing = [t for t in weight_ids if t not in params]
    if missing:
        raise DomainError(f"weight tensors not in params: {missing}")
    if sorted(schedule.tensors) != sorted(weight_ids):
        raise DomainError("schedule does not cover exactly the weight tensors")
    sched = _Scheduler(params, metric, hook, policy or RefinementPolicy())
    sched.run(schedule, scheme, weight_ids)
    return sched.result()


def mixed_policy_run(
    params: Params,
    weight_ids: Sequence[str],
    split: int,
    metric: Metric,
    hook: RetrainHook,
    policy: RefinementPolicy | None = None,
) -> InqResult:
    """FCQ + INQ before ``split``, uniform 8-bit + INQ after it, plain PTQ on the last tensor.

    With ``split == len(weight_ids)`` every tensor goes through FCQ + INQ.
    """
    weight_ids = list(weight_ids)
    if not 0 <= split <= len(weight_ids):
        raise DomainError(f"split must be in 0..{len(weight_ids)}, got {split}")
    missing = [t for t in weight_ids if t not in params]
    if missing:
        raise DomainError(f"weight tensors not in params: {missing}")
    policy = policy or RefinementPolicy()
    sched = _Scheduler(params, metric, hook, policy)
    prefix = weight_ids[:split]
    middle = weight_ids[split:-1]
    last = weight_ids[split:][-1:]
    if prefix:
        sched.run(default_schedule(prefix), Scheme.FCQ, weight_ids)
    if middle:
        sched.run(default_schedule(middle), Scheme.UNIFORM, weight_ids)
    if last:
        # nothing else floats any more, so this reduces to PTQ
        sched.run_fraction(tuple(last), Scheme.UNIFORM, weight_ids)
    return sched.result()


def one_shot_ptq(params: Params, weight_ids: Sequence[str], scheme: Scheme = Scheme.FCQ) -> dict:
    """Quantize every weight tensor at once from its current float values."""
    return {t: _quantize(t, params[t], scheme) for t in weight_ids}


def events_to_jsonl(events: Sequence[InqEvent]) -> str:
    lines = []
    for e in events:
        d = asdict(e)
        d.pop("snapshot")
        lines.append(json.dumps(d))
    return "\n".join(lines)
