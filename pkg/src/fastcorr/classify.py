"""Matched-filter decisions over correlation vectors."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import InputError
from .plan import MultiplicationPlan
from .quantize import QuantizedMatrix
from .stream import StreamState

UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ClassificationEvent:
    step: int
    template: int
    correlation: float
    distance: float
    accepted: bool = True


def correlation(x: Sequence[float], r: Sequence[float]) -> float:
    """Inner product of two unit vectors."""
    x = np.asarray(x, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if x.shape != r.shape:
        raise InputError(f"length mismatch: {x.shape[0]} vs {r.shape[0]}")
    for name, v in (("x", x), ("r", r)):
        n2 = math.fsum(v * v)
        if abs(n2 - 1.0) > UNIT_TOL:
            raise InputError(f"{name} is not unit norm (sum of squares {n2!r})")
    return math.fsum(x * r)


def distance(c: float) -> float:
    """Squared Euclidean distance between unit vectors whose correlation is ``c``."""
    if c > 1.0 or c < -1.0:
        warnings.warn(f"correlation {c!r} outside [-1, 1]; clamping", RuntimeWarning, stacklevel=2)
        c = min(1.0, max(-1.0, c))
    return 2.0 * (1.0 - c)


def classify(c_vec: Sequence[float], threshold: float, step: int = 0) -> Optional[ClassificationEvent]:
    if len(c_vec) == 0:
        raise InputError("empty correlation vector")
    best = 0
    for k in range(1, len(c_vec)):
        if c_vec[k] > c_vec[best]:
            best = k
    c = float(c_vec[best])
    if c < threshold:
        return None
    return ClassificationEvent(step, best, c, distance(c), True)


def detect_events(stream: Iterable[tuple[int, Optional[Sequence[float]]]], threshold: float,
                  refractory: int) -> list[ClassificationEvent]:
    """Report accepted peaks of the best correlation.

    ``stream`` yields ``(step, c_vec)`` pairs; ``c_vec`` may be None for windows
    with no energy.  A step is a peak when its accepted best correlation is at
    least the previous step's and strictly above the next step's.  After an
    event, nothing is reported for ``refractory`` steps.
    """
    if refractory < 0:
        raise InputError("refractory must be >= 0")
    events: list[ClassificationEvent] = []
    last_emit: Optional[int] = None
    prev_c = -math.inf
    pending: Optional[ClassificationEvent] = None

    def flush(next_c: float) -> None:
        nonlocal last_emit
        if pending is not None and pending.correlation > next_c:
            if last_emit is None or pending.step > last_emit + refractory:
                events.append(pending)
                last_emit = pending.step

    for step, c_vec in stream:
        if c_vec is None:
            cur_c, cur_event = -math.inf, None
        else:
            cur_event = classify(c_vec, threshold, step)
            cur_c = max(c_vec)
        flush(cur_c)
        pending = cur_event if cur_event is not None and cur_c >= prev_c else None
        prev_c = cur_c
    flush(-math.inf)
    return events


def classify_signal(plan: MultiplicationPlan, signal: Iterable, threshold: float,
                    refractory: Optional[int] = None) -> list[ClassificationEvent]:
    """Stream ``signal`` through ``plan`` and detect template occurrences."""
    state = StreamState(plan)
    if refractory is None:
        refractory = plan.m
    pairs = ((o.step, o.correlations) for o in state.extend(signal))
    return detect_events(pairs, threshold, refractory)


def gen_test_signal(templates: QuantizedMatrix, placements: Sequence[tuple[int, int]],
                    noise_sigma: float, seed: int, length: int) -> np.ndarray:
    """White Gaussian noise with template rows added at the given offsets."""
    m = templates.m
    spans = sorted((int(off), int(k)) for off, k in placements)
    for off, k in spans:
        if off < 0 or off + m > length:
            raise InputError(f"placement at offset {off} does not fit in length {length}")
        if not 0 <= k < templates.K:
            raise InputError(f"template index {k} outside [0, {templates.K})")
    for (a, _), (b, _) in zip(spans, spans[1:]):
        if b < a + m:
            raise InputError(f"placements at offsets {a} and {b} overlap")
    rng = np.random.default_rng(seed)
    sig = rng.normal(0.0, noise_sigma, size=length) if noise_sigma > 0 else np.zeros(length)
    rows = templates.to_floats()
    for off, k in spans:
        sig[off:off + m] += rows[k]
    return sig
