"""Sliding-window evaluation of a plan with cross-window reuse.

Each non-input node of a plan computes a fixed linear form over window
positions.  Written relative to its leftmost position (the *anchor*), that form
is shift invariant: the node's value in window ``s0`` depends only on the
relative signature and the absolute anchor ``s0 + lead``.  Values are cached
under that key, so a sample's product with a given magnitude is computed once
in its lifetime, and partial sums recur whenever a later window (or another
row) needs the same combination of the same absolute samples.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional

import numpy as np

from .cost import CostTally
from .errors import InputError
from .plan import Add, Input, MulCoeff, MultiplicationPlan, Output, Shift, linear_forms, plan_matrix
from .quantize import to_fraction

_INPUT, _PRODUCT, _SUM, _OUTPUT = range(4)


@dataclass(frozen=True)
class NormalizationTally:
    """Operations spent on window normalization, kept apart from the matrix product."""

    multiplies: int = 0
    adds: int = 0
    divisions: int = 0
    square_roots: int = 0

    def __add__(self, other: NormalizationTally) -> NormalizationTally:
        return NormalizationTally(self.multiplies + other.multiplies, self.adds + other.adds,
                                  self.divisions + other.divisions,
                                  self.square_roots + other.square_roots)


@dataclass(frozen=True)
class StreamOutput:
    step: int  # absolute index of the window's last sample
    raw: tuple[Fraction, ...]  # plan outputs, still in scaled-integer units
    scale: Fraction
    norm: float
    correlations: Optional[tuple[float, ...]]  # None when the window has zero energy
    tally: CostTally
    normalization: NormalizationTally

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(r * self.scale for r in self.raw)

    @property
    def zero_norm(self) -> bool:
        return self.correlations is None


@dataclass(frozen=True)
class StreamSummary:
    windows: int
    warmup_windows: int
    first_window: CostTally
    total: CostTally
    steady: CostTally  # summed over windows after warmup
    steady_windows: int
    normalization: NormalizationTally
    lookups: int
    steady_lookups: int

    def _avg(self, tally: CostTally, n: int) -> dict[str, float]:
        if n == 0:
            return {"multiplies": math.nan, "adds": math.nan, "shifts": math.nan, "cache_hits": math.nan}
        return {k: v / n for k, v in tally.as_dict().items()}

    @property
    def per_step(self) -> dict[str, float]:
        """Averages over every emitted window since init."""
        return self._avg(self.total, self.windows)

    @property
    def steady_per_step(self) -> dict[str, float]:
        """Averages over windows once every sample has entered through the newest slot."""
        return self._avg(self.steady, self.steady_windows)

    @property
    def cache_hit_rate(self) -> float:
        return self.total.cache_hits / self.lookups if self.lookups else 0.0

    @property
    def steady_cache_hit_rate(self) -> float:
        return self.steady.cache_hits / self.steady_lookups if self.steady_lookups else math.nan


class StreamState:
    """Single-owner streaming evaluator for one plan."""

    def __init__(self, plan: MultiplicationPlan):
        self.plan = plan
        self.m = plan.m
        forms = linear_forms(plan)
        self.signatures: list[tuple] = []
        sig_ids: dict[tuple, int] = {}
        self._ops = []
        for idx, node in enumerate(plan.nodes):
            form = forms[idx]
            lead = min(form) if form else 0
            sig = tuple(sorted((p - lead, int(c)) for p, c in form.items()))
            if isinstance(node, Input):
                self._ops.append((_INPUT, node.position))
            elif isinstance(node, MulCoeff) and isinstance(plan.nodes[node.child], Input):
                self._ops.append((_PRODUCT, lead, node.magnitude, node.child))
            elif isinstance(node, Output):
                self._ops.append((_OUTPUT, node.child, node.template, node.negate))
            else:
                if sig not in sig_ids:
                    sig_ids[sig] = len(self.signatures)
                    self.signatures.append(sig)
                self._ops.append((_SUM, lead, sig_ids[sig], node))
        self.template_norms = plan_matrix(plan).row_norms()
        self.ring: deque[tuple[int, int]] = deque(maxlen=self.m)
        self.samples_seen = 0
        self.product_cache: dict[int, dict[int, Fraction]] = {}
        self.sum_cache: dict[int, dict[int, int]] = {}  # anchor -> signature id -> value
        self.norm_acc = Fraction(0)
        # ring and cache values are integers over this common denominator
        self._den = 1
        self._evicted_below = 0
        self._windows = 0
        self._first: Optional[CostTally] = None
        self._total = CostTally()
        self._steady = CostTally()
        self._norm_total = NormalizationTally()
        self._lookups = 0
        self._steady_lookups = 0

    @property
    def warmup_windows(self) -> int:
        # from window m-1 on, every sample in the window entered through the newest slot
        return self.m - 1

    def push(self, sample) -> Optional[StreamOutput]:
        a = to_fraction(sample)
        t = self.samples_seen
        self.samples_seen += 1
        nmul = nadd = 0
        if len(self.ring) == self.m:
            _, oldest = self.ring[0]
            oldest = Fraction(oldest, self._den)
            self.norm_acc -= oldest * oldest
            nmul += 1
            nadd += 1
        if self._den % a.denominator:
            self._rescale(math.lcm(self._den, a.denominator) // self._den)
        self.ring.append((t, a.numerator * (self._den // a.denominator)))
        self.norm_acc += a * a
        nmul += 1
        nadd += 1
        if len(self.ring) < self.m:
            self._norm_total += NormalizationTally(nmul, nadd)
            return None

        s0 = t - self.m + 1
        self._evict(s0)
        window = [v for _, v in self.ring]
        vals: list = [None] * len(self._ops)
        raw = [0] * self.plan.K
        mults = adds = shifts = hits = lookups = 0
        for j, op in enumerate(self._ops):
            kind = op[0]
            if kind == _INPUT:
                vals[j] = window[op[1]]
            elif kind == _PRODUCT:
                _, lead, mag, child = op
                bucket = self.product_cache.setdefault(s0 + lead, {})
                lookups += 1
                v = bucket.get(mag)
                if v is None:
                    v = vals[child] * mag
                    bucket[mag] = v
                    if mag != 1:
                        mults += 1
                else:
                    hits += 1
                vals[j] = v
            elif kind == _SUM:
                _, lead, sig, node = op
                bucket = self.sum_cache.setdefault(s0 + lead, {})
                lookups += 1
                v = bucket.get(sig)
                if v is None:
                    if isinstance(node, Add):
                        v = vals[node.left] + vals[node.right] if node.sign > 0 else vals[node.left] - vals[node.right]
                        adds += 1
                    elif isinstance(node, Shift):
                        v = vals[node.child] * self.plan.base**node.power
                        shifts += 1
                    else:
                        v = vals[node.child] * node.magnitude
                        if node.magnitude != 1:
                            mults += 1
                    bucket[sig] = v
                else:
                    hits += 1
                vals[j] = v
            else:
                _, child, k, negate = op
                v = 0 if child is None else vals[child]
                raw[k] = -v if negate else v
        raw = [Fraction(r, self._den) for r in raw]

        tally = CostTally(mults, adds, shifts, hits)
        norm = math.sqrt(float(self.norm_acc))
        scale = self.plan.scale
        if norm == 0.0:
            corr = None
            ntally = NormalizationTally(nmul, nadd, 0, 1)
        else:
            corr = tuple(
                float(r * scale) / (norm * tn) if tn > 0 else 0.0
                for r, tn in zip(raw, self.template_norms)
            )
            ntally = NormalizationTally(nmul, nadd, self.plan.K, 1)

        if self._first is None:
            self._first = tally
        if self._windows >= self.warmup_windows:
            self._steady += tally
            self._steady_lookups += lookups
        self._windows += 1
        self._total += tally
        self._lookups += lookups
        self._norm_total += ntally
        return StreamOutput(t, tuple(raw), scale, norm, corr, tally, ntally)

    def _rescale(self, factor: int) -> None:
        self._den *= factor
        self.ring = deque(((i, v * factor) for i, v in self.ring), maxlen=self.m)
        for cache in (self.product_cache, self.sum_cache):
            for bucket in cache.values():
                for key in bucket:
                    bucket[key] *= factor

    def _evict(self, s0: int) -> None:
        for anchor in range(self._evicted_below, s0):
            self.product_cache.pop(anchor, None)
            self.sum_cache.pop(anchor, None)
        self._evicted_below = max(self._evicted_below, s0)

    def extend(self, samples: Iterable) -> Iterator[StreamOutput]:
        for s in samples:
            out = self.push(s)
            if out is not None:
                yield out

    def window(self) -> list[Fraction]:
        return [Fraction(v, self._den) for _, v in self.ring]

    def window_norm(self) -> float:
        if len(self.ring) < self.m:
            raise InputError(f"window not full ({len(self.ring)} of {self.m} samples)")
        return math.sqrt(float(self.norm_acc))

    def cache_entries(self) -> Iterator[tuple[str, int, object, Fraction]]:
        for anchor, bucket in self.product_cache.items():
            for mag, v in bucket.items():
                yield "product", anchor, mag, Fraction(v, self._den)
        for anchor, bucket in self.sum_cache.items():
            for sig, v in bucket.items():
                yield "sum", anchor, self.signatures[sig], Fraction(v, self._den)

    def recompute(self, kind: str, anchor: int, key) -> Fraction:
        """Value of a cache entry rebuilt from the raw samples in the ring."""
        samples = {i: Fraction(v, self._den) for i, v in self.ring}
        if kind == "product":
            return samples[anchor] * key
        return sum((c * samples[anchor + lag] for lag, c in key), Fraction(0))

    def summary(self) -> StreamSummary:
        if self._first is None:
            raise InputError("no window has been emitted yet")
        steady_windows = max(self._windows - self.warmup_windows, 0)
        return StreamSummary(self._windows, self.warmup_windows, self._first, self._total,
                             self._steady, steady_windows, self._norm_total, self._lookups,
                             self._steady_lookups)


def stream_init(plan: MultiplicationPlan) -> StreamState:
    return StreamState(plan)


def stream_push(state: StreamState, sample) -> Optional[StreamOutput]:
    return state.push(sample)


def window_norm(state: StreamState) -> float:
    return state.window_norm()


def stream_cost_summary(state: StreamState) -> StreamSummary:
    return state.summary()


def stream_signal(plan: MultiplicationPlan, signal: Iterable) -> tuple[list[StreamOutput], StreamSummary]:
    state = StreamState(plan)
    outs = list(state.extend(signal))
    return outs, state.summary()


def direct_normalized(templates: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Float reference: cosine of each template row with the window."""
    w = np.asarray(window, dtype=np.float64)
    t = np.asarray(templates, dtype=np.float64)
    return (t @ w) / (np.linalg.norm(w) * np.linalg.norm(t, axis=1))
