"""Analytic cost baselines and measured operation-count sweeps."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cost import CostPolicy
from .errors import InputError
from .plan import plan_cost, synthesize_plan
from .quantize import QuantizedMatrix, quantize_templates
from .stream import StreamState

VITERBI_BREAK = 48

AS_PRINTED = "as_printed"
ANOMALOUS_NEGATIVE = "anomalous_negative"

CSV_COLUMNS = (
    "P", "K", "m", "D", "trial",
    "direct_mults", "direct_adds",
    "plan_mults", "plan_adds", "plan_shifts",
    "stream_mults_per_step", "stream_adds_per_step", "cache_hit_rate",
    "viterbi_alpha_mult", "viterbi_alpha_add", "viterbi_flag",
)


def direct_cost(K: int, m: int) -> tuple[int, int]:
    """Multiplies and adds for K independent length-m dot products."""
    if K < 1 or m < 1:
        raise InputError(f"K and m must be >= 1, got K={K}, m={m}")
    return K * m, K * (m - 1)


def viterbi_alpha(P: int) -> tuple[float, float, str]:
    """Fractions of the direct cost a Viterbi-style correlator needs.

    Below the break point the add factor is ``1 - 1/sqrt(P)``.  Above it the
    formula as published is ``1 - sqrt(48)``, which is negative; it is returned
    unchanged with the ``anomalous_negative`` flag.  P == 48 takes the upper branch.
    """
    if P < 1:
        raise InputError(f"P must be >= 1, got {P}")
    if P < VITERBI_BREAK:
        return 1.0, 1.0 - 1.0 / math.sqrt(P), AS_PRINTED
    return 0.5, 1.0 - math.sqrt(VITERBI_BREAK), ANOMALOUS_NEGATIVE


@dataclass(frozen=True)
class BaselineCosts:
    P: int
    direct_mults: int
    direct_adds: int
    viterbi_alpha_mult: float
    viterbi_alpha_add: float
    viterbi_add_flag: str

    @classmethod
    def for_size(cls, K: int, m: int) -> BaselineCosts:
        mults, adds = direct_cost(K, m)
        am, aa, flag = viterbi_alpha(K * m)
        return cls(K * m, mults, adds, am, aa, flag)

    @property
    def viterbi_mults(self) -> float:
        return self.viterbi_alpha_mult * self.P

    @property
    def viterbi_adds(self) -> float:
        return self.viterbi_alpha_add * self.P


def random_templates(rng: np.random.Generator, K: int, m: int, digits: int, base: int = 10) -> QuantizedMatrix:
    """Gaussian rows, normalized, then quantized."""
    while True:
        raw = rng.standard_normal((K, m))
        if np.all(np.linalg.norm(raw, axis=1) > 0):
            return quantize_templates(raw, digits, base)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def _run_trial(args) -> dict:
    K, m, D, trial, seed, base, signal_length, policy = args
    rng = np.random.default_rng([seed, K, m, D, trial])
    matrix = random_templates(rng, K, m, D, base)
    plan = synthesize_plan(matrix, policy)
    cost = plan_cost(plan, policy)
    state = StreamState(plan)
    for x in rng.standard_normal(max(signal_length, 2 * m)):
        state.push(float(x))
    summary = state.summary()
    steady = summary.steady_per_step
    base_costs = BaselineCosts.for_size(K, m)
    stream_mults = steady["multiplies"]
    if policy.count_shifts_as_multiplies and not math.isnan(stream_mults):
        stream_mults += steady["shifts"]
    return {
        "P": K * m, "K": K, "m": m, "D": D, "trial": trial,
        "direct_mults": base_costs.direct_mults, "direct_adds": base_costs.direct_adds,
        "plan_mults": cost.multiplies, "plan_adds": cost.adds, "plan_shifts": cost.shifts,
        "stream_mults_per_step": stream_mults,
        "stream_adds_per_step": steady["adds"],
        "cache_hit_rate": summary.steady_cache_hit_rate,
        "viterbi_alpha_mult": base_costs.viterbi_alpha_mult,
        "viterbi_alpha_add": base_costs.viterbi_alpha_add,
        "viterbi_flag": base_costs.viterbi_add_flag,
        # not a CSV column; lets callers check the reuse bound
        "_u_total": len(matrix.distinct_magnitudes()),
    }


def bench_sweep(sizes: Sequence[tuple[int, int]], digits: Iterable[int], trials: int, seed: int,
                base: int = 10, signal_length: int = 128, policy: CostPolicy = CostPolicy(),
                workers: int = 1) -> list[dict]:
    """One row per (size, D, trial), ordered by (P, K, m, D, trial)."""
    digits = list(digits)
    for K, m in sizes:
        direct_cost(K, m)
    if trials < 0:
        raise InputError("trials must be >= 0")
    jobs = [(K, m, D, t, seed, base, signal_length, policy)
            for K, m in sizes for D in digits for t in range(trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_trial, jobs))
    else:
        rows = [_run_trial(j) for j in jobs]
    rows.sort(key=lambda r: (r["P"], r["K"], r["m"], r["D"], r["trial"]))
    return rows


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in CSV_COLUMNS])
    return buf.getvalue()
