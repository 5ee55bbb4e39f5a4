"""Exact plan evaluation and the naive direct-product oracle."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .cost import CostTally
from .errors import InputError
from .plan import Add, Input, MulCoeff, MultiplicationPlan, Output, Shift, plan_cost
from .quantize import QuantizedMatrix, to_fraction


@dataclass(frozen=True)
class EvalResult:
    """Correlations as integers sharing one scale: ``values[k] = outputs[k] * scale``."""

    outputs: tuple[int, ...]
    scale: Fraction
    tally: CostTally

    @property
    def values(self) -> tuple[Fraction, ...]:
        return tuple(o * self.scale for o in self.outputs)

    def as_floats(self) -> list[float]:
        return [float(v) for v in self.values]


def _common_integers(x: Sequence) -> tuple[list[int], int]:
    """Write rationals as integers over their least common denominator."""
    fr = [to_fraction(v) for v in x]
    den = math.lcm(*(f.denominator for f in fr)) if fr else 1
    return [int(f * den) for f in fr], den


def evaluate_plan(plan: MultiplicationPlan, x: Sequence) -> EvalResult:
    if len(x) != plan.m:
        raise InputError(f"vector has length {len(x)}, plan expects {plan.m}")
    xs, den = _common_integers(x)
    vals: list[Optional[int]] = [None] * len(plan.nodes)
    out = [0] * plan.K
    base = plan.base
    for idx, node in enumerate(plan.nodes):
        if isinstance(node, Input):
            vals[idx] = xs[node.position]
        elif isinstance(node, MulCoeff):
            vals[idx] = vals[node.child] * node.magnitude
        elif isinstance(node, Add):
            r = vals[node.right]
            vals[idx] = vals[node.left] + r if node.sign > 0 else vals[node.left] - r
        elif isinstance(node, Shift):
            vals[idx] = vals[node.child] * base**node.power
        elif isinstance(node, Output):
            v = 0 if node.child is None else vals[node.child]
            out[node.template] = -v if node.negate else v
    return EvalResult(tuple(out), plan.scale / den, plan_cost(plan))


def direct_multiply(matrix: QuantizedMatrix, x: Sequence) -> EvalResult:
    """Row-by-row dot products, every entry multiplied, no shortcuts."""
    if len(x) != matrix.m:
        raise InputError(f"vector has length {len(x)}, matrix has {matrix.m} columns")
    xs, den = _common_integers(x)
    out = []
    for row in matrix.ints:
        acc = row[0] * xs[0]
        for n, v in zip(row[1:], xs[1:]):
            acc = acc + n * v
        out.append(acc)
    K, m = matrix.K, matrix.m
    return EvalResult(tuple(out), matrix.scale / den, CostTally(K * m, K * (m - 1)))


@dataclass(frozen=True)
class EquivalenceReport:
    passed: bool
    trials: int
    vector: Optional[tuple[Fraction, ...]] = None
    expected: Optional[tuple[Fraction, ...]] = None
    actual: Optional[tuple[Fraction, ...]] = None

    def __str__(self) -> str:
        if self.passed:
            return f"equivalent over {self.trials} trials"
        return (f"mismatch after {self.trials} trials: x={list(map(str, self.vector))} "
                f"expected={list(map(str, self.expected))} actual={list(map(str, self.actual))}")


def random_rational_vector(rng: random.Random, m: int, max_num: int = 10**6, max_den: int = 997) -> list[Fraction]:
    return [Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_den)) for _ in range(m)]


def verify_equivalence(plan: MultiplicationPlan, matrix: QuantizedMatrix, trials: int = 100,
                       seed: int = 0) -> EquivalenceReport:
    if (plan.K, plan.m) != (matrix.K, matrix.m):
        raise InputError(f"plan is {plan.K}x{plan.m} but matrix is {matrix.K}x{matrix.m}")
    rng = random.Random(seed)
    for t in range(trials):
        x = random_rational_vector(rng, matrix.m)
        got = evaluate_plan(plan, x).values
        want = direct_multiply(matrix, x).values
        if got != want:
            return EquivalenceReport(False, t + 1, tuple(x), want, got)
    return EquivalenceReport(True, trials)
