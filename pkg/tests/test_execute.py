import random
from dataclasses import replace
from fractions import Fraction

import pytest

from conftest import random_matrix
from fastcorr.cost import CostTally
from fastcorr.errors import InputError
from fastcorr.execute import direct_multiply, evaluate_plan, verify_equivalence
from fastcorr.plan import MulCoeff, plan_cost, synthesize_plan
from fastcorr.quantize import QuantizedMatrix


def test_identity_plan():
    plan = synthesize_plan(QuantizedMatrix.from_real([[1, 0], [0, 1]], 1))
    res = evaluate_plan(plan, [3, 4])
    assert res.values == (3, 4)
    assert res.tally == CostTally(0, 0, 0)


def test_single_row_pythagorean():
    plan = synthesize_plan(QuantizedMatrix.from_real([[0.6, 0.8]], 1))
    assert evaluate_plan(plan, [3, 4]).values == (Fraction(5),)


def test_accepts_decimal_strings_and_floats():
    plan = synthesize_plan(QuantizedMatrix.from_real([[0.6, 0.8]], 1))
    assert evaluate_plan(plan, ["0.1", 0.5]).values == (Fraction(6, 100) + Fraction(4, 10),)


def test_length_mismatch():
    plan = synthesize_plan(QuantizedMatrix.from_real([[0.6, 0.8]], 1))
    with pytest.raises(InputError):
        evaluate_plan(plan, [1, 2, 3])
    with pytest.raises(InputError):
        direct_multiply(QuantizedMatrix.from_real([[0.6, 0.8]], 1), [1])


def test_direct_multiply_examples():
    eye = QuantizedMatrix.from_real([[1, 0], [0, 1]], 0)
    assert direct_multiply(eye, [7, -2]).values == (7, -2)
    assert direct_multiply(eye, [0, 0]).values == (0, 0)


def test_direct_tally_ten_by_hundred(rng):
    matrix = random_matrix(rng, 10, 100, 2)
    res = direct_multiply(matrix, [1] * 100)
    assert res.tally == CostTally(1000, 990)


def test_batch_tally_is_input_independent(rng):
    matrix = random_matrix(rng, 6, 9, 2)
    plan = synthesize_plan(matrix)
    r = random.Random(1)
    tallies = {evaluate_plan(plan, [Fraction(r.randint(-9, 9), r.randint(1, 9)) for _ in range(9)]).tally
               for _ in range(10)}
    assert tallies == {plan_cost(plan)}


def test_random_8x8_against_oracle(rng):
    matrix = random_matrix(rng, 8, 8, 2)
    assert verify_equivalence(synthesize_plan(matrix), matrix, 100, seed=3).passed


def test_corrupted_plan_is_caught(rng):
    matrix = random_matrix(rng, 5, 6, 2)
    plan = synthesize_plan(matrix)
    idx = next(i for i, n in enumerate(plan.nodes) if isinstance(n, MulCoeff))
    bad_node = replace(plan.nodes[idx], magnitude=plan.nodes[idx].magnitude + 1)
    bad = replace(plan, nodes=plan.nodes[:idx] + (bad_node,) + plan.nodes[idx + 1:])
    report = verify_equivalence(bad, matrix, 100, seed=0)
    assert not report.passed
    assert report.trials == 1
    assert report.expected == direct_multiply(matrix, report.vector).values
    assert report.actual == evaluate_plan(bad, report.vector).values
    assert report.expected != report.actual
    assert "mismatch" in str(report)


def test_zero_trials_vacuous(rng):
    matrix = random_matrix(rng, 2, 2, 1)
    report = verify_equivalence(synthesize_plan(matrix), matrix, 0)
    assert report.passed and report.trials == 0


def test_verify_is_deterministic(rng):
    matrix = random_matrix(rng, 3, 4, 2)
    plan = synthesize_plan(matrix)
    bad = replace(plan, nodes=tuple(replace(n, magnitude=n.magnitude + 1) if isinstance(n, MulCoeff) else n
                                    for n in plan.nodes))
    assert verify_equivalence(bad, matrix, 10, seed=9) == verify_equivalence(bad, matrix, 10, seed=9)
