import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_matrix
from fastcorr.classify import (ClassificationEvent, classify, classify_signal, correlation, detect_events,
                               distance, gen_test_signal)
from fastcorr.errors import InputError
from fastcorr.plan import synthesize_plan
from fastcorr.quantize import normalize_rows


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_correlation_examples():
    r = unit([1, 2, 3])
    assert correlation(r, r) == pytest.approx(1.0, abs=1e-12)
    assert correlation(r, -r) == pytest.approx(-1.0, abs=1e-12)
    assert correlation([1, 0], [0, 1]) == 0.0


def test_correlation_rejects_non_unit():
    with pytest.raises(InputError, match="unit norm"):
        correlation([1, 1], [1, 0])
    with pytest.raises(InputError):
        correlation([1, 0], [1, 0, 0])


def test_distance_examples():
    assert distance(1.0) == 0.0
    assert distance(0.0) == 2.0
    assert distance(-1.0) == 4.0


def test_distance_clamps_with_warning():
    with pytest.warns(RuntimeWarning):
        assert distance(1.0000001) == 0.0
    with pytest.warns(RuntimeWarning):
        assert distance(-1.5) == 4.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        distance(0.3)


def test_distance_identity_random_pairs(rng):
    for _ in range(200):
        x, r = unit(rng.standard_normal(9)), unit(rng.standard_normal(9))
        c = correlation(x, r)
        assert abs(distance(c) - math.fsum((x - r) ** 2)) <= 1e-12


def test_classify_examples():
    ev = classify([0.2, 0.9, 0.9], 0.8, step=7)
    assert ev == ClassificationEvent(7, 1, 0.9, pytest.approx(0.2), True)
    assert classify([0.2, 0.3], 0.8) is None
    assert classify([1.0], 1.0).template == 0
    with pytest.raises(InputError):
        classify([], 0.5)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=12), st.floats(0.01, 1.0))
def test_argmax_scale_invariant(c_vec, scale):
    a = classify(c_vec, -2.0)
    b = classify([c * scale for c in c_vec], -2.0)
    # scaling can merge near-ties through rounding; the chosen value must still be maximal
    assert c_vec[b.template] * scale == max(c * scale for c in c_vec)
    if len(set(c_vec)) == len(c_vec):
        assert a.template == b.template


def test_detect_events_peak_and_refractory():
    series = [(0, [0.1]), (1, [0.95]), (2, [0.97]), (3, [0.96]), (4, [0.98]), (5, [0.2]),
              (20, [0.99]), (21, [0.1])]
    events = detect_events(series, 0.9, refractory=4)
    # step 4 is a second local peak inside the refractory window of step 2
    assert [e.step for e in events] == [2, 20]
    assert [e.step for e in detect_events(series, 0.9, refractory=0)] == [2, 4, 20]


def test_detect_events_skips_silent_windows():
    series = [(0, None), (1, [0.95, 0.1]), (2, None)]
    events = detect_events(series, 0.9, refractory=0)
    assert [(e.step, e.template) for e in events] == [(1, 0)]


def test_single_template_detection(rng):
    matrix = random_matrix(rng, 4, 12, 2)
    plan = synthesize_plan(matrix)
    sig = gen_test_signal(matrix, [(100, 2)], 0.0, seed=0, length=300)
    events = classify_signal(plan, sig, 0.9)
    assert len(events) == 1
    ev = events[0]
    assert (ev.step, ev.template) == (100 + 12 - 1, 2)
    assert ev.correlation == pytest.approx(1.0, abs=1e-12)


def test_noise_only_has_no_events(rng):
    matrix = random_matrix(rng, 4, 12, 2)
    sig = gen_test_signal(matrix, [], 1.0, seed=5, length=1000)
    assert classify_signal(synthesize_plan(matrix), sig, 0.999) == []


def test_two_templates_in_order(rng):
    matrix = random_matrix(rng, 3, 10, 2)
    sig = gen_test_signal(matrix, [(120, 0), (30, 1)], 0.0, seed=0, length=200)
    events = classify_signal(synthesize_plan(matrix), sig, 0.9)
    assert [(e.step, e.template) for e in events] == [(39, 1), (129, 0)]


def test_gen_test_signal(rng):
    matrix = random_matrix(rng, 2, 5, 1)
    assert not gen_test_signal(matrix, [], 0.0, 0, 50).any()
    sig = gen_test_signal(matrix, [(10, 1)], 0.0, 0, 50)
    np.testing.assert_array_equal(sig[10:15], matrix.to_floats()[1])
    assert np.count_nonzero(sig[:10]) == 0
    np.testing.assert_array_equal(gen_test_signal(matrix, [(3, 0)], 0.5, 9, 40),
                                  gen_test_signal(matrix, [(3, 0)], 0.5, 9, 40))
    with pytest.raises(InputError, match="overlap"):
        gen_test_signal(matrix, [(0, 0), (4, 1)], 0.0, 0, 50)
    with pytest.raises(InputError, match="fit"):
        gen_test_signal(matrix, [(48, 0)], 0.0, 0, 50)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**32 - 1))
def test_unit_rows_correlate_with_themselves(m, seed):
    rows = normalize_rows(np.random.default_rng(seed).standard_normal((2, m)))
    assert abs(correlation(rows[0], rows[0]) - 1.0) <= 1e-12
