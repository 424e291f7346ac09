"""Numerical-feature codec against scan and high-precision oracles."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from recbench.errors import (
    DataError,
    EmptyColumn,
    NaNValue,
    NonPositiveAfterShift,
)
from recbench.features import (
    DiscretizerSpec,
    FeatureTuple,
    Method,
    encode_column,
    equal_distance,
    field_embedding,
    fit_discretizer,
    fit_range,
    logarithm,
    spec_to_text,
)


def scan_bucket(x: float, spec: DiscretizerSpec) -> int:
    """Independent linear scan over bucket edges (no floor call)."""
    x = min(max(x, spec.x_min), spec.x_max)
    t = (x - spec.x_min) / (spec.x_max - spec.x_min) * spec.buckets
    b = 0
    while b + 1 <= t and b + 1 <= spec.buckets - 1:
        b += 1
    return b


def random_spec(rng) -> DiscretizerSpec:
    lo = float(rng.uniform(-100, 100))
    hi = lo + float(rng.uniform(1e-3, 200))
    return DiscretizerSpec(Method.EQUAL_DISTANCE, lo, hi,
                           int(rng.integers(1, 33)))


def test_equal_distance_matches_scan_oracle(rng):
    for _ in range(3000):
        spec = random_spec(rng)
        spread = spec.x_max - spec.x_min
        x = float(rng.uniform(spec.x_min - 0.2 * spread,
                              spec.x_max + 0.2 * spread))
        got = equal_distance(x, spec)
        assert got == FeatureTuple(scan_bucket(x, spec), 1.0)


def test_equal_distance_edges():
    spec = DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 10.0, 5)
    assert equal_distance(0.0, spec).discrete == 0
    assert equal_distance(10.0, spec).discrete == 4  # top edge clamps
    assert equal_distance(-3.0, spec).discrete == 0
    assert equal_distance(99.0, spec).discrete == 4
    assert equal_distance(2.0, spec).discrete == 1
    assert equal_distance(1.9999999, spec).discrete == 0


def test_equal_distance_errors():
    spec = DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 1.0, 4)
    with pytest.raises(NaNValue):
        equal_distance(math.nan, spec)
    with pytest.raises(DataError):
        DiscretizerSpec(Method.EQUAL_DISTANCE, 1.0, 1.0, 4)
    with pytest.raises(DataError):
        DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 1.0, 0)
    other = DiscretizerSpec(Method.LOGARITHM)
    with pytest.raises(DataError):
        equal_distance(0.5, other)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_equal_distance_monotone_and_bounded(a, b):
    spec = DiscretizerSpec(Method.EQUAL_DISTANCE, -10.0, 10.0, 7)
    lo, hi = min(a, b), max(a, b)
    ba = equal_distance(lo, spec).discrete
    bb = equal_distance(hi, spec).discrete
    assert ba <= bb
    assert 0 <= ba < 7 and 0 <= bb < 7


def test_logarithm_matches_mpmath_oracle(rng):
    mpmath.mp.dps = 50
    checked = 0
    while checked < 1500:
        x = float(math.exp(rng.uniform(math.log(1e-6), math.log(1e6))))
        v = mpmath.log(x) ** 2
        frac = v - mpmath.floor(v)
        if frac < mpmath.mpf("1e-12") or 1 - frac < mpmath.mpf("1e-12"):
            continue  # too close to a floor boundary to compare floats
        assert logarithm(x).discrete == int(mpmath.floor(v))
        checked += 1


def test_logarithm_spot_values():
    assert logarithm(100.0) == FeatureTuple(21, 1.0)
    assert logarithm(1.0) == FeatureTuple(0, 1.0)
    assert logarithm(math.e) == FeatureTuple(1, 1.0)
    # ln(0.5)^2 = ln(2)^2 ~ 0.48
    assert logarithm(0.5).discrete == 0


def test_logarithm_errors():
    with pytest.raises(NonPositiveAfterShift):
        logarithm(0.0)
    with pytest.raises(NonPositiveAfterShift):
        logarithm(-3.0)
    with pytest.raises(NaNValue):
        logarithm(math.nan)
    with pytest.raises(NaNValue):
        logarithm(math.inf)


def test_field_embedding_keeps_value():
    assert field_embedding(2.5) == FeatureTuple(1, 2.5)
    assert field_embedding(-7.0) == FeatureTuple(1, -7.0)
    with pytest.raises(NaNValue):
        field_embedding(math.inf)


def test_fit_range_and_errors():
    assert fit_range([3.0, -1.0, 2.0]) == (-1.0, 3.0)
    with pytest.raises(EmptyColumn):
        fit_range([])
    with pytest.raises(NaNValue, match="row 1"):
        fit_range([1.0, math.nan, 2.0])


def test_fit_logarithm_shift():
    spec = fit_discretizer([-4.0, 2.0, 7.0], Method.LOGARITHM)
    assert spec.shift == 5.0  # 1 - (-4)
    assert spec.x_min == -4.0
    positive = fit_discretizer([0.5, 9.0], Method.LOGARITHM)
    assert positive.shift == 0.0
    zero_min = fit_discretizer([0.0, 3.0], Method.LOGARITHM)
    assert zero_min.shift == 1.0


def test_encode_column_equal_distance_matches_scalar(rng):
    spec = DiscretizerSpec(Method.EQUAL_DISTANCE, -5.0, 5.0, 9)
    values = rng.uniform(-8, 8, 500)
    discrete, scale = encode_column(spec, values)
    assert np.all(scale == 1.0)
    for v, b in zip(values, discrete):
        assert b == equal_distance(float(v), spec).discrete


def test_encode_column_logarithm_matches_scalar(rng):
    train = rng.uniform(-3.0, 50.0, 200)
    spec = fit_discretizer(train, Method.LOGARITHM)
    discrete, scale = encode_column(spec, train)
    for v, b in zip(train, discrete):
        assert b == logarithm(float(v) + spec.shift).discrete
    assert np.all(scale == 1.0)


def test_encode_column_field_embedding():
    spec = fit_discretizer([1.0, 2.0], Method.FIELD_EMBEDDING)
    discrete, scale = encode_column(spec, [5.0, -1.5])
    assert list(discrete) == [1, 1]
    assert list(scale) == [5.0, -1.5]


def test_encode_column_errors():
    ed = DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 1.0, 4)
    with pytest.raises(NaNValue, match="row 2"):
        encode_column(ed, [0.1, 0.2, math.nan])
    log_spec = fit_discretizer([1.0, 10.0], Method.LOGARITHM)
    with pytest.raises(NonPositiveAfterShift, match="row 1"):
        encode_column(log_spec, [2.0, -1.0])
    fe = fit_discretizer([1.0], Method.FIELD_EMBEDDING)
    with pytest.raises(NaNValue):
        encode_column(fe, [1.0, math.inf])


def test_encode_column_out_of_range_clamps():
    # test-split values outside the fitted range take the edge buckets
    spec = DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 1.0, 10)
    discrete, _ = encode_column(spec, [-5.0, 0.5, 27.0])
    assert list(discrete) == [0, 5, 9]


def test_spec_to_text_round_describes():
    ed = DiscretizerSpec(Method.EQUAL_DISTANCE, 0.0, 2.0, 4)
    text = spec_to_text("price", ed)
    assert "field=price" in text and "buckets=4" in text
    log_spec = fit_discretizer([-1.0, 5.0], Method.LOGARITHM)
    assert "shift=2.0" in spec_to_text("age", log_spec)
