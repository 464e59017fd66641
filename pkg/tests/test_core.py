import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from jumprestore import (
    CapabilityError,
    InvalidInputError,
    StateSpace,
    UnnormalizedDensity,
    WeightedSample,
    wrap_torus,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


@pytest.mark.parametrize("raw, expected", [([0.9 + 0.2], [0.1]), ([-0.1], [0.9]), ([0.0, 0.5], [0.0, 0.5])])
def test_wrap_examples(raw, expected):
    assert np.allclose(wrap_torus(raw), expected, atol=1e-15)


@given(st.lists(finite, min_size=1, max_size=5))
def test_wrap_is_idempotent_and_in_range(v):
    w = wrap_torus(v)
    assert np.all((w >= 0.0) & (w < 1.0))
    assert np.array_equal(wrap_torus(w), w)


def test_wrap_tiny_negative_stays_below_one():
    w = wrap_torus([-1e-300])
    assert 0.0 <= w[0] < 1.0


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_wrap_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        wrap_torus([0.2, bad])


def test_weighted_sample_validation():
    assert WeightedSample(0.0, 1).dt == 0.0
    for dt in (-1.0, math.inf, math.nan):
        with pytest.raises(InvalidInputError):
            WeightedSample(dt, 0)


def test_state_space_membership():
    t = StateSpace.torus(2)
    assert t.contains([0.0, 0.999])
    assert not t.contains([1.0, 0.5])
    assert np.allclose(t.point([1.25, -0.25]), [0.25, 0.75])
    f = StateSpace.finite(3)
    assert f.contains(2) and not f.contains(3)
    with pytest.raises(InvalidInputError):
        f.point(5)
    with pytest.raises(InvalidInputError):
        StateSpace.euclidean(2).point([1.0])


def test_density_guards():
    d = UnnormalizedDensity(lambda x: -1.0)
    with pytest.raises(InvalidInputError):
        d.eval(0)
    nan = UnnormalizedDensity(lambda x: math.nan)
    with pytest.raises(InvalidInputError):
        nan.eval(0)
    with pytest.raises(CapabilityError):
        UnnormalizedDensity(lambda x: 1.0).grad_log(0)
    assert UnnormalizedDensity(lambda x: 0.0).log(0) == -math.inf
