import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qap_anneal import RandomStream
from qap_anneal.rng import uniform_py


def test_pure_function():
    assert RandomStream(5)(17) == RandomStream(5)(17)
    assert RandomStream(5)(17) != RandomStream(6)(17)
    assert RandomStream(5)(17) != RandomStream(5)(18)


@given(st.integers(0, 2**64 - 1), st.integers(-(2**62), 2**62))
def test_compiled_matches_python(seed, index):
    s = RandomStream(seed)
    assert s.uniform(np.array([index]))[0] == uniform_py(seed, index) == s(index)


def test_negative_seed_wraps():
    assert RandomStream(-1)(3) == RandomStream(2**64 - 1)(3)
    with pytest.raises(ValueError):
        RandomStream(2**64)


def test_range_and_mean():
    u = RandomStream(2024).uniform(np.arange(1_000_000))
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01


def test_integers_bounds():
    x = RandomStream(3).integers(0, 50_000, 7)
    assert x.min() == 0 and x.max() == 6
    counts = np.bincount(x, minlength=7)
    assert counts.min() > 6500
