import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qap_anneal import GeneratorSpec, Instance, generate_taixxa, parse_qaplib, write_qaplib
from qap_anneal.errors import DomainError, ParseError, SizeError, TruncationError
from qap_anneal.instance_io import read_qaplib

from conftest import TINY_A, TINY_B


def test_parse_multiline():
    inst = parse_qaplib("2\n0 1\n1 0\n0 3\n3 0")
    assert inst.n == 2
    assert inst.a.tolist() == [[0, 1], [1, 0]] and inst.b.tolist() == [[0, 3], [3, 0]]
    assert inst.symmetric and inst.zero_diagonal


def test_parse_single_line_and_tabs():
    inst = parse_qaplib("3 0 1 2 1 0 3 2 3 0 0 4 5 4 0 6 5 6 0")
    assert inst == Instance(TINY_A, TINY_B)
    assert parse_qaplib("3\t0 1 2\r\n1 0 3\n\n\n2 3 0  0 4 5 4 0 6 5 6 0\n") == inst


def test_parse_truncated():
    with pytest.raises(TruncationError) as err:
        parse_qaplib("2 0 1 1 0 0 3 3")
    assert (err.value.expected, err.value.actual) == (9, 8)
    assert "9" in str(err.value) and "8" in str(err.value)
    with pytest.raises(TruncationError):
        parse_qaplib("2 0 1 1 0 0 3 3 0 7")
    with pytest.raises(TruncationError):
        parse_qaplib("   ")


def test_parse_non_integer():
    with pytest.raises(ParseError) as err:
        parse_qaplib("2 0 1 1 0 0 3.5 3 0")
    assert err.value.position == 6
    with pytest.raises(ParseError):
        parse_qaplib("two 0 1 1 0 0 3 3 0")


def test_parse_size_and_domain():
    with pytest.raises(SizeError):
        parse_qaplib("1 0 0")
    with pytest.raises(SizeError):
        parse_qaplib("-3")
    with pytest.raises(DomainError) as err:
        parse_qaplib("2 0 1 1 0 0 -3 3 0")
    assert err.value.position == 6


def test_write_exact_text():
    inst = Instance([[0, 1], [1, 0]], [[0, 3], [3, 0]])
    assert write_qaplib(inst) == "2\n0 1\n1 0\n\n0 3\n3 0\n"


def test_round_trip_tiny():
    inst = Instance(TINY_A, TINY_B)
    assert parse_qaplib(write_qaplib(inst)) == inst


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**63 - 1), st.integers(1, 10_000))
def test_round_trip_generated(n, seed, max_value):
    inst = generate_taixxa(GeneratorSpec(n, seed, max_value))
    back = parse_qaplib(write_qaplib(inst))
    assert back == inst and back.n == n


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_round_trip_asymmetric(n, seed):
    rng = np.random.default_rng(seed)
    inst = Instance(rng.integers(0, 1000, (n, n)), rng.integers(0, 1000, (n, n)))
    back = parse_qaplib(write_qaplib(inst))
    assert back == inst and back.symmetric == inst.symmetric


def test_read_file(tmp_path):
    path = tmp_path / "tiny3.dat"
    path.write_text(write_qaplib(Instance(TINY_A, TINY_B)))
    assert read_qaplib(path) == Instance(TINY_A, TINY_B)


@pytest.mark.parametrize("n, seed, max_value", [(2, 0, 1), (7, 3, 5), (40, 99, 100)])
def test_generator_family(n, seed, max_value):
    inst = generate_taixxa(GeneratorSpec(n, seed, max_value))
    assert inst.symmetric and inst.zero_diagonal
    off = ~np.eye(n, dtype=bool)
    for m in (inst.a, inst.b):
        assert m[off].min() >= 1 and m[off].max() <= max_value
    assert generate_taixxa(GeneratorSpec(n, seed, max_value)) == inst


def test_generator_mean_n100():
    for seed in (0, 1, 2):
        inst = generate_taixxa(GeneratorSpec(100, seed))
        upper = inst.a[np.triu_indices(100, 1)]
        assert upper.size == 4950
        assert 45 <= upper.mean() <= 56


def test_generator_index_order():
    # A's upper triangle draws come first, then B's, from RandomStream(seed)
    from qap_anneal import RandomStream

    spec = GeneratorSpec(4, 12, 9)
    inst = generate_taixxa(spec)
    u = [RandomStream(12)(i) for i in range(12)]
    expected = [1 + int(x * 9) for x in u]
    iu = np.triu_indices(4, 1)
    assert inst.a[iu].tolist() == expected[:6]
    assert inst.b[iu].tolist() == expected[6:]


def test_generator_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(1, 0)
    with pytest.raises(ValueError):
        GeneratorSpec(5, 0, 0)
