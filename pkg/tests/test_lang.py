import numpy as np
import pytest
from hypothesis import given, strategies as st

from iterlearn.errors import ConfigError
from iterlearn.lang import (
    LanguageTable,
    bits_to_index,
    bits_to_indices,
    decide,
    enumerate_space,
    index_to_bits,
    indices_to_bits,
    materialize_language,
)

import oracles

# the three-bit language used throughout: s1 = not m3, s2 = m1, s3 = not m2
EXAMPLE_RULE = lambda m: np.array([1 - m[2], m[0], 1 - m[1]])  # noqa: E731
EXAMPLE_ROWS = {
    (0, 0, 0): (1, 0, 1), (0, 0, 1): (0, 0, 1), (0, 1, 0): (1, 0, 0), (0, 1, 1): (0, 0, 0),
    (1, 0, 0): (1, 1, 1), (1, 0, 1): (0, 1, 1), (1, 1, 0): (1, 1, 0), (1, 1, 1): (0, 1, 0),
}


@pytest.mark.parametrize(
    "p, expected",
    [((0.5, 0.7), (0, 1)), ((0.0, 1.0, 0.0), (0, 1, 0)), ((0.4999, 0.5001), (0, 1))],
)
def test_decide_examples(p, expected):
    assert tuple(decide(p)) == expected


@given(st.lists(st.floats(0, 1), min_size=1, max_size=24))
def test_decide_is_idempotent_through_embedding(p):
    once = decide(p)
    assert np.array_equal(decide(once.astype(float)), once)
    assert tuple(once) == oracles.decide(p)


def test_enumerate_small_spaces():
    assert enumerate_space(1).tolist() == [[0], [1]]
    assert enumerate_space(2).tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    three = {tuple(row) for row in enumerate_space(3)}
    assert three == set(EXAMPLE_ROWS)


@pytest.mark.parametrize("n", [0, 25, -3])
def test_enumerate_refuses_out_of_range(n):
    with pytest.raises(ConfigError):
        enumerate_space(n)


def test_enumeration_is_ascending_and_round_trips():
    for n in range(1, 13):
        space = enumerate_space(n)
        assert len(space) == 2**n
        assert np.array_equal(bits_to_indices(space), np.arange(2**n))


def test_bit_zero_is_most_significant():
    assert index_to_bits(4, 3).tolist() == [1, 0, 0]
    assert bits_to_index([0, 0, 1]) == 1
    for k in range(64):
        assert tuple(index_to_bits(k, 6)) == oracles.bits(k, 6)


@given(st.integers(1, 20).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, 2**n - 1))))
def test_index_round_trip(args):
    n, k = args
    assert bits_to_index(index_to_bits(k, n)) == k
    assert indices_to_bits(np.array([k]), n)[0].tolist() == list(oracles.bits(k, n))


def test_index_bounds():
    with pytest.raises(ValueError):
        index_to_bits(8, 3)
    with pytest.raises(ValueError):
        bits_to_index([0, 2])


def test_identity_and_constant_languages():
    ident = materialize_language(lambda m: m, 2)
    assert ident.signal_index.tolist() == [0, 1, 2, 3]
    const = materialize_language(lambda m: np.zeros(3, dtype=np.int8), 3)
    assert set(const.signal_index.tolist()) == {0}


def test_three_bit_language_rows():
    lang = materialize_language(EXAMPLE_RULE, 3)
    for m, s in EXAMPLE_ROWS.items():
        assert tuple(lang.encode(np.array(m))) == s


def test_materialize_is_reproducible():
    rng = np.random.default_rng(3)
    lut = rng.integers(0, 32, size=32)
    f = lambda m: index_to_bits(int(lut[bits_to_index(m)]), 5)  # noqa: E731
    a, b = materialize_language(f, 5), materialize_language(f, 5)
    assert a == b
    assert np.array_equal(a.signal_index, lut)


def test_table_validation():
    with pytest.raises(ValueError):
        LanguageTable(2, np.array([0, 1, 2]))
    with pytest.raises(ValueError):
        LanguageTable(2, np.array([0, 1, 2, 4]))
