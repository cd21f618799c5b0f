import numpy as np
import pytest

from lerwlab.parallel import get_threads, map_ordered, set_threads
from lerwlab.rng import CHUNK, as_generator, chunk_sizes, substream


def test_same_key_same_numbers():
    a = substream(5, "walk", 3).random(10)
    b = substream(5, "walk", 3).random(10)
    assert np.array_equal(a, b)


def test_different_keys_differ():
    a = substream(5, "walk", 3).random(10)
    assert not np.array_equal(a, substream(5, "walk", 4).random(10))
    assert not np.array_equal(a, substream(6, "walk", 3).random(10))
    assert not np.array_equal(a, substream(5, "hit", 3).random(10))


def test_tuple_seed_is_prefix():
    a = substream((5, 1), "x").random(4)
    b = substream(5, 1, "x").random(4)
    assert np.array_equal(a, b)


def test_generator_passthrough():
    g = np.random.default_rng(0)
    assert as_generator(g, "anything") is g


def test_seed_required_and_nonnegative():
    with pytest.raises(ValueError):
        substream(None)
    with pytest.raises(ValueError):
        substream(1, -3)


def test_chunk_sizes():
    assert chunk_sizes(1) == [1]
    assert chunk_sizes(CHUNK) == [CHUNK]
    assert chunk_sizes(2 * CHUNK + 5) == [CHUNK, CHUNK, 5]
    with pytest.raises(ValueError):
        chunk_sizes(0)


def test_map_ordered_keeps_order():
    saved = get_threads()
    try:
        for th in (1, 3):
            set_threads(th)
            assert map_ordered(lambda x: x * x, range(20)) == [x * x for x in range(20)]
    finally:
        set_threads(saved)
    with pytest.raises(ValueError):
        set_threads(0)
