import numpy as np
import pytest

from utils.rng import RngStream


def test_same_key_replays():
    np.testing.assert_array_equal(RngStream(42, 7).standard_normal(100), RngStream(42, 7).standard_normal(100))


def test_streams_and_seeds_differ():
    base = RngStream(42, 7).standard_normal(10)
    assert not np.array_equal(base, RngStream(42, 8).standard_normal(10))
    assert not np.array_equal(base, RngStream(43, 7).standard_normal(10))


def test_substream():
    sub = RngStream(5, 1).substream(3)
    assert (sub.seed, sub.stream_id) == (5, 4)
    np.testing.assert_array_equal(sub.uniform(5), RngStream(5, 4).uniform(5))
    assert RngStream(5, 2 ** 64 - 1).substream(1).stream_id == 0


@pytest.mark.parametrize('seed,stream_id', [(-1, 0), (0, -1), (2 ** 64, 0)])
def test_key_range(seed, stream_id):
    with pytest.raises(ValueError):
        RngStream(seed, stream_id)
