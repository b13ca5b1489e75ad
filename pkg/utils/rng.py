"""Counter-based random streams keyed by (seed, stream_id)"""
import numpy as np

_MASK64 = (1 << 64) - 1


class RngStream:
    """
    Philox4x64 stream keyed by ``(seed, stream_id)``.

    The 128-bit Philox key is ``seed << 64 | stream_id`` and the counter starts
    at zero, so identical keys replay identical sequences on every platform and
    distinct stream ids give independent streams without any coordination.
    Gaussian variates come from numpy's ziggurat sampler
    (``Generator.standard_normal``); acceptance tests rely on this fixed choice.
    """

    __slots__ = ('seed', 'stream_id', '_generator')

    def __init__(self, seed: int = 0, stream_id: int = 0):
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if not 0 <= stream_id <= _MASK64:
            raise ValueError(f"stream_id must be a 64-bit unsigned integer, got {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = (self.seed << 64) | self.stream_id
        self._generator = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, size=None) -> np.ndarray:
        return self._generator.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self._generator.random(size)

    def substream(self, offset: int) -> 'RngStream':
        """Independent stream with the same seed and ``stream_id + offset``"""
        return RngStream(self.seed, (self.stream_id + offset) & _MASK64)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
