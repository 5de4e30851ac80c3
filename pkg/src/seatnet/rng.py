"""Deterministic cross-platform random number generation.

All stochastic behavior in the engine (weight init, dropout masks, shuffles,
crop offsets, synthetic data) flows through one fixed generator so that a
(seed, counter) pair identifies a value stream bit-exactly on every platform:
splitmix64 expands the seed into the 256-bit state of xoshiro256**, whose
64-bit outputs are mapped to doubles in [0, 1) via ``(x >> 11) * 2**-53``.

The Cython backend provides a fast bulk-fill of the same stream; the pure
fallback walks the identical recurrence with Python integers.
"""

import numpy as np

from seatnet import backend

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15

# Stream-purpose tags folded into derived seeds so that, e.g., shuffling and
# dropout never consume from the same stream.
PURPOSE_INIT = 1
PURPOSE_SHUFFLE = 2
PURPOSE_CROP = 3
PURPOSE_DROPOUT = 4
PURPOSE_SPLIT = 5
PURPOSE_SYNTH = 6


def mix64(z):
    """splitmix64 output mix; stateless 64-bit avalanche function."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed, *tags):
    """Fold integer tags (purpose ids, epoch numbers) into a child seed.

    Used to give shuffling, cropping, dropout, etc. independent streams from
    one user-facing seed without the streams ever overlapping by accident.
    """
    h = seed & _MASK
    for t in tags:
        h = mix64((h + _GOLDEN) ^ mix64((int(t) & _MASK) + _GOLDEN))
    return h


class Rng:
    """xoshiro256** stream seeded via splitmix64.

    State is identified by (seed, counter): ``Rng(seed)`` advanced ``counter``
    draws always yields the same next value, regardless of platform.
    """

    def __init__(self, seed, counter=0):
        self.seed = int(seed) & _MASK
        self.counter = 0
        s = []
        x = self.seed
        for _ in range(4):
            x = (x + _GOLDEN) & _MASK
            s.append(mix64(x))
        self._s = s
        if counter:
            self.skip(counter)

    def next_u64(self):
        s = self._s
        result = (_rotl(( s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        self.counter += 1
        return result

    def random(self):
        """One double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, n):
        """Array of n doubles in [0, 1), drawn sequentially from the stream."""
        n = int(n)
        out = np.empty(n, dtype=np.float64)
        state = np.array(self._s, dtype=np.uint64)
        backend.rng_fill(state, out)
        self._s = [int(v) for v in state]
        self.counter += n
        return out

    def randint(self, n):
        """Integer in [0, n), as floor(random() * n)."""
        if n <= 0:
            raise ValueError("randint upper bound must be positive")
        return int(self.random() * n)

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a mutable sequence."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def skip(self, n):
        """Advance the stream by n draws (replay; used to restore counters)."""
        for _ in range(int(n)):
            self.next_u64()

    def spawn(self, *tags):
        """Child generator with a seed derived from this seed and the tags."""
        return Rng(derive_seed(self.seed, *tags))

    def state(self):
        """(seed, counter) identity of the stream position."""
        return (self.seed, self.counter)


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK
