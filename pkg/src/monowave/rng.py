"""Counter-based random streams.

Every variate is a pure function of ``(seed, sample index, coordinate)``: the
Philox bit generator is keyed by the seed and addressed by counter, so any
block of samples can be produced independently and in any order.
"""
import zlib

import numpy as np
from scipy.special import ndtri

_TWO_M53 = 2.0**-53


def derive_seed(seed, *labels):
    """Deterministically derive a child 64-bit seed from ``seed`` and labels."""
    # label count and type tags keep (s, "a") and (s, "a", 0) apart: SeedSequence
    # treats trailing zero words as padding
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, len(labels)]
    for label in labels:
        if isinstance(label, str):
            words += [1, zlib.crc32(label.encode("utf-8"))]
        else:
            words += [2, int(label) & 0xFFFFFFFFFFFFFFFF]
    return int(np.random.SeedSequence(words).generate_state(1, np.uint64)[0])


def _key(seed):
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


def _stride(width):
    return -(-width // 4) * 4


def raw_block(seed, start, count, width):
    """Raw 64-bit words for samples ``start .. start+count-1``, each ``width`` wide."""
    stride = _stride(width)
    bits = np.random.Philox(key=_key(seed), counter=start * stride // 4)
    return bits.random_raw(count * stride).reshape(count, stride)[:, :width]


def uniform_block(seed, start, count, width):
    """Uniform variates in the open interval (0, 1)."""
    raw = raw_block(seed, start, count, width)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def standard_normal_block(seed, start, count, width):
    return ndtri(uniform_block(seed, start, count, width))


def sign_block(seed, start, count, width):
    raw = raw_block(seed, start, count, width)
    return np.where(raw >> np.uint64(63), 1.0, -1.0)


def chunk_bounds(samples, chunk):
    """Fixed partition of ``range(samples)`` into chunks of size ``chunk``."""
    return [(s, min(chunk, samples - s)) for s in range(0, samples, chunk)]
