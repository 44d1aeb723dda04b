"""SplitMix64 with per-run substreams.

Generator (Steele, Lea and Flood, 2014), 64-bit state ``s``::

    s  <- s + 0x9E3779B97F4A7C15            (mod 2**64)
    z  <- s
    z  <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z  <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

Substreams: ``key = mix(seed)``; run ``r`` starts from state
``mix(key ^ (r * GOLDEN))`` and its ``k``-th draw (k = 0, 1, ...) is
``mix(state + (k + 1) * GOLDEN)``. A uniform double is ``(out >> 11) * 2**-53``.
All arithmetic is modulo 2**64, so the output depends only on
``(seed, run, k)`` and never on evaluation order.
"""

from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
MASK = (1 << 64) - 1

_U = np.uint64


def mix(z: int) -> int:
    """Scalar reference of the SplitMix64 output function."""
    z &= MASK
    z = ((z ^ (z >> 30)) * MUL1) & MASK
    z = ((z ^ (z >> 27)) * MUL2) & MASK
    return z ^ (z >> 31)


def run_uniforms_scalar(seed: int, run: int, k: int) -> list[float]:
    """First ``k`` uniforms of run ``run``, computed with Python integers."""
    key = mix(seed & MASK)
    state = mix(key ^ ((run * GOLDEN) & MASK))
    return [(mix(state + (i + 1) * GOLDEN) >> 11) * 2.0**-53 for i in range(k)]


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(MUL1)
    z = (z ^ (z >> _U(27))) * _U(MUL2)
    return z ^ (z >> _U(31))


def run_uniforms(seed: int, runs: np.ndarray, k: int) -> np.ndarray:
    """Uniforms for many runs at once, shape ``(len(runs), k)``; bit-identical to the scalar path."""
    runs = np.asarray(runs, dtype=np.uint64)
    key = _U(mix(seed & MASK))
    with np.errstate(over="ignore"):
        state = _mix_array(key ^ (runs * _U(GOLDEN)))
        steps = (np.arange(1, k + 1, dtype=np.uint64) * _U(GOLDEN))[None, :]
        out = _mix_array(state[:, None] + steps)
    return (out >> _U(11)).astype(np.float64) * 2.0**-53
