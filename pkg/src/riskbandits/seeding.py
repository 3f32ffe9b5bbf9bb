"""Deterministic seed derivation and stream construction.

All randomness in this package flows through 64-bit seeds fed to the
counter-based Philox4x64-10 bit generator.  Sub-seeds are derived with a
published SplitMix64 chain so that independent implementations can
reproduce every stream:

    acc_0 = seed
    acc_i = splitmix64(acc_{i-1} XOR splitmix64(part_i))

where ``splitmix64`` is the finalizer from Steele, Lea & Flood (2014),
operating modulo 2**64.  The fold makes derivation compositional:
``derive_seed(s, a, b)`` equals ``derive_seed(derive_seed(s, a), b)``, so
callers can hand a derived seed down a call chain without losing
reproducibility.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    """One SplitMix64 finalizer step on a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts: int) -> int:
    """Derive a sub-seed from ``seed`` and integer context parts.

    The chain is order-sensitive: (seed, trial, arm) and (seed, arm, trial)
    yield unrelated streams.
    """
    acc = seed & _MASK64
    for part in parts:
        acc = splitmix64(acc ^ splitmix64(part & _MASK64))
    return acc


def philox_stream(seed: int) -> np.random.Generator:
    """A fresh Philox4x64-10 generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` uniforms strictly inside (0, 1), one 64-bit word each.

    Using ``(k + 0.5) * 2**-53`` with ``k`` uniform on ``[0, 2**53)`` keeps
    the endpoints out (so inverse-CDF transforms never see 0 or 1) and makes
    incremental draws prefix-stable: drawing ``a`` then ``b`` values equals
    drawing ``a + b`` values in one call.
    """
    raw = rng.integers(0, 1 << 53, size=n, dtype=np.uint64)
    return (raw + 0.5) * (2.0 ** -53)
