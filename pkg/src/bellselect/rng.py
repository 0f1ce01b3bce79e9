"""Counter-based uniform draws.

Every draw is a pure function of ``(master_seed, trial, slot)``: the three
integers are combined and pushed through the SplitMix64 finalizer. There is
no generator state, so any split of the trial range across workers produces
the same numbers.
"""
from __future__ import annotations

import numpy as np

_MASK = 0xFFFF_FFFF_FFFF_FFFF
_GOLDEN = np.uint64(0x9E37_79B9_7F4A_7C15)
_SLOT_MUL = np.uint64(0xD1B5_4A32_D192_ED03)
_M1 = np.uint64(0xBF58_476D_1CE4_E5B9)
_M2 = np.uint64(0x94D0_49BB_1331_11EB)
_INV_2_53 = 1.0 / float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    return z


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _MASK:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def uniforms(seed: int, trials: np.ndarray, n_slots: int, stream: int = 0) -> np.ndarray:
    """Uniform draws in ``[0, 1)`` with shape ``(len(trials), n_slots)``.

    ``stream`` separates independent uses of the same seed (e.g. the two
    admission processes of a simulation).
    """
    trials = np.asarray(trials, dtype=np.uint64).reshape(-1, 1)
    slots = np.arange(n_slots, dtype=np.uint64).reshape(1, -1)
    with np.errstate(over="ignore"):
        key = _mix64(np.array([check_seed(seed)], dtype=np.uint64) + _GOLDEN * np.uint64(stream + 1))
        z = key ^ (trials * _GOLDEN) ^ ((slots + np.uint64(1)) * _SLOT_MUL)
        z = _mix64(_mix64(z) + _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def sample_categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Cumulative-sum inversion, one row of ``probs`` per draw in ``u``.

    Picks the first index ``k`` with ``u < cumsum[k]``. Indices at or after
    the last positive-probability entry are capped so rounding in the
    cumulative sum can never select a zero-probability category.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    u = np.asarray(u, dtype=float).reshape(-1)
    if probs.shape[0] == 1 and u.size > 1:
        probs = np.broadcast_to(probs, (u.size, probs.shape[1]))
    k = probs.shape[1]
    cum = np.cumsum(probs, axis=1)
    positive = probs > 1e-300
    last = k - 1 - np.argmax(positive[:, ::-1], axis=1)
    cum = np.where(np.arange(k)[None, :] >= last[:, None], np.inf, cum)
    return np.argmax(u[:, None] < cum, axis=1)
