"""Counter-based random numbers for reproducible parallel Monte Carlo.

Every random quantity in the package is a pure function of
(seed, stream_id, step, channel): noise is produced by the Philox-4x32-10
block cipher keyed with the 64-bit master seed, with the 128-bit counter
laid out as (step, draw index, stream_id, domain).  Trajectories therefore
get identical increments whether they are integrated one at a time or in
vectorized batches, in any scheduling order, on any worker count.

One Philox block yields four 32-bit words; pairs of words are combined into
two 53-bit uniforms and transformed into two standard normals by the
Box-Muller map (no rejection, so the draw count per counter is fixed).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "philox4x32_10",
    "normals",
    "wiener_increments",
    "step_normals",
    "uniform",
    "DOMAIN_WIENER",
    "DOMAIN_RESAMPLE",
    "DOMAIN_SWEEP",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

DOMAIN_WIENER = 0
DOMAIN_RESAMPLE = 1
DOMAIN_SWEEP = 2


def _rounds(c0, c1, c2, c3, k0, k1):
    """Ten Philox-4x32 rounds on uint64 arrays holding 32-bit words."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _SHIFT32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _SHIFT32
        lo1 = p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def philox4x32_10(counter, key):
    """Philox-4x32-10 block: 4 counter words, 2 key words -> 4 output words.

    Accepts arrays broadcastable to a common shape in the leading axes;
    the trailing axis holds the words.
    """
    c = np.asarray(counter, dtype=np.uint64)
    k = np.asarray(key, dtype=np.uint64)
    out = _rounds(c[..., 0], c[..., 1], c[..., 2], c[..., 3], k[..., 0], k[..., 1])
    return np.stack([o.astype(np.uint32) for o in out], axis=-1)


def _split_key(seed: int):
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    return s & _MASK32, s >> _SHIFT32


def _block_normals(step, call, stream, domain, k0, k1):
    """Two standard normals per (step, call, stream, domain) counter."""
    c0, c1, c2, c3 = _rounds(step, call, stream, domain, k0, k1)
    u1 = ((((c0 << _SHIFT32) | c1) >> np.uint64(11)).astype(np.float64)
          * 2.0**-53 + 2.0**-54)
    u2 = ((((c2 << _SHIFT32) | c3) >> np.uint64(11)).astype(np.float64)
          * 2.0**-53 + 2.0**-54)
    r = np.sqrt(-2.0 * np.log(u1))
    return r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)


def normals(seed: int, stream_ids, step_ids, n_channels: int) -> np.ndarray:
    """Standard normals keyed by (seed, stream, step, channel).

    Returns an array of shape (n_streams, n_steps, n_channels); entry
    [i, j, k] depends only on (seed, stream_ids[i], step_ids[j], k).
    """
    streams = np.atleast_1d(np.asarray(stream_ids, dtype=np.uint64))
    steps = np.atleast_1d(np.asarray(step_ids, dtype=np.uint64))
    if n_channels < 1:
        raise ValueError("n_channels must be >= 1")
    k0, k1 = _split_key(seed)
    n_calls = (n_channels + 1) // 2
    out = np.empty((streams.size, steps.size, 2 * n_calls), dtype=np.float64)
    stream_grid = streams[:, None] * np.ones_like(steps)[None, :]
    step_grid = np.ones_like(streams)[:, None] * steps[None, :]
    domain = np.uint64(DOMAIN_WIENER)
    for c in range(n_calls):
        z0, z1 = _block_normals(step_grid, np.uint64(c), stream_grid, domain, k0, k1)
        out[:, :, 2 * c] = z0
        out[:, :, 2 * c + 1] = z1
    return out[:, :, :n_channels]


def wiener_increments(seed: int, stream_id: int, n_steps: int, n_channels: int,
                      dt: float) -> np.ndarray:
    """All Wiener increments of one trajectory, shape (n_steps, n_channels)."""
    z = normals(seed, [stream_id], np.arange(n_steps), n_channels)[0]
    return z * np.sqrt(dt)


def step_normals(seed: int, stream_ids, step: int, n_channels: int) -> np.ndarray:
    """One step's normals across a batch of streams, shape (n_streams, n_channels)."""
    return normals(seed, stream_ids, [step], n_channels)[:, 0, :]


def uniform(seed: int, stream_id: int, step: int, domain: int) -> float:
    """A single uniform in (0, 1) from a dedicated counter domain."""
    k0, k1 = _split_key(seed)
    c0, c1, _, _ = _rounds(np.uint64(step), np.uint64(0), np.uint64(stream_id),
                           np.uint64(domain), k0, k1)
    return float(((((c0 << _SHIFT32) | c1) >> np.uint64(11)).astype(np.float64)
                  * 2.0**-53 + 2.0**-54))
