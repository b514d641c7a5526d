"""Delay observation maps: per-point vectors, sliding-window matrices,
and periodic extensions of short delay vectors."""

from __future__ import annotations

import numpy as np

from .core import Observable
from .systems import System, Trajectory

__all__ = [
    "delay_count_for",
    "delay_vector",
    "delay_matrix",
    "periodic_extension",
    "write_delay_csv",
    "read_delay_csv",
]


def delay_count_for(d: int) -> int:
    """Number of delays sufficient for generic reconstruction: 2d + 1."""
    if d < 0:
        raise ValueError("dimension must be nonnegative")
    return 2 * d + 1


def delay_vector(h: Observable, sys: System, x, m: int) -> np.ndarray:
    """(h(x), h(Tx), ..., h(T^{m-1}x)) as a length-m array in [0, 1]."""
    if m < 1:
        raise ValueError("delay count must be >= 1")
    x = np.asarray(x, dtype=float)
    cur = x[None, :]
    sys.check_domain(cur)
    vals = np.empty(m)
    for k in range(m):
        vals[k] = h.evaluate(cur)[0]
        if k + 1 < m:
            cur = sys.step_many(cur)
    return vals


def delay_vectors(h: Observable, sys: System, points, m: int) -> np.ndarray:
    """Batch form of `delay_vector`: one row per input point."""
    if m < 1:
        raise ValueError("delay count must be >= 1")
    cur = np.asarray(points, dtype=float)
    if cur.ndim == 1:
        cur = cur[None, :]
    sys.check_domain(cur)
    out = np.empty((cur.shape[0], m))
    for k in range(m):
        out[:, k] = h.evaluate(cur)
        if k + 1 < m:
            cur = sys.step_many(cur)
    return out


def delay_matrix(h: Observable, traj: Trajectory, m: int) -> np.ndarray:
    """Sliding-window delay matrix along an orbit.

    Row i is the delay vector at state i; entry (i, k) equals h(states[i+k]).
    h is evaluated once per trajectory state and the rows are windows into
    that sequence, which makes the Hankel shift structure exact.
    """
    n = len(traj)
    if m < 1:
        raise ValueError("delay count must be >= 1")
    if n < m:
        raise ValueError(f"trajectory of length {n} too short for {m} delays")
    series = h.evaluate(traj.states)
    idx = np.arange(n - m + 1)[:, None] + np.arange(m)[None, :]
    return series[idx]


def periodic_extension(base, m: int) -> np.ndarray:
    """Extend a length-(t+1) delay vector periodically to length m:
    entry k of the result is base[k mod (t+1)]."""
    base = np.asarray(base, dtype=float)
    if base.ndim != 1 or base.size < 1:
        raise ValueError("base must be a nonempty 1-D vector")
    if m < 1:
        raise ValueError("target length must be >= 1")
    return base[np.arange(m) % base.size]


def write_delay_csv(path, mat: np.ndarray) -> None:
    """CSV export: header k0..k{m-1}, one delay vector per row, LF endings."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        raise ValueError("delay matrix must be 2-D")
    header = ",".join(f"k{j}" for j in range(mat.shape[1]))
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in mat:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_delay_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
