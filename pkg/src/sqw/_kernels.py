"""Hot loops for trajectory sampling, with numba and pure-numpy variants.

Set ``SQW_DISABLE_NUMBA=1`` to force the numpy path.  Both paths consume the
same table of uniforms, so they select the same outcomes.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SQW_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniforms(seed: int, first: int, count: int, steps: int) -> np.ndarray:
    """Uniforms u[t, j] in [0, 1) for trajectories first..first+count-1.

    Each value is a splitmix64 hash of (seed, global trajectory index, step),
    so any chunking of the trajectory range reproduces the same numbers.
    """
    key = _mix64(np.array([seed & (2**64 - 1)], dtype=np.uint64) + _GOLDEN)[0]
    t = np.arange(first, first + count, dtype=np.uint64)[:, None]
    j = np.arange(steps, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        ctr = t * np.uint64(steps) + j + np.uint64(1)
        z = _mix64(key + ctr * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _choose(probs: np.ndarray, u: float, prune: float) -> int:
    """Index drawn from ``probs`` after zeroing branches below ``prune``."""
    total = 0.0
    for p in probs:
        if p >= prune:
            total += p
    target = u * total
    acc = 0.0
    last = -1
    for i in range(probs.shape[0]):
        p = probs[i]
        if p < prune:
            continue
        last = i
        acc += p
        if target < acc:
            return i
    return last


def trajectories_numpy(U, starts, rho0, u, prune):
    """Batched measure-then-evolve steps over all trajectories at once."""
    m, n = u.shape
    nv = starts.shape[0] - 1
    rho = np.broadcast_to(rho0, (m,) + rho0.shape).copy()
    outcomes = np.empty((m, n), dtype=np.int64)
    for j in range(n):
        diag = np.real(np.einsum("tii->ti", rho))
        probs = np.add.reduceat(diag, starts[:-1], axis=1)
        probs = np.where(probs >= prune, probs, 0.0)
        cum = np.cumsum(probs, axis=1)
        target = u[:, j] * cum[:, -1]
        x = (cum <= target[:, None]).sum(axis=1)
        # Guard against target landing exactly on the total.
        nz_last = nv - 1 - np.argmax((probs > 0)[:, ::-1], axis=1)
        x = np.minimum(x, nz_last)
        outcomes[:, j] = x
        new = np.empty_like(rho)
        for v in range(nv):
            sel = np.flatnonzero(x == v)
            if sel.size == 0:
                continue
            a, b = starts[v], starts[v + 1]
            cols = U[:, a:b]
            blk = rho[sel, a:b, a:b]
            p = np.real(np.trace(blk, axis1=1, axis2=2))
            new[sel] = (cols @ blk) @ cols.conj().T / p[:, None, None]
        rho = new
    return outcomes, rho.sum(axis=0)


def _trajectories_loop(U, starts, rho0, u, prune):
    m, n = u.shape
    nv = starts.shape[0] - 1
    dim = rho0.shape[0]
    outcomes = np.empty((m, n), dtype=np.int64)
    total = np.zeros((dim, dim), dtype=np.complex128)
    probs = np.empty(nv, dtype=np.float64)
    for t in range(m):
        rho = rho0.copy()
        for j in range(n):
            for v in range(nv):
                s = 0.0
                for i in range(starts[v], starts[v + 1]):
                    s += rho[i, i].real
                probs[v] = s
            x = _choose_nb(probs, u[t, j], prune)
            outcomes[t, j] = x
            a = starts[x]
            b = starts[x + 1]
            cols = np.ascontiguousarray(U[:, a:b])
            blk = np.ascontiguousarray(rho[a:b, a:b])
            p = 0.0
            for i in range(b - a):
                p += blk[i, i].real
            tmp = cols @ blk
            rho = (tmp @ cols.conj().T) / p
        total += rho
    return outcomes, total


if HAVE_NUMBA:
    _choose_nb = njit(cache=True, nogil=True)(_choose)
    trajectories_numba = njit(cache=True, nogil=True)(_trajectories_loop)
else:
    _choose_nb = _choose
    trajectories_numba = None


def run_trajectories(U, starts, rho0, u, prune, backend: str | None = None):
    """Dispatch to the numba kernel when available, else to numpy."""
    if backend is None:
        backend = "numba" if HAVE_NUMBA else "numpy"
    U = np.ascontiguousarray(U, dtype=np.complex128)
    rho0 = np.ascontiguousarray(rho0, dtype=np.complex128)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.float64)
    if backend == "numba":
        if trajectories_numba is None:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        return trajectories_numba(U, starts, rho0, u, float(prune))
    if backend == "numpy":
        return trajectories_numpy(U, starts, rho0, u, float(prune))
    raise ValueError(f"unknown backend {backend!r}")
