import os
import subprocess
import sys

import numpy as np
import pytest

from sqw import _kernels
from sqw.graph_core import edge_basis
from sqw.scattering import haar_family, hadamard_center_family
from sqw.unitary_walk import build_unitary

from conftest import random_graphs


def _setup(g, f, rng):
    W = build_unitary(g, f)
    b = W.basis
    psi = rng.normal(size=b.dim) + 1j * rng.normal(size=b.dim)
    psi /= np.linalg.norm(psi)
    return W.matrix, b.block_starts.astype(np.int64), np.outer(psi, psi.conj())


def test_uniforms_in_unit_interval():
    u = _kernels.counter_uniforms(3, 0, 500, 40)
    assert u.shape == (500, 40)
    assert u.min() >= 0.0 and u.max() < 1.0
    # Crude uniformity: mean and variance of 20000 draws.
    assert abs(u.mean() - 0.5) < 0.01
    assert abs(u.var() - 1 / 12) < 0.005


def test_uniforms_chunk_invariant():
    whole = _kernels.counter_uniforms(11, 0, 300, 7)
    parts = np.vstack([_kernels.counter_uniforms(11, a, b - a, 7) for a, b in [(0, 17), (17, 200), (200, 300)]])
    assert np.array_equal(whole, parts)


def test_uniforms_depend_on_seed():
    a = _kernels.counter_uniforms(0, 0, 50, 5)
    b = _kernels.counter_uniforms(1, 0, 50, 5)
    assert not np.any(a == b)


def test_uniforms_large_seed_accepted():
    u = _kernels.counter_uniforms(2**70 + 5, 0, 4, 3)
    assert u.shape == (4, 3)


def test_choose_skips_pruned_branches():
    probs = np.array([0.5, 1e-16, 0.5])
    assert _kernels._choose(probs, 0.0, 1e-14) == 0
    assert _kernels._choose(probs, 0.49999, 1e-14) == 0
    assert _kernels._choose(probs, 0.5, 1e-14) == 2
    assert _kernels._choose(probs, 0.9999999, 1e-14) == 2


def test_choose_top_edge_returns_last_live_branch():
    probs = np.array([0.3, 0.7, 0.0])
    assert _kernels._choose(probs, 1.0, 1e-14) == 1


@pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")
def test_numba_matches_numpy(rng):
    for i, g in enumerate(random_graphs(6, seed=5, n_min=3, n_max=6)):
        U, starts, rho0 = _setup(g, haar_family(g, i), rng)
        u = _kernels.counter_uniforms(i, 0, 64, 9)
        o1, s1 = _kernels.run_trajectories(U, starts, rho0, u, 1e-14, "numba")
        o2, s2 = _kernels.run_trajectories(U, starts, rho0, u, 1e-14, "numpy")
        assert np.array_equal(o1, o2)
        assert np.abs(s1 - s2).max() < 1e-10


def test_numpy_single_trajectory_matches_hand_step(t3, rng):
    U, starts, rho0 = _setup(t3, hadamard_center_family(t3), rng)
    u = np.array([[0.37, 0.81, 0.05]])
    outcomes, total = _kernels.run_trajectories(U, starts, rho0, u, 1e-14, "numpy")
    rho = rho0.copy()
    for j in range(3):
        p = np.array([np.real(np.trace(rho[starts[v]:starts[v + 1], starts[v]:starts[v + 1]])) for v in range(3)])
        x = _kernels._choose(p, u[0, j], 1e-14)
        assert outcomes[0, j] == x
        P = np.zeros_like(rho)
        a, b = starts[x], starts[x + 1]
        P[a:b, a:b] = rho[a:b, a:b]
        rho = U @ P @ U.conj().T / p[x]
    assert np.abs(total - rho).max() < 1e-12


def test_mean_state_is_trace_one(rng):
    g = next(random_graphs(1, seed=8, n_min=4, n_max=5))
    U, starts, rho0 = _setup(g, haar_family(g, 3), rng)
    u = _kernels.counter_uniforms(0, 0, 100, 6)
    _, total = _kernels.run_trajectories(U, starts, rho0, u, 1e-14)
    assert abs(np.trace(total) - 100) < 1e-9


def test_unknown_backend_rejected(t3, rng):
    U, starts, rho0 = _setup(t3, hadamard_center_family(t3), rng)
    with pytest.raises(ValueError):
        _kernels.run_trajectories(U, starts, rho0, np.zeros((1, 1)), 1e-14, "fortran")


def test_disable_env_forces_numpy():
    code = "from sqw import _kernels; print(_kernels.HAVE_NUMBA, _kernels.trajectories_numba)"
    env = dict(os.environ, SQW_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "None"]


def test_numba_request_fails_when_disabled(t3, rng, monkeypatch):
    U, starts, rho0 = _setup(t3, hadamard_center_family(t3), rng)
    monkeypatch.setattr(_kernels, "trajectories_numba", None)
    with pytest.raises(RuntimeError):
        _kernels.run_trajectories(U, starts, rho0, np.zeros((1, 1)), 1e-14, "numba")


def test_edge_basis_starts_cover_dimension(t3):
    b = edge_basis(t3)
    assert b.block_starts[0] == 0 and b.block_starts[-1] == b.dim
