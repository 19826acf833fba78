"""Open quantum walk on directed edges: Φ_S(ρ) = Σ_x K(x) ρ K(x)†.

Superoperators use row-major vectorization, vec(AρB) = (A ⊗ Bᵀ) vec(ρ), so
the matrix of ρ ↦ KρK† is K ⊗ conj(K).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .graph_core import EdgeBasis, Graph, edge_basis, has_odd_cycle
from .numerics import (
    EPS_CLUSTER_NONNORMAL,
    EPS_RANK,
    general_spectrum,
    nullity,
    perron_analysis,
    subdominant_modulus,
)
from .scattering import ScatteringFamily
from .unitary_walk import DimensionMismatch, build_unitary

MAX_SUPEROPERATOR_EDGES = 64
PRUNE_TOL = 1e-14
STATE_TOL = 1e-10
TRAJECTORY_CHUNK = 2048


class TooLarge(ValueError):
    pass


class BadState(ValueError):
    pass


class WindowTooSmall(ValueError):
    pass


# ----- channels -----


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus: tuple[np.ndarray, ...]
    dim: int

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply_channel(self, rho)

    def trace_defect(self) -> float:
        total = sum(K.conj().T @ K for K in self.kraus)
        return float(np.abs(total - np.eye(self.dim)).max())

    def superoperator(self) -> np.ndarray:
        if self.dim > MAX_SUPEROPERATOR_EDGES:
            raise TooLarge(f"superoperator of size {self.dim}² × {self.dim}² is not materialized")
        return sum(np.kron(K, K.conj()) for K in self.kraus)

    def choi(self) -> np.ndarray:
        """Σ_{ij} |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)."""
        if self.dim > MAX_SUPEROPERATOR_EDGES:
            raise TooLarge("Choi matrix not materialized at this size")
        vecs = np.stack([K.reshape(-1, order="F") for K in self.kraus], axis=1)
        return vecs @ vecs.conj().T

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """self ∘ other."""
        if other.dim != self.dim:
            raise DimensionMismatch("channel dimensions differ")
        return KrausChannel(tuple(A @ B for A in self.kraus for B in other.kraus), self.dim)


def apply_channel(channel: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (channel.dim, channel.dim):
        raise DimensionMismatch(f"state has shape {rho.shape}, channel acts on dimension {channel.dim}")
    out = np.zeros((channel.dim, channel.dim), dtype=complex)
    for K in channel.kraus:
        out += K @ rho @ K.conj().T
    return out


def kraus_operators(g: Graph, f: ScatteringFamily) -> list[np.ndarray]:
    """K(x) = P_x^O U P_x^I, one per vertex."""
    W = build_unitary(g, f)
    basis = W.basis
    out = []
    for x in g.vertices:
        K = np.zeros_like(W.matrix)
        rows, cols = basis.out_block(x), basis.in_block(x)
        K[np.ix_(rows, cols)] = W.matrix[np.ix_(rows, cols)]
        out.append(K)
    return out


def walk_channel(g: Graph, f: ScatteringFamily) -> KrausChannel:
    ks = kraus_operators(g, f)
    return KrausChannel(tuple(ks), edge_basis(g).dim)


def _projector(dim: int, idx: np.ndarray) -> np.ndarray:
    P = np.zeros((dim, dim))
    P[idx, idx] = 1.0
    return P


@dataclass(frozen=True, eq=False)
class DecoherenceMaps:
    D_in: KrausChannel
    D_out: KrausChannel
    diag: KrausChannel


def decoherence_maps(g: Graph) -> DecoherenceMaps:
    basis = edge_basis(g)
    n = basis.dim
    p_in = tuple(_projector(n, basis.in_block(x)) for x in g.vertices)
    p_out = tuple(_projector(n, basis.out_block(x)) for x in g.vertices)
    diag = tuple(_projector(n, np.array([i])) for i in range(n))
    return DecoherenceMaps(KrausChannel(p_in, n), KrausChannel(p_out, n), KrausChannel(diag, n))


def pinch(basis: EdgeBasis, rho: np.ndarray) -> np.ndarray:
    """D^I without building Kraus operators."""
    out = np.zeros_like(rho)
    for x in basis.graph.vertices:
        s = basis.in_slice(x)
        out[s, s] = rho[s, s]
    return out


def phi_diag(g: Graph, f: ScatteringFamily) -> np.ndarray:
    """Row-stochastic M[src, tgt] = |S_{zy}(x)|² for src = |xy⟩, tgt = |zx⟩.

    The matrix is bistochastic; a diagonal state with weights p evolves to
    p @ M.
    """
    W = build_unitary(g, f)
    M = np.abs(W.matrix.T) ** 2
    return M


# ----- spectrum -----


@dataclass
class EigenLift:
    value: complex
    diag_vector: np.ndarray
    state: np.ndarray
    residual: float


@dataclass
class ChannelSpectrum:
    kernel_dim: int
    expected_kernel_dim: int
    kernel_residual: float
    nonzero_spectrum: list[tuple[complex, int]]
    diag_nonzero_spectrum: list[tuple[complex, int]]
    spectra_match: bool
    diagonalizable: bool
    zero_algebraic: int
    lifts: list[EigenLift] = field(repr=False)

    @property
    def max_lift_residual(self) -> float:
        return max((l.residual for l in self.lifts), default=0.0)


def _pinch_complement_basis(basis: EdgeBasis) -> list[int]:
    """Row-major indices of |i⟩⟨j| with i and j in different in-blocks."""
    owner = basis.vertex_of_index()
    n = basis.dim
    return [i * n + j for i in range(n) for j in range(n) if owner[i] != owner[j]]


def channel_spectrum(g: Graph, f: ScatteringFamily) -> ChannelSpectrum:
    """Kernel, nonzero spectrum and Jordan structure of Φ_S.

    The kernel is compared with range(I − D^I), the nonzero eigenvalues with
    those of Φ^Diag (with geometric multiplicities), and every nonzero
    eigenvector of Φ^Diag is lifted to an eigenvector of Φ_S.
    """
    basis = edge_basis(g)
    n = basis.dim
    if n > MAX_SUPEROPERATOR_EDGES:
        raise TooLarge(f"|D| = {n} exceeds {MAX_SUPEROPERATOR_EDGES}")
    ch = walk_channel(g, f)
    L = ch.superoperator()
    N2 = n * n
    kdim = nullity(L)
    degs = g.degrees
    expected = int(degs.sum() ** 2 - (degs**2).sum())
    comp = _pinch_complement_basis(basis)
    kres = float(np.abs(L[:, comp]).max(initial=0.0))

    M = phi_diag(g, f)
    Mc = M.T  # column convention: acts on diagonal weight vectors
    ev_L = [e for e in general_spectrum(L) if abs(e.value) > EPS_CLUSTER_NONNORMAL]
    ev_M = [e for e in general_spectrum(Mc) if abs(e.value) > EPS_CLUSTER_NONNORMAL]
    nz_L = [(e.value, e.geometric) for e in ev_L]
    nz_M = [(e.value, e.geometric) for e in ev_M]
    match = len(nz_L) == len(nz_M) and all(
        any(abs(a - b) < 1e-7 and ma == mb for b, mb in nz_M) for a, ma in nz_L
    )

    # Algebraic multiplicity of 0: nullity of L^k once it stabilizes.
    power = L.copy()
    prev = kdim
    while True:
        power = power @ L
        cur = nullity(power)
        if cur == prev or cur == N2:
            break
        prev = cur
    zero_alg = max(cur, prev)
    diagonalizable = zero_alg == kdim and all(e.algebraic == e.geometric for e in ev_M)

    lifts = []
    for e in ev_M:
        lam = e.value
        for a in _kernel_vectors(Mc - lam * np.eye(n)):
            A = np.diag(a)
            PhiA = ch(A)
            B = A + (PhiA - pinch(basis, PhiA)) / lam
            res = float(np.abs(ch(B) - lam * B).max())
            lifts.append(EigenLift(lam, a, B, res))
    return ChannelSpectrum(kdim, expected, kres, nz_L, nz_M, match, diagonalizable, zero_alg, lifts)


def _kernel_vectors(M: np.ndarray) -> list[np.ndarray]:
    from .numerics import nullspace

    K = nullspace(M, EPS_RANK)
    return [K[:, i] for i in range(K.shape[1])]


# ----- asymptotics -----


@dataclass
class AsymptoticReport:
    mode: str
    gap: float | None
    vertex_limit: np.ndarray | None
    edge_limit: np.ndarray | None
    irreducible: bool
    period: int
    raw_spectrum: list[tuple[complex, int]]

    def limit(self, rho: np.ndarray) -> np.ndarray:
        """The limiting state I·tr(ρ)/Σd (Cesàro limit in the periodic case)."""
        if self.edge_limit is None:
            raise ValueError("no limit state when some S_{zy}(x) vanish")
        return np.diag(self.edge_limit) * np.trace(rho)


def asymptotic_state(g: Graph, f: ScatteringFamily) -> AsymptoticReport:
    """Long-time behaviour of Φ_S when every S_{zy}(x) is nonzero.

    Odd cycles give exponential convergence to I/Σd·tr; bipartite graphs give
    period 2 and convergence in the Cesàro sense.  Families with vanishing
    entries are reported as unclassified together with the spectrum of Φ^Diag.
    """
    M = phi_diag(g, f)
    raw = [(e.value, e.algebraic) for e in general_spectrum(M)]
    pr = perron_analysis(M)
    if f.has_zero_entries():
        return AsymptoticReport("unclassified", None, None, None, pr.irreducible, pr.period, raw)
    degs = g.degrees.astype(float)
    total = degs.sum()
    mode = "exponential" if has_odd_cycle(g) else "cesaro"
    gap = 1.0 - subdominant_modulus(M)
    return AsymptoticReport(mode, gap, degs / total, np.full(edge_basis(g).dim, 1.0 / total), pr.irreducible, pr.period, raw)


def vertex_law(basis: EdgeBasis, rho: np.ndarray) -> np.ndarray:
    """Q(x) = tr(P_x^I ρ)."""
    diag = np.real(np.diag(rho))
    return np.add.reduceat(diag, basis.block_starts[:-1]) if basis.dim else np.zeros(0)


def vertex_series(g: Graph, f: ScatteringFamily, rho0: np.ndarray, n: int) -> np.ndarray:
    """Q_k(x) for k = 0..n under Φ_S.

    The first step applies Φ_S in full, since coherences of ρ0 inside an
    in-block feed the next diagonal.  Φ_S(ρ) has no coherences within any
    in-block, so later steps only need Φ^Diag.
    """
    basis = edge_basis(g)
    rho0 = check_state(rho0, basis.dim)
    out = np.empty((n + 1, g.vertex_count))
    out[0] = vertex_law(basis, rho0)
    if n == 0:
        return out
    U = build_unitary(g, f).matrix
    p = np.zeros(basis.dim)
    for x in g.vertices:
        s = basis.in_slice(x)
        cols = U[:, s]
        p += np.real(np.einsum("ik,kl,il->i", cols, rho0[s, s], cols.conj()))
    M = phi_diag(g, f)
    for k in range(1, n + 1):
        out[k] = np.add.reduceat(p, basis.block_starts[:-1])
        p = p @ M
    return out


def check_state(rho: np.ndarray, dim: int, tol: float = STATE_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise BadState(f"state has shape {rho.shape}, expected {(dim, dim)}")
    if not np.all(np.isfinite(rho)):
        raise BadState("state has non-finite entries")
    if np.abs(rho - rho.conj().T).max(initial=0.0) > tol:
        raise BadState("state is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise BadState(f"trace is {np.trace(rho).real:.12g}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min(initial=0.0) < -tol:
        raise BadState("state is not positive semidefinite")
    return rho


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho)


# ----- trajectories -----


@dataclass
class TrajectoryResult:
    outcomes: np.ndarray
    mean_state: np.ndarray
    seed: int
    backend: str


def _thread_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SQW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def sample_trajectories(
    g: Graph,
    f: ScatteringFamily,
    rho0: np.ndarray,
    n: int,
    m: int,
    seed: int,
    *,
    workers: int | None = None,
    backend: str | None = None,
    prune: float = PRUNE_TOL,
) -> TrajectoryResult:
    """Sample m measure-then-evolve trajectories of n steps.

    At each step the in-block of vertex x is measured with probability
    tr(P_x^I ρ), then ρ ← U P_x^I ρ P_x^I U† / p.  Outcomes are reported as
    vertex ids.  Uniforms are counter hashes of (seed, trajectory, step), and
    trajectories are processed in fixed chunks, so results do not depend on
    the worker count.
    """
    if n < 0 or m < 1:
        raise ValueError("need n ≥ 0 and m ≥ 1")
    W = build_unitary(g, f)
    basis = W.basis
    rho0 = check_state(rho0, basis.dim)
    if n == 0:
        return TrajectoryResult(np.zeros((m, 0), dtype=np.int64), rho0.copy(), seed, "none")
    if backend is None:
        backend = "numba" if _kernels.HAVE_NUMBA else "numpy"
    starts = basis.block_starts.astype(np.int64)

    def run(first: int) -> tuple[np.ndarray, np.ndarray]:
        count = min(TRAJECTORY_CHUNK, m - first)
        u = _kernels.counter_uniforms(seed, first, count, n)
        return _kernels.run_trajectories(W.matrix, starts, rho0, u, prune, backend)

    firsts = range(0, m, TRAJECTORY_CHUNK)
    nthreads = _thread_count(workers)
    if nthreads > 1 and len(firsts) > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            parts = list(pool.map(run, firsts))
    else:
        parts = [run(s) for s in firsts]
    outcomes = np.concatenate([p[0] for p in parts], axis=0)
    total = np.zeros((basis.dim, basis.dim), dtype=complex)
    for _, s in parts:
        total += s
    return TrajectoryResult(outcomes, total / m, seed, backend)


def channel_power(channel: KrausChannel, rho: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        rho = channel(rho)
    return rho


def trajectory_law(g: Graph, f: ScatteringFamily, rho0: np.ndarray, n: int) -> dict[tuple[int, ...], float]:
    """Exact probabilities of every outcome sequence of length n (small n)."""
    W = build_unitary(g, f)
    basis = W.basis
    rho0 = check_state(rho0, basis.dim)
    law: dict[tuple[int, ...], float] = {}
    stack = [((), rho0)]
    while stack:
        seq, rho = stack.pop()
        if len(seq) == n:
            law[seq] = float(np.real(np.trace(rho)))
            continue
        for x in g.vertices:
            s = basis.in_slice(x)
            p = float(np.real(np.trace(rho[s, s])))
            if p < PRUNE_TOL:
                continue
            cols = W.matrix[:, s]
            stack.append((seq + (x,), cols @ rho[s, s] @ cols.conj().T))
    return law


# ----- Z-Hadamard -----


def z_hadamard_closed_form(n: int, x_idx: int, y_idx: int) -> float:
    """Entry [(Φ^Diag)^n]_{source x_idx → target y_idx} on the Hadamard line.

    With x = ⌊x_idx/2⌋ and y = ⌊y_idx/2⌋, after n ≥ 1 steps the weight is
    2^{-n} C(n−1, k) where k = (n + y − x)/2 for even sources and one less for
    odd ones.  Labels follow :func:`z_hadamard_label_vertex`.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1.0 if x_idx == y_idx else 0.0
    vx, vy = x_idx // 2, y_idx // 2
    twice = n + vy - vx
    if twice % 2:
        return 0.0
    k = twice // 2 - (x_idx % 2)
    if k < 0 or k > n - 1:
        return 0.0
    return math.exp(gammaln(n) - gammaln(k + 1) - gammaln(n - k) - n * math.log(2.0))


def z_hadamard_exact(n: int, x_idx: int, y_idx: int) -> float:
    """Same as :func:`z_hadamard_closed_form` using integer binomials."""
    if n == 0:
        return 1.0 if x_idx == y_idx else 0.0
    vx, vy = x_idx // 2, y_idx // 2
    twice = n + vy - vx
    if twice % 2:
        return 0.0
    k = twice // 2 - (x_idx % 2)
    if k < 0 or k > n - 1:
        return 0.0
    return math.comb(n - 1, k) / (1 << n)


def z_hadamard_label_vertex(label: int) -> int:
    """Vertex holding edge ``label``: 2x+1 is x→x+1 and 2x is x→x−1."""
    return label // 2 + 1 if label % 2 else label // 2 - 1


def z_hadamard_truncated(window: int, S: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Φ^Diag of the line restricted to the vertices −window..window.

    Returns (M, labels) with M[source, target].  The labels are those of edges
    ending inside the window, −2W−1..2W+2.  Weight that would leave the
    window is dropped.  At vertex v slot 0 is v−1 and slot 1 is v+1.
    """
    if window < 1:
        raise WindowTooSmall("window must be at least 1")
    if S is None:
        S = np.array([[1, 1], [-1, 1]]) / np.sqrt(2)
    w = np.abs(np.asarray(S)) ** 2
    labels = np.arange(-2 * window - 1, 2 * window + 3)
    pos = {int(l): i for i, l in enumerate(labels)}
    M = np.zeros((labels.size, labels.size))
    for src in labels:
        src = int(src)
        v = z_hadamard_label_vertex(src)
        came_from = 0 if src % 2 else 1
        for slot, tgt in ((0, 2 * v), (1, 2 * v + 1)):
            if tgt in pos and abs(z_hadamard_label_vertex(tgt)) <= window:
                M[pos[src], pos[tgt]] += w[slot, came_from]
    return M, labels


def z_hadamard_max_entry(n: int) -> float:
    """Largest entry of (Φ^Diag)^n on the line, C(n−1, ⌊(n−1)/2⌋)/2^n."""
    if n < 1:
        return 1.0
    return math.comb(n - 1, (n - 1) // 2) / (1 << n)


def fit_decay_constant(ns: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares fit of values ≈ c n^{-p}; returns (c, p)."""
    ln = np.log(np.asarray(ns, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(ln, lv, 1)
    return float(np.exp(intercept)), float(-slope)


def fit_sqrt_constant(ns: Sequence[int], values: Sequence[float]) -> float:
    """c in values ≈ c/√n, by least squares on log(value) + ½ log n."""
    ln = np.log(np.asarray(ns, dtype=float))
    lv = np.log(np.asarray(values, dtype=float))
    return float(np.exp(np.mean(lv + 0.5 * ln)))
