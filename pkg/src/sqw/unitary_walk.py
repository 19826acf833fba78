"""The unitary scattering walk U_S on l²(D) and its special realizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph_core import (
    EdgeBasis,
    Graph,
    build_graph,
    complement_graph_edges,
    edge_basis,
    star_graph,
    torus_coords,
    torus_graph,
    torus_index,
)
from .numerics import eig_normal, unitarity_error
from .scattering import ScatteringFamily, explicit_family, validate_family

UNITARITY_TOL = 1e-9


class WalkError(ValueError):
    pass


class FamilyMismatch(WalkError):
    pass


class NotRegular(WalkError):
    pass


class NotTorus(WalkError):
    pass


class OddSize(WalkError):
    pass


class ComplementEmpty(WalkError):
    pass


class DimensionMismatch(WalkError):
    pass


class GraphMismatch(WalkError):
    pass


def same_graph(a: Graph, b: Graph) -> bool:
    return a.vertex_count == b.vertex_count and a.adjacency == b.adjacency


@dataclass(frozen=True, eq=False)
class WalkOperator:
    basis: EdgeBasis
    matrix: np.ndarray = field(repr=False)

    @property
    def graph(self) -> Graph:
        return self.basis.graph

    @property
    def dim(self) -> int:
        return self.basis.dim

    def unitarity_error(self) -> float:
        return unitarity_error(self.matrix)

    def in_projector(self, x: int) -> np.ndarray:
        return coordinate_projector(self.dim, self.basis.in_block(x))

    def out_projector(self, x: int) -> np.ndarray:
        return coordinate_projector(self.dim, self.basis.out_block(x))


def coordinate_projector(n: int, idx: np.ndarray) -> np.ndarray:
    P = np.zeros((n, n), dtype=complex)
    P[idx, idx] = 1
    return P


def build_unitary(g: Graph, f: ScatteringFamily) -> WalkOperator:
    """U[idx(z, x), idx(x, y)] = S_{zy}(x)."""
    if not same_graph(g, f.graph):
        raise FamilyMismatch("family was built for a different graph or neighbor order")
    report = validate_family(g, f)
    if not report:
        raise FamilyMismatch(f"invalid scattering matrices at {sorted(report.violations)}")
    basis = edge_basis(g)
    U = np.zeros((basis.dim, basis.dim), dtype=complex)
    for x in g.vertices:
        U[np.ix_(basis.out_block(x), basis.in_block(x))] = f[x]
    return WalkOperator(basis, U)


def flip_operator(g: Graph, theta: Sequence[int] | None = None) -> WalkOperator:
    """F|xy⟩ = |yx⟩, or F_θ|x x_j⟩ = |x_θ(j) x⟩ with θ a permutation of slots."""
    basis = edge_basis(g)
    n = basis.dim
    F = np.zeros((n, n), dtype=complex)
    if theta is None:
        for i, (t, s) in enumerate(basis.directed_edges):
            F[basis.index_of[(s, t)], i] = 1
        return WalkOperator(basis, F)
    if not g.is_regular():
        raise NotRegular("F_θ needs a regular graph")
    theta = [int(t) for t in theta]
    if sorted(theta) != list(range(g.degree(0))):
        raise WalkError("θ must permute the neighbor slots 0..d-1")
    for x in g.vertices:
        nb = g.adjacency[x]
        for j, y in enumerate(nb):
            F[basis.index_of[(nb[theta[j]], x)], basis.index_of[(x, y)]] = 1
    return WalkOperator(basis, F)


def coin_decomposition(U: WalkOperator) -> list[np.ndarray]:
    """Blocks of F·U on each in-block, to be compared with S(x)."""
    FU = flip_operator(U.graph).matrix @ U.matrix
    b = U.basis
    return [FU[np.ix_(b.in_block(x), b.in_block(x))] for x in U.graph.vertices]


# ----- coined walk on a torus -----


def torus_direction_vertex(sides: Sequence[int], coord: np.ndarray, tau: int) -> int:
    """x_τ = x − sign(τ) e_|τ| (directions τ = ±1..±d)."""
    e = np.zeros(len(sides), dtype=np.int64)
    e[abs(tau) - 1] = 1
    return torus_index(sides, coord - np.sign(tau) * e)


@dataclass
class CoinedReport:
    discrepancy: float
    U: np.ndarray = field(repr=False)
    TC: np.ndarray = field(repr=False)
    identification: np.ndarray = field(repr=False)


def coined_equivalence_check(sides: Sequence[int], f: ScatteringFamily) -> CoinedReport:
    """Compare U_S with T·C under |x x_τ⟩ ≃ |x⟩⊗|τ⟩, θ(τ) = −τ."""
    sides = [int(s) for s in sides]
    try:
        g = torus_graph(sides)
    except ValueError as exc:
        raise NotTorus(str(exc)) from exc
    if not same_graph(g, f.graph):
        raise NotTorus("family is not defined on the torus with these sides")
    U = build_unitary(g, f)
    basis = U.basis
    d = len(sides)
    taus = [t for k in range(1, d + 1) for t in (k, -k)]
    ntau = len(taus)
    coords = torus_coords(sides)
    nv = g.vertex_count
    # Pi maps coined index (x, τ) to the edge index of |x x_τ⟩.
    Pi = np.zeros((basis.dim, nv * ntau))
    T = np.zeros((nv * ntau, nv * ntau))
    C = np.zeros((nv * ntau, nv * ntau), dtype=complex)
    for x in range(nv):
        c = coords[x]
        nbr = {t: torus_direction_vertex(sides, c, t) for t in taus}
        for a, tau in enumerate(taus):
            Pi[basis.index_of[(x, nbr[tau])], x * ntau + a] = 1
            T[nbr[-tau] * ntau + a, x * ntau + a] = 1
            for b, tau2 in enumerate(taus):
                # S_θ(x)_{τ'τ} = S_{x_θ(τ'), x_τ}(x)
                C[x * ntau + b, x * ntau + a] = f.entry(x, nbr[-tau2], nbr[tau])
    TC = T @ C
    back = Pi.T @ U.matrix @ Pi
    return CoinedReport(float(np.abs(back - TC).max()), U.matrix, TC, Pi)


# ----- Chalker-Coddington realization on a torus -----


@dataclass
class CCReport:
    walk: WalkOperator
    off_block_norm: float
    blocks: tuple[np.ndarray, np.ndarray] = field(repr=False)
    block_indices: tuple[np.ndarray, np.ndarray] = field(repr=False)


def cc_basis_order(x: int, sides: Sequence[int], coords: np.ndarray) -> tuple[int, int, int, int]:
    """Neighbors of ``x`` in the order (NW, SE, NE, SW) = (−e1, +e1, +e2, −e2)."""
    c = coords[x]
    return (
        torus_index(sides, c + (-1, 0)),
        torus_index(sides, c + (1, 0)),
        torus_index(sides, c + (0, 1)),
        torus_index(sides, c + (0, -1)),
    )


def chalker_coddington_torus(
    J: int,
    K: int,
    S_even: np.ndarray | dict,
    S_odd: np.ndarray | dict,
) -> CCReport:
    """Scattering walk on the J×K torus with S(x) = [[0, S_odd], [S_even, 0]].

    Neighbors of (j, k) are ordered NW, SE, NE, SW = (j−1, k), (j+1, k),
    (j, k+1), (j, k−1).  Vertices with j + k even play the role of the even
    nodes.  ``S_even``/``S_odd`` are 2×2 unitaries, or dicts keyed by (j, k).
    """
    if J % 2 or K % 2:
        raise OddSize("J and K must be even")
    sides = (J, K)
    coords = torus_coords(sides)
    nv = J * K
    order = [cc_basis_order(x, sides, coords) for x in range(nv)]
    base = torus_graph(sides)
    g = base.with_neighbor_order(order)

    def pick(S, x):
        M = S[tuple(coords[x])] if isinstance(S, dict) else S
        return np.asarray(M, dtype=complex)

    mats = []
    for x in range(nv):
        M = np.zeros((4, 4), dtype=complex)
        M[0:2, 2:4] = pick(S_odd, x)
        M[2:4, 0:2] = pick(S_even, x)
        mats.append(M)
    U = build_unitary(g, explicit_family(g, mats))
    basis = U.basis
    # CC links leave even vertices vertically and odd vertices horizontally;
    # the reversed copies make up the second invariant subspace.
    parity = np.array([coords[s].sum() % 2 for _, s in basis.directed_edges])
    horizontal = np.array([coords[t][1] == coords[s][1] for t, s in basis.directed_edges])
    cls = (parity + horizontal) % 2
    idx_a = np.flatnonzero(cls == 0)
    idx_b = np.flatnonzero(cls == 1)
    M = U.matrix
    off = max(np.abs(M[np.ix_(idx_a, idx_b)]).max(initial=0), np.abs(M[np.ix_(idx_b, idx_a)]).max(initial=0))
    blocks = (M[np.ix_(idx_a, idx_a)], M[np.ix_(idx_b, idx_b)])
    return CCReport(U, float(off), blocks, (idx_a, idx_b))


# ----- complete-graph embedding -----


@dataclass
class EmbeddingReport:
    complete: WalkOperator
    block_error: float
    complement_block_error: float
    cross_norm: float
    original_indices: np.ndarray = field(repr=False)


def complete_embedding(g: Graph, f: ScatteringFamily, f_hat: Sequence[np.ndarray] | None = None) -> EmbeddingReport:
    """Embed U_S into a walk on K_|V| with S_K(x) = S(x) ⊕ Ŝ(x).

    ``f_hat`` holds one matrix per vertex, sized by the complement degree
    and indexed by the complement neighbors in ascending order (0×0 where
    the complement degree is 0).  None means identity blocks.
    """
    n = g.vertex_count
    comp_edges = complement_graph_edges(g)
    if not comp_edges:
        raise ComplementEmpty("graph is already complete")
    hat_adj = [tuple(sorted(y for y in range(n) if y != x and not g.adjacent(x, y))) for x in range(n)]
    hat_mats = _complement_matrices(f_hat, hat_adj)
    order = [tuple(g.adjacency[x]) + hat_adj[x] for x in range(n)]
    K = build_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n, neighbor_order=order)
    mats = []
    for x in range(n):
        d, dh = g.degree(x), len(hat_adj[x])
        M = np.zeros((d + dh, d + dh), dtype=complex)
        M[:d, :d] = f[x]
        M[d:, d:] = hat_mats[x]
        mats.append(M)
    UK = build_unitary(K, explicit_family(K, mats))
    kb = UK.basis
    gb = edge_basis(g)
    orig = np.array([kb.index_of[e] for e in gb.directed_edges])
    hat_edges = [(x, y) for x in range(n) for y in hat_adj[x]]
    hidx = np.array([kb.index_of[e] for e in hat_edges], dtype=np.int64)
    U = build_unitary(g, f).matrix
    blk = UK.matrix[np.ix_(orig, orig)]
    # Reference walk on the complement edges built from Ŝ directly.
    pos = {e: i for i, e in enumerate(hat_edges)}
    Uh = np.zeros((len(hat_edges), len(hat_edges)), dtype=complex)
    for x in range(n):
        nb = hat_adj[x]
        for a, z in enumerate(nb):
            for b, y in enumerate(nb):
                Uh[pos[(z, x)], pos[(x, y)]] = hat_mats[x][a, b]
    cross = max(
        np.abs(UK.matrix[np.ix_(orig, hidx)]).max(initial=0),
        np.abs(UK.matrix[np.ix_(hidx, orig)]).max(initial=0),
    )
    return EmbeddingReport(
        UK,
        float(np.abs(blk - U).max()),
        float(np.abs(UK.matrix[np.ix_(hidx, hidx)] - Uh).max(initial=0)),
        float(cross),
        orig,
    )


def _complement_matrices(f_hat, hat_adj) -> list[np.ndarray]:
    if f_hat is None:
        return [np.eye(len(a), dtype=complex) for a in hat_adj]
    mats = list(f_hat)
    if len(mats) != len(hat_adj):
        raise FamilyMismatch("complement family needs one matrix per vertex (0×0 when isolated)")
    out = []
    for x, nb in enumerate(hat_adj):
        M = np.asarray(mats[x], dtype=complex)
        if M.size != len(nb) ** 2:
            raise FamilyMismatch(f"Ŝ({x}) must be {len(nb)}×{len(nb)}")
        M = M.reshape(len(nb), len(nb))
        if M.size and unitarity_error(M) > 1e-10:
            raise FamilyMismatch(f"Ŝ({x}) is not unitary")
        out.append(M)
    return out


# ----- dynamics -----


@dataclass
class Observation:
    edge_probabilities: np.ndarray
    vertex_probabilities: np.ndarray
    state: np.ndarray = field(repr=False)


def check_pure_state(psi: np.ndarray, dim: int, tol: float = 1e-12) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (dim,):
        raise DimensionMismatch(f"state has length {psi.size}, expected {dim}")
    if abs(np.linalg.norm(psi) - 1) > tol:
        raise DimensionMismatch(f"state norm {np.linalg.norm(psi):.15g} is not 1")
    return psi


def vertex_marginal(basis: EdgeBasis, edge_probs: np.ndarray) -> np.ndarray:
    """Q(x) = Σ_{y∼x} P(xy); works on the trailing axis."""
    return np.add.reduceat(edge_probs, basis.block_starts[:-1], axis=-1)


def evolve_and_observe(U: WalkOperator, psi0: np.ndarray, n: int) -> Observation:
    psi = check_pure_state(psi0, U.dim)
    for _ in range(n):
        psi = U.matrix @ psi
    p = np.abs(psi) ** 2
    return Observation(p, vertex_marginal(U.basis, p), psi)


def vertex_probability_series(U: WalkOperator, psi0: np.ndarray, n: int) -> np.ndarray:
    """Rows Q_0, ..., Q_n."""
    psi = check_pure_state(psi0, U.dim)
    out = np.empty((n + 1, U.graph.vertex_count))
    for k in range(n + 1):
        out[k] = vertex_marginal(U.basis, np.abs(psi) ** 2)
        psi = U.matrix @ psi
    return out


def cesaro_vertex_limit(U: WalkOperator, psi0: np.ndarray, x: int) -> float:
    """Σ_θ ‖P_x^I E({θ}) ψ0‖² over the eigenvalues of U."""
    psi = check_pure_state(psi0, U.dim)
    dec = eig_normal(U.matrix)
    blk = U.basis.in_block(x)
    return float(sum(np.linalg.norm((P @ psi)[blk]) ** 2 for P in dec.projectors))


def cesaro_vertex_average(U: WalkOperator, psi0: np.ndarray, x: int, N: int) -> float:
    """(1/N) Σ_{n<N} Q_n(x)."""
    psi = check_pure_state(psi0, U.dim)
    blk = U.basis.in_slice(x)
    total = 0.0
    for _ in range(N):
        total += float(np.sum(np.abs(psi[blk]) ** 2))
        psi = U.matrix @ psi
    return total / N


def perturbation_bound(f1: ScatteringFamily, f2: ScatteringFamily) -> float:
    """sup_x ‖S1(x) − S2(x)‖_HS, an upper bound for ‖U1 − U2‖."""
    if not same_graph(f1.graph, f2.graph):
        raise GraphMismatch("families live on different graphs")
    return max(float(np.linalg.norm(a - b)) for a, b in zip(f1.matrices, f2.matrices))


# ----- star graph -----


@dataclass
class StarReport:
    U: WalkOperator
    spectrum: list[tuple[complex, int]]
    half_angles: np.ndarray
    projectors: list[tuple[complex, np.ndarray]] = field(repr=False)
    direct_error: float = 0.0
    DS: np.ndarray = field(default=None, repr=False)

    def cesaro_branch_limit(self, psi0: np.ndarray, k: int) -> float:
        """Σ_θ |⟨k0|E_θ ψ0⟩|² from the block projectors (k = 1..N)."""
        idx = self.U.basis.index_of[(k, 0)]
        return float(sum(abs((E @ psi0)[idx]) ** 2 for _, E in self.projectors))


def star_graph_analysis(S0: np.ndarray, theta: Sequence[float]) -> StarReport:
    """U = [[0, D(θ)], [S0, 0]] on the star with center 0 and N leaves.

    Eigenpairs come from D(θ)S0 = Σ e^{iα} P_α: for λ = ±e^{iα/2}
    E_λ = ½ [[P, λ P S0†], [λ̄ S0 P, S0 P S0†]].
    """
    S0 = np.asarray(S0, dtype=complex)
    N = S0.shape[0]
    if S0.shape != (N, N) or unitarity_error(S0) > 1e-10:
        from .scattering import NotUnitary

        raise NotUnitary("S0 must be an N×N unitary")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N,):
        raise DimensionMismatch("need one phase per leaf")
    g = star_graph(N)
    mats = [S0] + [np.array([[np.exp(1j * t)]]) for t in theta]
    U = build_unitary(g, explicit_family(g, mats))
    D = np.diag(np.exp(1j * theta))
    DS = D @ S0
    dec = eig_normal(DS)
    projectors = []
    halves = []
    for val, P in zip(dec.cluster_values, dec.projectors):
        a = np.angle(val)
        halves.append(a / 2)
        for sign in (1, -1):
            lam = sign * np.exp(1j * a / 2)
            E = 0.5 * np.block([[P, lam * P @ S0.conj().T], [np.conj(lam) * S0 @ P, S0 @ P @ S0.conj().T]])
            projectors.append((lam, E))
    mult = {}
    for (lam, E) in projectors:
        mult[lam] = int(round(np.trace(E).real))
    spectrum = [(complex(l), m) for l, m in mult.items()]
    recon = sum(lam * E for lam, E in projectors)
    err = float(np.abs(recon - U.matrix).max())
    return StarReport(U, spectrum, np.array(halves), projectors, err, DS)
