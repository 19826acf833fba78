"""Vertex channel Ψ_S with rank-one Kraus operators |χ(x)⟩⟨x|.

Only the diagonal r of a vertex state matters after one step, and it moves
under the row-stochastic P_{xy} = |⟨y|χ(x)⟩|²: r ↦ r @ P.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph_core import FunctionalGraph, Graph, functional_graph
from .numerics import PerronReport, perron_analysis, subdominant_modulus
from .open_walk import BadState, KrausChannel, WindowTooSmall, check_state
from .scattering import ScatteringFamily, check_omega, dft_family

NORM_TOL = 1e-10


class ChiError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChiFamily:
    """Per-vertex vectors on l²(V): v(x) in neighbor coordinates, θ(x), χ(x)."""

    graph: Graph
    v: tuple[np.ndarray, ...]
    theta: np.ndarray  # row x holds θ(x)
    chi: np.ndarray  # row x holds χ(x)
    beta: np.ndarray

    @property
    def theta_norms(self) -> np.ndarray:
        return np.linalg.norm(self.theta, axis=1)

    def invariant_defects(self) -> dict[str, float]:
        n = self.graph.vertex_count
        return {
            "v_norm": max(abs(np.linalg.norm(w) - 1) for w in self.v),
            "theta_excess": float(max(0.0, self.theta_norms.max() - 1)),
            "theta_self": float(np.abs(self.theta[np.arange(n), np.arange(n)]).max()),
            "chi_norm": float(np.abs(np.linalg.norm(self.chi, axis=1) - 1).max()),
        }


def chi_vectors(
    g: Graph,
    f: ScatteringFamily,
    omega: Sequence[np.ndarray] | None = None,
    beta: Sequence[float] | float | None = None,
) -> ChiFamily:
    """v(x) = S(x)ω(x), θ_z(x) = conj(ω_x(z)) v_z(x) and
    χ(x) = θ(x) + e^{iβ_x} √(1 − ‖θ(x)‖²) |x⟩.

    ω_x(z) is the entry of ω(z) on the edge from x into z.
    """
    omega = check_omega(g, omega)
    n = g.vertex_count
    if beta is None:
        beta_arr = np.zeros(n)
    else:
        beta_arr = np.broadcast_to(np.asarray(beta, dtype=float), (n,)).copy()
    vs = []
    theta = np.zeros((n, n), dtype=complex)
    for x in g.vertices:
        v = np.asarray(f[x]) @ omega[x]
        vs.append(v)
        for slot, z in enumerate(g.neighbors(x)):
            theta[x, z] = np.conj(omega[z][g.slot(z, x)]) * v[slot]
    norms2 = np.sum(np.abs(theta) ** 2, axis=1)
    if norms2.max(initial=0.0) > 1 + NORM_TOL:
        raise ChiError(f"‖θ‖² = {norms2.max():.12g} exceeds 1")
    # Round-off in ‖θ‖² would otherwise leave a ~1e-8 diagonal term after the sqrt.
    rest = 1 - norms2
    rest[rest < 64 * np.finfo(float).eps] = 0.0
    chi = theta.copy()
    chi[np.arange(n), np.arange(n)] += np.exp(1j * beta_arr) * np.sqrt(rest)
    return ChiFamily(g, tuple(vs), theta, chi, beta_arr)


def _rank_one(col: np.ndarray, x: int, n: int) -> np.ndarray:
    G = np.zeros((n, n), dtype=complex)
    G[:, x] = col
    return G


def induced_channel(chi: ChiFamily) -> KrausChannel:
    """Kraus family G(x) = |χ(x)⟩⟨x|."""
    n = chi.graph.vertex_count
    return KrausChannel(tuple(_rank_one(chi.chi[x], x, n) for x in range(n)), n)


def theta_operation(chi: ChiFamily) -> KrausChannel:
    """The trace non-increasing map with Kraus operators |θ(x)⟩⟨x|."""
    n = chi.graph.vertex_count
    return KrausChannel(tuple(_rank_one(chi.theta[x], x, n) for x in range(n)), n)


def completed_theta_channel(chi: ChiFamily) -> KrausChannel:
    """|θ(x)⟩⟨x| plus the single Kraus operator Σ_x √(1 − ‖θ(x)‖²)|x⟩⟨x|.

    An alternative way to restore trace preservation; no asymptotic results
    are attached to it.
    """
    op = theta_operation(chi)
    extra = np.diag(np.sqrt(np.clip(1 - chi.theta_norms**2, 0.0, None))).astype(complex)
    return KrausChannel(op.kraus + (extra,), op.dim)


def vertex_stochastic(chi: ChiFamily) -> np.ndarray:
    """P_{xy} = |⟨y|χ(x)⟩|²."""
    return np.abs(chi.chi) ** 2


# ----- evolution -----


@dataclass
class InducedEvolution:
    state: np.ndarray
    Q: np.ndarray  # Q[k, x] for k = 0..n


def evolve_induced(chi: ChiFamily, rho0: np.ndarray, n: int) -> InducedEvolution:
    """Ψ^n(ρ0) = Σ_{x,y} P^{n−1}_{xy} ⟨x|ρ0|x⟩ |χ(y)⟩⟨χ(y)| for n ≥ 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    V = chi.graph.vertex_count
    rho0 = check_state(rho0, V)
    P = vertex_stochastic(chi)
    r = np.real(np.diag(rho0)).copy()
    Q = np.empty((n + 1, V))
    Q[0] = r
    for k in range(1, n + 1):
        Q[k] = Q[k - 1] @ P
    if n == 0:
        return InducedEvolution(rho0.copy(), Q)
    w = Q[n - 1]
    state = (chi.chi.T * w) @ chi.chi.conj()
    return InducedEvolution(state, Q)


def evolve_induced_kraus(chi: ChiFamily, rho0: np.ndarray, n: int) -> np.ndarray:
    """Ψ^n(ρ0) by repeated Kraus application."""
    ch = induced_channel(chi)
    rho = check_state(rho0, ch.dim)
    for _ in range(n):
        rho = ch(rho)
    return rho


# ----- asymptotics -----


@dataclass
class InducedAsymptotics:
    mode: str
    perron: PerronReport
    cesaro_projector: np.ndarray = field(repr=False)
    gap: float | None
    chi: ChiFamily = field(repr=False)

    def vertex_limit(self, rho0: np.ndarray) -> np.ndarray:
        r0 = np.real(np.diag(check_state(rho0, self.cesaro_projector.shape[0])))
        return r0 @ self.cesaro_projector

    def limit_state(self, rho0: np.ndarray) -> np.ndarray:
        """Cesàro limit Σ_y q_y |χ(y)⟩⟨χ(y)| with q the vertex limit."""
        q = self.vertex_limit(rho0)
        return (self.chi.chi.T * q) @ self.chi.chi.conj()


def absorption_probabilities(P: np.ndarray, recurrent: Sequence[np.ndarray]) -> np.ndarray:
    """h[x, i]: probability that the chain started at x ends in class i."""
    n = P.shape[0]
    h = np.zeros((n, len(recurrent)))
    is_rec = np.zeros(n, dtype=bool)
    for i, members in enumerate(recurrent):
        h[members, i] = 1.0
        is_rec[members] = True
    T = np.flatnonzero(~is_rec)
    if T.size:
        A = np.eye(T.size) - P[np.ix_(T, T)]
        for i, members in enumerate(recurrent):
            b = P[np.ix_(T, members)].sum(axis=1)
            h[T, i] = np.linalg.solve(A, b)
    return h


def cesaro_projector(P: np.ndarray, report: PerronReport | None = None) -> np.ndarray:
    """lim (1/N) Σ_{n<N} P^n = Σ_i h_i π_i over recurrent classes."""
    report = perron_analysis(P) if report is None else report
    h = absorption_probabilities(P, report.recurrent)
    return sum(np.outer(h[:, i], pi) for i, pi in enumerate(report.stationary))


def induced_asymptotics(chi: ChiFamily) -> InducedAsymptotics:
    """Irreducible and aperiodic P: exponential.  Irreducible periodic P:
    Cesàro.  Reducible P: limits decomposed over recurrent classes and
    weighted by absorption probabilities."""
    P = vertex_stochastic(chi)
    rep = perron_analysis(P)
    proj = cesaro_projector(P, rep)
    if rep.irreducible:
        mode = "exponential" if rep.aperiodic else "cesaro"
    else:
        mode = "decomposed"
    gap = 1.0 - subdominant_modulus(P) if rep.aperiodic else None
    return InducedAsymptotics(mode, rep, proj, gap, chi)


# ----- DFT -----


@dataclass
class DFTInducedReport:
    graph: Graph
    sigma: FunctionalGraph
    P: np.ndarray
    stationary: list[np.ndarray]
    component_weights: np.ndarray | None
    vertex_limit: np.ndarray | None


def dft_stationary(g: Graph, sigma: FunctionalGraph) -> list[np.ndarray]:
    """π_i(x) = d_{N(x)} / Σ_{y ∈ Cyc_i} d_y on the cycle of component i."""
    out = []
    deg = g.degrees
    for cyc in sigma.cycles:
        pi = np.zeros(g.vertex_count)
        total = float(deg[list(cyc)].sum())
        for x in cyc:
            pi[x] = deg[sigma.successor[x]] / total
        out.append(pi)
    return out


def dft_induced_analysis(
    g: Graph,
    neighbor_order: Mapping[int, Sequence[int]] | Sequence[Sequence[int]] | None = None,
    rho0: np.ndarray | None = None,
) -> DFTInducedReport:
    """Successor graph x ↦ x_1 (first neighbor), its stationary laws and the
    Cesàro vertex limit Σ_i r0(component i) π_i for the given ρ0."""
    if neighbor_order is not None:
        g = g.with_neighbor_order(neighbor_order)
    sigma = functional_graph(g, [g.neighbors(x)[0] for x in g.vertices])
    P = vertex_stochastic(chi_vectors(g, dft_family(g)))
    pis = dft_stationary(g, sigma)
    weights = limit = None
    if rho0 is not None:
        r0 = np.real(np.diag(check_state(rho0, g.vertex_count)))
        weights = np.array([r0[list(c)].sum() for c in sigma.components])
        limit = sum(w * pi for w, pi in zip(weights, pis))
    return DFTInducedReport(g, sigma, P, pis, weights, limit)


# ----- half-line -----


@dataclass
class HalfLineReport:
    vertices: np.ndarray
    P: np.ndarray
    stationary: np.ndarray
    diag_errors: dict[str, float]
    crossing_max: float
    gamma: float
    fit_ns: np.ndarray = field(repr=False)
    fit_errors: np.ndarray = field(repr=False)

    def index(self, x: int) -> int:
        return int(x - self.vertices[0])


def halfline_matrix(window: int) -> tuple[np.ndarray, np.ndarray]:
    """P on vertices −window..window+1 for the line with the extra edge {0, 1}.

    x_1 = x + 1 for x ≤ 0 and x − 1 for x ≥ 1; degrees are 3 at 0 and 1 and
    2 elsewhere.  All mass moves toward {0, 1}, so no row leaves the window.
    """
    if window < 6:
        raise WindowTooSmall("window must be at least 6")
    verts = np.arange(-window, window + 2)
    n = verts.size
    P = np.zeros((n, n))

    def deg(x: int) -> int:
        return 3 if x in (0, 1) else 2

    for i, x in enumerate(verts):
        x = int(x)
        succ = x + 1 if x <= 0 else x - 1
        P[i, succ + window] = 1.0 / deg(succ)
        P[i, i] = 1.0 - 1.0 / deg(succ)
    return P, verts


def halfline_example(window: int, n: int, fit_range: tuple[int, int] | None = None) -> HalfLineReport:
    """Checks on the half-line matrix: diagonal powers (2/3)^k at −1 and 2,
    no flow from x ≥ 0 to y ≤ −1, stationary law (1/2, 1/2) on {0, 1}, and a
    fitted exponential rate for max |P^k_{xy} − π_y| over x, y in −3..4."""
    P, verts = halfline_matrix(window)
    at = lambda x: int(x + window)  # noqa: E731
    rep = perron_analysis(P)
    if len(rep.stationary) != 1:
        raise ValueError("half-line matrix should have one recurrent class")
    pi = rep.stationary[0]
    lo, hi = fit_range or (max(1, n // 4), n)
    local = [at(x) for x in range(-3, 5)]
    errs = {"P22": 0.0, "P-1-1": 0.0}
    crossing = 0.0
    ns, fit_err = [], []
    Pk = np.eye(P.shape[0])
    nonneg = verts >= 0
    neg = verts <= -1
    for k in range(1, n + 1):
        Pk = Pk @ P
        errs["P22"] = max(errs["P22"], abs(Pk[at(2), at(2)] - (2 / 3) ** k))
        errs["P-1-1"] = max(errs["P-1-1"], abs(Pk[at(-1), at(-1)] - (2 / 3) ** k))
        crossing = max(crossing, float(np.abs(Pk[np.ix_(nonneg, neg)]).max()))
        if lo <= k <= hi:
            ns.append(k)
            fit_err.append(float(np.abs(Pk[np.ix_(local, local)] - pi[local][None, :]).max()))
    ns_arr, fe = np.array(ns), np.array(fit_err)
    slope = np.polyfit(ns_arr, np.log(fe), 1)[0] if ns_arr.size >= 2 else np.nan
    return HalfLineReport(verts, P, pi, errs, crossing, float(-slope), ns_arr, fe)


def grover_induced_stochastic(g: Graph) -> np.ndarray:
    """P_{xy} = 1/(d_x d_y) for x ∼ y, diagonal 1 − Σ_{z∼x} 1/(d_x d_z)."""
    d = g.degrees.astype(float)
    A = g.adjacency_matrix().astype(float)
    P = A / np.outer(d, d)
    P[np.diag_indices_from(P)] = 1 - P.sum(axis=1)
    return P


__all__ = [
    "BadState",
    "ChiError",
    "ChiFamily",
    "DFTInducedReport",
    "HalfLineReport",
    "InducedAsymptotics",
    "InducedEvolution",
    "absorption_probabilities",
    "cesaro_projector",
    "chi_vectors",
    "completed_theta_channel",
    "dft_induced_analysis",
    "dft_stationary",
    "evolve_induced",
    "evolve_induced_kraus",
    "grover_induced_stochastic",
    "halfline_example",
    "halfline_matrix",
    "induced_asymptotics",
    "induced_channel",
    "theta_operation",
    "vertex_stochastic",
]
