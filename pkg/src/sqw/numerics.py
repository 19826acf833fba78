"""Dense spectral algebra, Cesàro means and Perron-Frobenius analysis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .graph_core import period_of_digraph

EPS_CLUSTER = 1e-8
EPS_CLUSTER_NONNORMAL = 1e-6
EPS_SUPPORT = 1e-12
EPS_RANK = 1e-8
EPS_NORMAL = 1e-9


class NotNormal(ValueError):
    pass


class ConvergenceFailure(ArithmeticError):
    pass


class NotStochastic(ValueError):
    pass


def cluster_values(values: np.ndarray, tol: float) -> list[np.ndarray]:
    """Single-linkage clusters of complex numbers at distance ``tol``.

    Clusters are returned sorted by (real, imag) of their mean.
    """
    values = np.asarray(values, dtype=complex)
    n = len(values)
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        close = np.flatnonzero(np.abs(values[i + 1 :] - values[i]) < tol) + i + 1
        for j in close:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = [np.array(g) for g in groups.values()]
    out.sort(key=lambda g: (round(values[g].mean().real, 9), round(values[g].mean().imag, 9)))
    return out


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: list[np.ndarray]
    projectors: list[np.ndarray] = field(repr=False)

    @property
    def cluster_values(self) -> np.ndarray:
        return np.array([self.eigenvalues[c].mean() for c in self.clusters])

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=np.int64)

    def spectrum(self) -> list[tuple[complex, int]]:
        return [(complex(v), int(m)) for v, m in zip(self.cluster_values, self.multiplicities)]

    def projector_at(self, value: complex, tol: float = 1e-7) -> np.ndarray:
        """Spectral projector of the cluster at ``value`` (zero if absent)."""
        d = np.abs(self.cluster_values - value)
        if len(d) and d.min() < tol:
            return self.projectors[int(d.argmin())]
        n = self.eigenvectors.shape[0]
        return np.zeros((n, n), dtype=complex)

    def multiplicity_at(self, value: complex, tol: float = 1e-7) -> int:
        d = np.abs(self.cluster_values - value)
        return int(self.multiplicities[int(d.argmin())]) if len(d) and d.min() < tol else 0

    def reconstruct(self) -> np.ndarray:
        return sum(v * P for v, P in zip(self.cluster_values, self.projectors))


def normality_error(M: np.ndarray) -> float:
    M = np.asarray(M)
    return float(np.abs(M @ M.conj().T - M.conj().T @ M).max(initial=0.0))


def eig_normal(M: np.ndarray, tol: float = EPS_CLUSTER) -> SpectralDecomposition:
    """Eigendecomposition of a normal matrix with orthonormal eigenvectors.

    The complex Schur form of a normal matrix is diagonal, so its unitary
    factor supplies orthonormal eigenvectors even inside degenerate clusters.
    """
    M = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if normality_error(M) > EPS_NORMAL * scale**2:
        raise NotNormal(f"‖MM† − M†M‖_max = {normality_error(M):.3e}")
    try:
        T, Z = sla.schur(M, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not np.all(np.isfinite(T)):
        raise ConvergenceFailure("non-finite Schur factor")
    lam = np.diag(T).copy()
    clusters = cluster_values(lam, tol)
    projectors = [Z[:, c] @ Z[:, c].conj().T for c in clusters]
    return SpectralDecomposition(lam, Z, clusters, projectors)


def nullspace(M: np.ndarray, tol: float = EPS_RANK) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel of ``M``."""
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return np.zeros((M.shape[1], M.shape[1] if M.shape[0] == 0 else 0), dtype=complex)
    _, s, vh = np.linalg.svd(M)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def nullity(M: np.ndarray, tol: float = EPS_RANK) -> int:
    return nullspace(M, tol).shape[1]


def max_principal_angle(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle between the column spans of A and B.

    Returns 0 when both are empty and π/2 when exactly one is empty or the
    dimensions differ.
    """
    if A.shape[1] == 0 and B.shape[1] == 0:
        return 0.0
    if A.shape[1] != B.shape[1]:
        return float(np.pi / 2)
    return float(np.max(sla.subspace_angles(A, B)))


@dataclass
class GeneralEigenvalue:
    value: complex
    algebraic: int
    geometric: int


def general_spectrum(M: np.ndarray, tol: float = EPS_CLUSTER_NONNORMAL, rank_tol: float = EPS_RANK) -> list[GeneralEigenvalue]:
    """Eigenvalues of a possibly defective matrix with both multiplicities.

    Clustering uses a looser tolerance than :func:`eig_normal`, since a
    Jordan block of size k splits eigenvalues by roughly eps^(1/k).
    """
    M = np.asarray(M, dtype=complex)
    try:
        lam = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    n = M.shape[0]
    out = []
    for c in cluster_values(lam, tol):
        v = lam[c].mean()
        v = complex(_snap(v.real), _snap(v.imag))
        geo = nullity(M - v * np.eye(n), rank_tol)
        out.append(GeneralEigenvalue(v, len(c), geo))
    return out


def _snap(t: float, tol: float = 1e-10) -> float:
    r = round(t)
    return float(r) if abs(t - r) < tol else float(t)


def is_diagonalizable(M: np.ndarray) -> bool:
    return all(e.algebraic == e.geometric for e in general_spectrum(M))


def cesaro_mean(M: np.ndarray, N: int) -> np.ndarray:
    """(1/N) Σ_{n=0}^{N-1} M^n by iterated multiplication."""
    if N < 1:
        raise ValueError("N must be positive")
    M = np.asarray(M)
    power = np.eye(M.shape[0], dtype=M.dtype)
    total = np.zeros_like(power)
    for _ in range(N):
        total += power
        power = power @ M
    return total / N


def haar_unitary(d: int, seed: int | np.random.Generator) -> np.ndarray:
    """Haar-random d×d unitary: QR of a complex Ginibre matrix, phases fixed."""
    if d < 1:
        raise ValueError("d must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    Q, R = np.linalg.qr(Z)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph[None, :]


def unitarity_error(U: np.ndarray) -> float:
    U = np.asarray(U)
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[1])).max(initial=0.0))


def check_stochastic(P: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotStochastic("stochastic matrix must be square")
    if P.min(initial=0.0) < -tol:
        raise NotStochastic(f"negative entry {P.min():.3e}")
    err = np.abs(P.sum(axis=1) - 1).max(initial=0.0)
    if err > tol:
        raise NotStochastic(f"row sums deviate from 1 by {err:.3e}")
    return P


@dataclass
class PerronReport:
    irreducible: bool
    period: int
    stationary: list[np.ndarray]
    modulus_one_spectrum: list[complex]
    classes: list[np.ndarray]
    recurrent: list[np.ndarray]
    periods: list[int]

    @property
    def aperiodic(self) -> bool:
        return self.period == 1


def support_digraph(P: np.ndarray, tol: float = EPS_SUPPORT) -> np.ndarray:
    return np.asarray(P) > tol


def perron_analysis(P: np.ndarray, tol: float = 1e-10) -> PerronReport:
    """Irreducibility, period and stationary laws of a row-stochastic matrix.

    One stationary vector is returned per recurrent class; ``period`` is the
    period of the unique class when irreducible, otherwise the lcm over the
    recurrent classes.
    """
    P = check_stochastic(P, tol=max(tol, 1e-9))
    n = P.shape[0]
    adj = support_digraph(P)
    ncomp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    classes = [np.flatnonzero(labels == c) for c in range(ncomp)]
    recurrent = []
    for members in classes:
        outside = np.ones(n, dtype=bool)
        outside[members] = False
        if not adj[np.ix_(members, outside)].any():
            recurrent.append(members)
    recurrent.sort(key=lambda m: int(m[0]))
    periods = [period_of_digraph(adj, m) for m in recurrent]
    stationary = []
    for members in recurrent:
        pi = np.zeros(n)
        pi[members] = _class_stationary(P[np.ix_(members, members)])
        stationary.append(pi)
    lam = np.linalg.eigvals(P)
    mod1 = lam[np.abs(np.abs(lam) - 1) < 1e-8]
    mod1_sorted = sorted((complex(_snap(z.real), _snap(z.imag)) for z in mod1), key=lambda z: (np.angle(z) % (2 * np.pi)))
    period = int(np.lcm.reduce(periods)) if periods else 1
    return PerronReport(ncomp == 1, period, stationary, mod1_sorted, classes, recurrent, periods)


def _class_stationary(Pc: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic block."""
    k = Pc.shape[0]
    if k == 1:
        return np.ones(1)
    w, V = np.linalg.eig(Pc.T)
    i = int(np.argmin(np.abs(w - 1)))
    v = np.real_if_close(V[:, i] / V[:, i].sum(), tol=1e6)
    ok = np.isrealobj(v) and v.min() > -1e-12 and np.abs(v @ Pc - v).sum() < 1e-10
    if not ok:
        A = np.vstack([Pc.T - np.eye(k), np.ones((1, k))])
        b = np.zeros(k + 1)
        b[-1] = 1
        v = np.linalg.lstsq(A, b, rcond=None)[0]
    v = np.clip(np.real(v), 0.0, None)
    return v / v.sum()


def subdominant_modulus(M: np.ndarray, tol: float = 1e-8) -> float:
    """Largest eigenvalue modulus strictly below 1 (0 if none)."""
    mods = np.abs(np.linalg.eigvals(np.asarray(M)))
    below = mods[mods < 1 - tol]
    return float(below.max()) if below.size else 0.0
