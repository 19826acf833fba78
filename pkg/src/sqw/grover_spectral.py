"""Spectral mapping for the α-Grover walk U = F(Π + e^{iα}(I − Π)).

Eigenvalues of U off {±1, ±e^{iα}} are tied to those of the compression
F11 = ΠFΠ through φ_α(λ) = (λ² − e^{iα}) / (λ(1 − e^{iα})).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import null_space

from .graph_core import Graph, edge_basis
from .numerics import eig_normal, max_principal_angle, nullspace
from .scattering import check_omega, grover_alpha
from .unitary_walk import WalkOperator, build_unitary, flip_operator

MATCH_TOL = 1e-7
ANGLE_TOL = 1e-7


class AlphaZero(ValueError):
    pass


class OutOfRange(ValueError):
    pass


@dataclass
class OmegaProjector:
    Pi: np.ndarray = field(repr=False)
    rank: int
    corank: int


def omega_vectors_in_edge_space(g: Graph, omega: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """Columns ω(x) ∈ l²(D), i.e. the matrix R†."""
    omega = check_omega(g, omega)
    b = edge_basis(g)
    W = np.zeros((b.dim, g.vertex_count), dtype=complex)
    for x in g.vertices:
        W[b.in_slice(x), x] = omega[x]
    return W


def omega_projector(g: Graph, omega: Sequence[np.ndarray] | None = None) -> OmegaProjector:
    W = omega_vectors_in_edge_space(g, omega)
    Pi = W @ W.conj().T
    rank = int(np.linalg.matrix_rank(Pi, tol=1e-8))
    return OmegaProjector(Pi, rank, Pi.shape[0] - rank)


def boundary_operator(g: Graph, omega: Sequence[np.ndarray] | None = None) -> np.ndarray:
    """R = Σ_x |x⟩⟨ω(x)|, a |V|×|D| coisometry."""
    return omega_vectors_in_edge_space(g, omega).conj().T


@dataclass
class CompressionPair:
    F11: np.ndarray
    F22: np.ndarray
    F12: np.ndarray = field(repr=False)
    F21: np.ndarray = field(repr=False)
    V1: np.ndarray = field(repr=False)
    V2: np.ndarray = field(repr=False)

    def embed1(self, vecs: np.ndarray) -> np.ndarray:
        return self.V1 @ vecs

    def embed2(self, vecs: np.ndarray) -> np.ndarray:
        return self.V2 @ vecs


def range_basis(Pi: np.ndarray) -> np.ndarray:
    """Orthonormal eigenbasis of an orthogonal projector's range."""
    w, V = np.linalg.eigh(Pi)
    return V[:, w > 0.5]


def compressions(F: WalkOperator | np.ndarray, Pi: np.ndarray, V1: np.ndarray | None = None) -> CompressionPair:
    """Blocks of F on range(Π) ⊕ range(I − Π).

    ``V1`` fixes the orthonormal basis of range(Π) (for a graph, the ω(x));
    by default an eigenbasis of Π is used.  The complement basis is any
    orthonormal basis of the orthogonal complement of V1.
    """
    Fm = F.matrix if isinstance(F, WalkOperator) else np.asarray(F, dtype=complex)
    if V1 is None:
        V1 = range_basis(Pi)
    V2 = null_space(V1.conj().T) if V1.shape[1] < V1.shape[0] else np.zeros((V1.shape[0], 0), dtype=complex)
    V2 = V2.astype(complex)
    h = lambda A, B: A.conj().T @ Fm @ B
    return CompressionPair(h(V1, V1), h(V2, V2), h(V1, V2), h(V2, V1), V1, V2)


def _check_alpha(alpha: float) -> None:
    if abs(np.exp(1j * alpha) - 1) < 1e-14:
        raise AlphaZero("φ_α is undefined for α = 0")


def phi_alpha(lam: complex, alpha: float) -> float:
    """φ_α(λ) for |λ| = 1, which is real: sin(α/2 − θ)/sin(α/2)."""
    _check_alpha(alpha)
    ea = np.exp(1j * alpha)
    mu = (lam * lam - ea) / (lam * (1 - ea))
    if abs(mu.imag) > 1e-10 * max(1.0, abs(mu)):
        raise ValueError(f"φ_α(λ) has imaginary part {mu.imag:.3e}; is |λ| = 1?")
    return float(mu.real)


def inverse_phi_alpha(mu: float, alpha: float) -> tuple[complex, complex]:
    """Roots (λ−, λ+) of λ² − μ(1 − e^{iα})λ − e^{iα} = 0."""
    _check_alpha(alpha)
    bound = 1 / abs(np.sin(alpha / 2))
    if abs(mu) > bound * (1 + 1e-12):
        raise OutOfRange(f"|μ| = {abs(mu)} exceeds 1/|sin(α/2)| = {bound}")
    ea = np.exp(1j * alpha)
    b = mu * (1 - ea)
    disc = np.sqrt(b * b + 4 * ea + 0j)
    lp, lm = (b + disc) / 2, (b - disc) / 2
    # Round-off can push the roots off the unit circle by ~1e-16.
    return complex(lm / abs(lm)), complex(lp / abs(lp))


def grover_operator(F: np.ndarray, Pi: np.ndarray, alpha: float) -> np.ndarray:
    n = F.shape[0]
    return F @ (Pi + np.exp(1j * alpha) * (np.eye(n) - Pi))


@dataclass
class SpectralMappingReport:
    passed: bool
    violations: list[str]
    spectrum_U: list[tuple[complex, int]]
    spectrum_F11: list[tuple[float, int]]
    spectrum_F22: list[tuple[float, int]]
    max_match_error: float = 0.0
    max_kernel_angle: float = 0.0


def _real_spectrum(H: np.ndarray) -> list[tuple[float, int]]:
    if H.shape[0] == 0:
        return []
    dec = eig_normal(H)
    return [(float(v.real), int(m)) for v, m in dec.spectrum()]


def _mult(spec: list[tuple[complex, int]], value: complex, tol: float = MATCH_TOL) -> int:
    return sum(m for v, m in spec if abs(v - value) < tol)


def _kernel(H: np.ndarray, value: complex) -> np.ndarray:
    if H.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    return nullspace(H - value * np.eye(H.shape[0]))


def spectral_mapping_report(F: np.ndarray, Pi: np.ndarray, alpha: float, V1: np.ndarray | None = None, U: np.ndarray | None = None) -> SpectralMappingReport:
    """Check every clause of the finite-dimensional spectral mapping theorem."""
    _check_alpha(alpha)
    F = np.asarray(F, dtype=complex)
    pair = compressions(F, Pi, V1)
    if U is None:
        U = grover_operator(F, Pi, alpha)
    ea = np.exp(1j * alpha)
    decU = eig_normal(U)
    specU = decU.spectrum()
    spec1 = _real_spectrum(pair.F11)
    spec2 = _real_spectrum(pair.F22)
    bad: list[str] = []
    worst = 0.0

    # (a) λ ∉ {±e^{iα}} ⇒ φ_α(λ) ∈ σ(F11)
    for lam, m in specU:
        if min(abs(lam - ea), abs(lam + ea)) < MATCH_TOL:
            continue
        mu = phi_alpha(lam / abs(lam), alpha)
        d = min((abs(mu - v) for v, _ in spec1), default=np.inf)
        if np.isfinite(d):
            worst = max(worst, d)
        if d > MATCH_TOL:
            bad.append(f"(a) λ={lam:.6g}: φ_α(λ)={mu:.6g} not in σ(F11)")

    # (b) and (d): lifts of μ ∈ σ(F11) \ {±1} with multiplicities
    for mu, m in spec1:
        if min(abs(mu - 1), abs(mu + 1)) < MATCH_TOL:
            continue
        for lam in inverse_phi_alpha(mu, alpha):
            d = min((abs(lam - v) for v, _ in specU), default=np.inf)
            worst = max(worst, d)
            if d > MATCH_TOL:
                bad.append(f"(b) μ={mu:.6g}: lift λ={lam:.6g} not in σ(U)")
                continue
            mU = _mult(specU, lam)
            m2 = _mult(spec2, -mu)
            if mU != m or m2 != m:
                bad.append(f"(d) μ={mu:.6g}: dim ker(U−λ)={mU}, dim ker(F11−μ)={m}, dim ker(F22+μ)={m2}")

    # (c) kernel identities at ±1 and ±e^{iα}
    angle = 0.0
    n = U.shape[0]
    k11 = {s: pair.embed1(_kernel(pair.F11, s)) for s in (1, -1)}
    k22 = {s: pair.embed2(_kernel(pair.F22, s)) for s in (1, -1)}
    if abs(ea + 1) > 1e-12:
        checks = [
            ("ker(U−1)=ker(F11−1)", 1, k11[1]),
            ("ker(U+1)=ker(F11+1)", -1, k11[-1]),
            ("ker(U−e^{iα})=ker(F22−1)", ea, k22[1]),
            ("ker(U+e^{iα})=ker(F22+1)", -ea, k22[-1]),
        ]
    else:
        checks = [
            ("ker(U−1)=ker(F11−1)+ker(F22+1)", 1, np.hstack([k11[1], k22[-1]])),
            ("ker(U+1)=ker(F11+1)+ker(F22−1)", -1, np.hstack([k11[-1], k22[1]])),
        ]
    for name, lam, K in checks:
        KU = nullspace(U - lam * np.eye(n))
        a = max_principal_angle(KU, K)
        angle = max(angle, a)
        if a > ANGLE_TOL:
            bad.append(f"(c) {name}: dims {KU.shape[1]} vs {K.shape[1]}, angle {a:.3e}")

    # σ(F11) ∪ {±1} = σ(−F22) ∪ {±1}
    inner1 = sorted(v for v, m in spec1 for _ in range(m) if min(abs(v - 1), abs(v + 1)) > MATCH_TOL)
    inner2 = sorted(-v for v, m in spec2 for _ in range(m) if min(abs(v - 1), abs(v + 1)) > MATCH_TOL)
    if len(inner1) != len(inner2) or any(abs(a - b) > MATCH_TOL for a, b in zip(inner1, inner2)):
        bad.append("σ(F11) and σ(−F22) differ away from ±1")
    return SpectralMappingReport(not bad, bad, specU, spec1, spec2, worst, angle)


def verify_spectral_mapping(g: Graph, alpha: float, omega: Sequence[np.ndarray] | None = None) -> SpectralMappingReport:
    """Run :func:`spectral_mapping_report` on the α-Grover walk of ``g``."""
    omega = check_omega(g, omega)
    U = build_unitary(g, grover_alpha(g, alpha, omega)).matrix
    F = flip_operator(g).matrix
    W = omega_vectors_in_edge_space(g, omega)
    Pi = W @ W.conj().T
    report = spectral_mapping_report(F, Pi, alpha, W, U)
    factor_err = float(np.abs(U - grover_operator(F, Pi, alpha)).max())
    if factor_err > 1e-12:
        report.violations.append(f"U ≠ F(Π + e^{{iα}}(I−Π)) by {factor_err:.3e}")
        report.passed = False
    return report


def feshbach_maps(pair: CompressionPair, alpha: float, z: complex) -> dict[str, np.ndarray]:
    """Literal Schur complements of U − z and their closed forms."""
    ea = np.exp(1j * alpha)
    I1 = np.eye(pair.F11.shape[0])
    I2 = np.eye(pair.F22.shape[0])
    S1 = (pair.F11 - z * I1) - ea * pair.F12 @ np.linalg.solve(ea * pair.F22 - z * I2, pair.F21)
    S2 = (ea * pair.F22 - z * I2) - ea * pair.F21 @ np.linalg.solve(pair.F11 - z * I1, pair.F12)
    S1_closed = (1 - z * z / ea**2) * np.linalg.inv(pair.F11 + z / ea * I1) + z * (1 / ea - 1) * I1
    S2_closed = ea * ((1 - z * z) * np.linalg.inv(pair.F22 + z * I2) + z * (1 - 1 / ea) * I2)
    return {"S1": S1, "S2": S2, "S1_closed": S1_closed, "S2_closed": S2_closed}


@dataclass
class DiscriminantReport:
    T: np.ndarray
    R: np.ndarray = field(repr=False)
    spectrum_T: list[tuple[float, int]] = field(default_factory=list)
    spectrum_F11: list[tuple[float, int]] = field(default_factory=list)
    spectrum_error: float = 0.0
    projector_error: float = 0.0
    eigenvector_error: float = 0.0
    rank_mismatches: int = 0


def discriminant_T(g: Graph, omega: Sequence[np.ndarray] | None = None) -> DiscriminantReport:
    """T = RFR† on l²(V), compared with F11 taken in an independent basis.

    F11 is computed in an eigenbasis of Π (not the ω(x)), so the two
    spectra and the projectors P_1^λ, R†P_T^λR come from separate solves.
    """
    R = boundary_operator(g, omega)
    F = flip_operator(g).matrix
    T = R @ F @ R.conj().T
    Pi = R.conj().T @ R
    pair = compressions(F, Pi)
    decT = eig_normal(T)
    dec1 = eig_normal(pair.F11)
    specT = [(float(v.real), int(m)) for v, m in decT.spectrum()]
    spec1 = [(float(v.real), int(m)) for v, m in dec1.spectrum()]
    spec_err = 0.0
    rank_bad = 0
    proj_err = 0.0
    for (v, m), P_T in zip(specT, decT.projectors):
        d = np.abs(dec1.cluster_values - v)
        j = int(d.argmin())
        spec_err = max(spec_err, float(d[j]))
        if int(dec1.multiplicities[j]) != m:
            rank_bad += 1
        P1 = pair.V1 @ dec1.projectors[j] @ pair.V1.conj().T
        proj_err = max(proj_err, float(np.abs(P1 - R.conj().T @ P_T @ R).max()))
    if len(specT) != len(spec1):
        rank_bad += abs(len(specT) - len(spec1))
    # ψ1 = R†φ is an eigenvector of ΠFΠ whenever Tφ = λφ.
    vec_err = 0.0
    PFP = Pi @ F @ Pi
    for i, lam in enumerate(decT.eigenvalues):
        psi = R.conj().T @ decT.eigenvectors[:, i]
        vec_err = max(vec_err, float(np.abs(PFP @ psi - lam * psi).max()))
    return DiscriminantReport(T, R, specT, spec1, spec_err, proj_err, vec_err, rank_bad)
