"""Per-vertex scattering matrices S(x).

Rows and columns of S(x) follow the neighbor order of ``x``: the entry
S_{zy}(x) sits at ``(g.slot(x, z), g.slot(x, y))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .graph_core import Graph
from .numerics import haar_unitary

FAMILY_UNITARITY_TOL = 1e-10

HADAMARD = np.array([[1, 1], [-1, 1]], dtype=complex) / np.sqrt(2)
SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


class FamilyError(ValueError):
    pass


class NonUnitOmega(FamilyError):
    pass


class MissingDegree(FamilyError):
    pass


class NotUnitary(FamilyError):
    pass


@dataclass(frozen=True, eq=False)
class ScatteringFamily:
    graph: Graph
    matrices: tuple[np.ndarray, ...]
    kind: str = "explicit"
    params: Mapping = field(default_factory=dict)

    def __getitem__(self, x: int) -> np.ndarray:
        return self.matrices[x]

    def entry(self, x: int, z: int, y: int) -> complex:
        """S_{zy}(x) addressed by vertex ids."""
        g = self.graph
        return complex(self.matrices[x][g.slot(x, z), g.slot(x, y)])

    def has_zero_entries(self, tol: float = 1e-12) -> bool:
        return any(np.abs(S).min() <= tol for S in self.matrices)


@dataclass
class FamilyReport:
    ok: bool
    violations: dict[int, float]

    def __bool__(self) -> bool:
        return self.ok


def _unitarity_defect(S: np.ndarray) -> float:
    return float(np.abs(S.conj().T @ S - np.eye(S.shape[0])).max(initial=0.0))


def validate_family(g: Graph, f: ScatteringFamily, tol: float = FAMILY_UNITARITY_TOL) -> FamilyReport:
    """Report every vertex whose matrix is mis-sized or not unitary.

    Mis-sized matrices are reported with an infinite defect.
    """
    bad: dict[int, float] = {}
    if len(f.matrices) != g.vertex_count:
        return FamilyReport(False, {-1: float("inf")})
    for x in g.vertices:
        S = np.asarray(f.matrices[x])
        d = g.degree(x)
        if S.shape != (d, d):
            bad[x] = float("inf")
            continue
        err = _unitarity_defect(S)
        if err > tol:
            bad[x] = err
    return FamilyReport(not bad, bad)


def _freeze(g: Graph, mats: Sequence[np.ndarray], kind: str, **params) -> ScatteringFamily:
    frozen = []
    for S in mats:
        S = np.array(S, dtype=complex)
        S.setflags(write=False)
        frozen.append(S)
    return ScatteringFamily(g, tuple(frozen), kind, dict(params))


def uniform_omega(g: Graph) -> tuple[np.ndarray, ...]:
    return tuple(np.full(g.degree(x), 1 / np.sqrt(g.degree(x)), dtype=complex) for x in g.vertices)


def check_omega(g: Graph, omega: Sequence[np.ndarray] | None, tol: float = 1e-10) -> tuple[np.ndarray, ...]:
    """Validate per-vertex unit vectors, defaulting to uniform ones."""
    if omega is None:
        return uniform_omega(g)
    if len(omega) != g.vertex_count:
        raise NonUnitOmega("need one ω vector per vertex")
    out = []
    for x in g.vertices:
        w = np.asarray(omega[x], dtype=complex).reshape(-1)
        if w.shape != (g.degree(x),):
            raise NonUnitOmega(f"ω({x}) has length {w.size}, expected {g.degree(x)}")
        if abs(np.linalg.norm(w) - 1) > tol:
            raise NonUnitOmega(f"ω({x}) has norm {np.linalg.norm(w):.12g}")
        out.append(w)
    return tuple(out)


def random_omega(g: Graph, rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    out = []
    for x in g.vertices:
        w = rng.standard_normal(g.degree(x)) + 1j * rng.standard_normal(g.degree(x))
        out.append(w / np.linalg.norm(w))
    return tuple(out)


def grover_alpha(g: Graph, alpha: float, omega: Sequence[np.ndarray] | None = None) -> ScatteringFamily:
    """S(x) = |ω⟩⟨ω| + e^{iα}(I − |ω⟩⟨ω|)."""
    omega = check_omega(g, omega)
    phase = np.exp(1j * alpha)
    mats = []
    for w in omega:
        proj = np.outer(w, w.conj())
        mats.append(proj + phase * (np.eye(len(w)) - proj))
    return _freeze(g, mats, "grover", alpha=float(alpha))


def dft_matrix(d: int) -> np.ndarray:
    j = np.arange(d)
    return np.exp(-2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def dft_family(g: Graph) -> ScatteringFamily:
    return _freeze(g, [dft_matrix(g.degree(x)) for x in g.vertices], "dft")


def identity_family(g: Graph) -> ScatteringFamily:
    return _freeze(g, [np.eye(g.degree(x)) for x in g.vertices], "identity")


def constant_family(g: Graph, by_degree: Mapping[int, np.ndarray]) -> ScatteringFamily:
    """Same matrix at every vertex of a given degree."""
    mats = []
    for x in g.vertices:
        d = g.degree(x)
        if d not in by_degree:
            raise MissingDegree(f"no matrix supplied for degree {d}")
        S = np.asarray(by_degree[d], dtype=complex)
        if S.shape != (d, d) or _unitarity_defect(S) > FAMILY_UNITARITY_TOL:
            raise NotUnitary(f"matrix for degree {d} is not a {d}×{d} unitary")
        mats.append(S)
    return _freeze(g, mats, "constant")


def hadamard_center_family(g: Graph) -> ScatteringFamily:
    """Hadamard at degree-2 vertices and 1 at leaves."""
    return constant_family(g, {1: np.eye(1), 2: HADAMARD})


def swap_center_family(g: Graph) -> ScatteringFamily:
    return constant_family(g, {1: np.eye(1), 2: SWAP})


def vertex_seed(seed: int, x: int) -> int:
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), x]).generate_state(1, np.uint64)[0])


def haar_family(g: Graph, seed: int) -> ScatteringFamily:
    """Independent Haar unitaries with per-vertex seeds derived from ``seed``."""
    return _freeze(g, [haar_unitary(g.degree(x), vertex_seed(seed, x)) for x in g.vertices], "haar", seed=int(seed))


def explicit_family(g: Graph, matrices: Sequence[np.ndarray] | Mapping[int, np.ndarray]) -> ScatteringFamily:
    if isinstance(matrices, Mapping):
        matrices = [matrices[x] for x in g.vertices]
    f = _freeze(g, list(matrices), "explicit")
    report = validate_family(g, f)
    if not report:
        raise NotUnitary(f"non-unitary or mis-sized S(x) at {sorted(report.violations)}")
    return f


# ----- JSON -----


def _decode_matrix(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise FamilyError("matrices must be nested [re, im] arrays")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_matrix(M: np.ndarray) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def family_from_json(g: Graph, obj: Mapping) -> ScatteringFamily:
    kind = obj.get("kind")
    if kind == "grover":
        omega = obj.get("omega")
        if omega is not None:
            omega = [np.asarray(w, dtype=float) @ np.array([1, 1j]) for w in omega]
        return grover_alpha(g, float(obj.get("alpha", np.pi)), omega)
    if kind == "dft":
        return dft_family(g)
    if kind == "identity":
        return identity_family(g)
    if kind == "haar":
        return haar_family(g, int(obj.get("seed", 0)))
    if kind in ("constant", "explicit"):
        raw = obj.get("matrices")
        if not isinstance(raw, Mapping):
            raise FamilyError("'matrices' must be an object keyed by vertex (or degree for 'constant')")
        mats = {int(k): _decode_matrix(v) for k, v in raw.items()}
        if kind == "constant":
            return constant_family(g, mats)
        missing = [x for x in g.vertices if x not in mats]
        if missing:
            raise FamilyError(f"no matrix for vertices {missing}")
        return explicit_family(g, mats)
    raise FamilyError(f"unknown family kind {kind!r}")


def family_to_json(f: ScatteringFamily) -> dict:
    out: dict = {"kind": "explicit", "matrices": {str(x): encode_matrix(S) for x, S in enumerate(f.matrices)}}
    out.update({k: v for k, v in f.params.items()})
    return out


def parse_family(g: Graph, spec: str) -> ScatteringFamily:
    """Shorthand descriptors: ``grover:ALPHA``, ``dft``, ``identity``,
    ``haar:SEED``, ``hadamard-center``, ``swap-center``."""
    name, _, arg = spec.partition(":")
    if name == "grover":
        return grover_alpha(g, float(arg) if arg else np.pi)
    if name == "dft" and not arg:
        return dft_family(g)
    if name == "identity" and not arg:
        return identity_family(g)
    if name == "haar":
        return haar_family(g, int(arg) if arg else 0)
    if name in ("hadamard-center", "hadamard") and not arg:
        return hadamard_center_family(g)
    if name == "swap-center" and not arg:
        return swap_center_family(g)
    raise FamilyError(f"unrecognized family descriptor {spec!r}")
