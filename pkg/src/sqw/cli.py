"""``sqw`` command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import export
from .graph_core import (
    Graph,
    GraphError,
    complete_graph,
    cycle_graph,
    edge_basis,
    graph_from_json,
    graph_to_json,
    path_graph,
    random_connected_graph,
    star_graph,
    t3_graph,
    torus_graph,
)
from .numerics import ConvergenceFailure, NotNormal, eig_normal, general_spectrum
from .scattering import FamilyError, ScatteringFamily, encode_matrix, family_from_json, parse_family, random_omega

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERIC = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class InvalidInput(Exception):
    pass


class NumericFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise UsageError(message)


# ----- inputs -----


def load_graph(spec: str, seed: int, vertices: int) -> Graph:
    """A JSON path, ``random``, or a builtin: t3, path:N, cycle:N, star:N,
    complete:N, torus:JxK."""
    name, _, arg = spec.partition(":")
    try:
        if spec == "random":
            return random_connected_graph(vertices, np.random.default_rng(seed))
        if spec == "t3":
            return t3_graph()
        builders: dict[str, Callable[[int], Graph]] = {
            "path": path_graph,
            "cycle": cycle_graph,
            "star": star_graph,
            "complete": complete_graph,
        }
        if name in builders and arg:
            return builders[name](int(arg))
        if name == "torus" and arg:
            return torus_graph([int(s) for s in arg.lower().split("x")])
    except (ValueError, GraphError) as exc:
        raise InvalidInput(f"bad graph {spec!r}: {exc}") from exc
    if not os.path.isfile(spec):
        raise InvalidInput(f"graph file not found: {spec}")
    try:
        with open(spec, encoding="utf-8") as fh:
            obj = json.load(fh)
        return graph_from_json(obj)
    except (OSError, json.JSONDecodeError, GraphError, TypeError, ValueError, KeyError) as exc:
        raise InvalidInput(f"cannot read graph {spec}: {exc}") from exc


def load_family(g: Graph, spec: str) -> ScatteringFamily:
    try:
        if os.path.isfile(spec):
            with open(spec, encoding="utf-8") as fh:
                return family_from_json(g, json.load(fh))
        return parse_family(g, spec)
    except (OSError, json.JSONDecodeError, FamilyError, TypeError, ValueError, KeyError) as exc:
        raise InvalidInput(f"bad family {spec!r}: {exc}") from exc


def edge_initial_state(g: Graph, spec: str) -> np.ndarray:
    """Pure state on l²(D): ``edge:I``, ``vertex:X`` (uniform on the in-block)
    or ``uniform``."""
    b = edge_basis(g)
    psi = np.zeros(b.dim, dtype=complex)
    kind, _, arg = spec.partition(":")
    try:
        if kind == "edge":
            i = int(arg)
            if not 0 <= i < b.dim:
                raise ValueError(f"edge index {i} outside 0..{b.dim - 1}")
            psi[i] = 1
        elif kind == "vertex":
            x = _vertex_id(g, arg)
            psi[b.in_slice(x)] = 1
        elif spec == "uniform":
            psi[:] = 1
        else:
            raise ValueError("expected edge:I, vertex:X or uniform")
    except ValueError as exc:
        raise InvalidInput(f"bad initial state {spec!r}: {exc}") from exc
    return psi / np.linalg.norm(psi)


def vertex_initial_state(g: Graph, spec: str) -> np.ndarray:
    """Density matrix on l²(V): ``vertex:X`` or ``uniform`` (pure, equal weights)."""
    psi = np.zeros(g.vertex_count, dtype=complex)
    kind, _, arg = spec.partition(":")
    try:
        if kind == "vertex":
            psi[_vertex_id(g, arg)] = 1
        elif spec == "uniform":
            psi[:] = 1
        else:
            raise ValueError("expected vertex:X or uniform")
    except ValueError as exc:
        raise InvalidInput(f"bad initial state {spec!r}: {exc}") from exc
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _vertex_id(g: Graph, token: str) -> int:
    if g.labels and token in g.labels:
        return g.labels.index(token)
    x = int(token)
    if not 0 <= x < g.vertex_count:
        raise ValueError(f"vertex {x} outside 0..{g.vertex_count - 1}")
    return x


# ----- commands -----


def _labels(g: Graph) -> list[str]:
    return [g.label(x) for x in g.vertices]


def _series_csv(g: Graph, Q: np.ndarray) -> str:
    labels = _labels(g)
    rows = ((k, labels[x], Q[k, x]) for k in range(Q.shape[0]) for x in g.vertices)
    return export.csv_text(["n", "vertex", "probability"], rows)


def cmd_build(args, g: Graph, f: ScatteringFamily) -> str:
    from .unitary_walk import build_unitary

    W = build_unitary(g, f)
    b = W.basis
    return export.to_json_text(
        {
            "graph": graph_to_json(g),
            "edges": [b.label(i) for i in range(b.dim)],
            "unitarity_error": W.unitarity_error(),
            "U": encode_matrix(W.matrix),
        }
    )


def cmd_spectrum(args, g: Graph, f: ScatteringFamily) -> str:
    from .open_walk import phi_diag
    from .unitary_walk import build_unitary

    U = build_unitary(g, f).matrix
    out: dict = {}
    if args.operator in ("unitary", "both"):
        out["unitary"] = export.spectrum_records(eig_normal(U).spectrum())
    if args.operator in ("phi-diag", "both"):
        spec = general_spectrum(phi_diag(g, f))
        out["phi_diag"] = [
            {"re": e.value.real, "im": e.value.imag, "multiplicity": e.algebraic, "geometric_multiplicity": e.geometric}
            for e in spec
        ]
    if len(out) == 1:
        return export.to_json_text(next(iter(out.values())))
    return export.to_json_text(out)


def cmd_evolve(args, g: Graph, f: ScatteringFamily) -> str:
    from .unitary_walk import build_unitary, vertex_probability_series

    W = build_unitary(g, f)
    psi0 = edge_initial_state(g, args.initial)
    return _series_csv(g, vertex_probability_series(W, psi0, args.steps))


def cmd_open_evolve(args, g: Graph, f: ScatteringFamily) -> str:
    from .open_walk import vertex_series

    psi0 = edge_initial_state(g, args.initial)
    return _series_csv(g, vertex_series(g, f, np.outer(psi0, psi0.conj()), args.steps))


def cmd_induced(args, g: Graph, f: ScatteringFamily) -> str:
    from .induced_walk import chi_vectors, evolve_induced

    omega = random_omega(g, np.random.default_rng(args.seed)) if args.omega == "random" else None
    chi = chi_vectors(g, f, omega, beta=args.beta)
    rho0 = vertex_initial_state(g, args.initial)
    return _series_csv(g, evolve_induced(chi, rho0, args.steps).Q)


def cmd_trajectories(args, g: Graph, f: ScatteringFamily) -> str:
    from .open_walk import sample_trajectories

    psi0 = edge_initial_state(g, args.initial)
    res = sample_trajectories(g, f, np.outer(psi0, psi0.conj()), args.steps, args.trajectories, args.seed, workers=args.threads)
    labels = _labels(g)
    rows = (
        (t, j + 1, labels[res.outcomes[t, j]])
        for t in range(res.outcomes.shape[0])
        for j in range(res.outcomes.shape[1])
    )
    return export.csv_text(["trajectory", "step", "vertex"], rows)


def cmd_asymptotics(args, g: Graph, f: ScatteringFamily) -> str:
    labels = _labels(g)
    if args.channel == "edge":
        from .open_walk import asymptotic_state

        rep = asymptotic_state(g, f)
        out = {
            "channel": "edge",
            "mode": rep.mode,
            "gap": rep.gap,
            "irreducible": rep.irreducible,
            "period": rep.period,
            "vertex_limit": None if rep.vertex_limit is None else dict(zip(labels, rep.vertex_limit.tolist())),
        }
        if rep.mode == "unclassified":
            out["phi_diag_spectrum"] = export.spectrum_records(rep.raw_spectrum)
        return export.to_json_text(out)
    from .induced_walk import chi_vectors, induced_asymptotics

    omega = random_omega(g, np.random.default_rng(args.seed)) if args.omega == "random" else None
    chi = chi_vectors(g, f, omega, beta=args.beta)
    rep = induced_asymptotics(chi)
    rho0 = vertex_initial_state(g, args.initial)
    return export.to_json_text(
        {
            "channel": "induced",
            "mode": rep.mode,
            "gap": rep.gap,
            "irreducible": rep.perron.irreducible,
            "period": rep.perron.period,
            "stationary": [dict(zip(labels, pi.tolist())) for pi in rep.perron.stationary],
            "vertex_limit": dict(zip(labels, rep.vertex_limit(rho0).tolist())),
        }
    )


def cmd_verify(args, g: Graph, f: ScatteringFamily | None) -> str:
    """Run one check suite; a failed check is a numeric failure (exit 2)."""
    results: dict = {"suite": args.suite}
    ok = True
    if args.suite == "spectral-mapping":
        from .grover_spectral import verify_spectral_mapping

        omega = random_omega(g, np.random.default_rng(args.seed)) if args.omega == "random" else None
        rep = verify_spectral_mapping(g, args.alpha, omega)
        ok = rep.passed
        results.update(
            alpha=args.alpha,
            max_match_error=rep.max_match_error,
            max_kernel_angle=rep.max_kernel_angle,
            violations=list(rep.violations),
        )
    elif args.suite == "discriminant":
        from .grover_spectral import discriminant_T

        rep = discriminant_T(g)
        ok = rep.spectrum_error < 1e-9 and rep.projector_error < 1e-8 and rep.rank_mismatches == 0
        results.update(spectrum_error=rep.spectrum_error, projector_error=rep.projector_error)
    elif args.suite == "unitarity":
        from .unitary_walk import build_unitary

        err = build_unitary(g, f).unitarity_error()
        ok = err < 1e-9
        results.update(unitarity_error=err)
    elif args.suite == "channel":
        from .open_walk import channel_spectrum

        rep = channel_spectrum(g, f)
        ok = (
            rep.kernel_dim == rep.expected_kernel_dim
            and rep.kernel_residual < 1e-12
            and rep.spectra_match
            and rep.max_lift_residual < 1e-9
        )
        results.update(
            kernel_dim=rep.kernel_dim,
            expected_kernel_dim=rep.expected_kernel_dim,
            spectra_match=rep.spectra_match,
            diagonalizable=rep.diagonalizable,
            max_lift_residual=rep.max_lift_residual,
        )
    results["passed"] = bool(ok)
    text = export.to_json_text(results)
    if not ok:
        raise NumericFailure(text)
    return text


COMMANDS: dict[str, Callable] = {
    "build": cmd_build,
    "spectrum": cmd_spectrum,
    "evolve": cmd_evolve,
    "open-evolve": cmd_open_evolve,
    "induced": cmd_induced,
    "trajectories": cmd_trajectories,
    "asymptotics": cmd_asymptotics,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sqw", description="Scattering quantum walks on graphs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, family_default="grover:3.141592653589793"):
        sp.add_argument("--graph", required=True, help="JSON file, 'random', t3, path:N, cycle:N, star:N, complete:N, torus:JxK")
        sp.add_argument("--family", default=family_default, help="grover:ALPHA, dft, identity, haar:SEED, hadamard-center, swap-center, or a JSON file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--vertices", type=int, default=8, help="vertex count for --graph random")
        sp.add_argument("--output", "-o", default=None, help="output path (default stdout)")

    for name in ("build", "spectrum", "evolve", "open-evolve", "induced", "trajectories", "asymptotics"):
        sp = sub.add_parser(name)
        common(sp)
        if name == "spectrum":
            sp.add_argument("--operator", choices=("unitary", "phi-diag", "both"), default="both")
        if name in ("evolve", "open-evolve", "induced", "trajectories"):
            sp.add_argument("--steps", type=int, default=20)
        if name in ("evolve", "open-evolve", "trajectories"):
            sp.add_argument("--initial", default="vertex:0", help="edge:I, vertex:X or uniform")
        if name in ("induced", "asymptotics"):
            sp.add_argument("--beta", type=float, default=0.0)
            sp.add_argument("--omega", choices=("uniform", "random"), default="uniform")
        if name in ("induced", "asymptotics"):
            sp.add_argument("--initial", default="uniform", help="vertex:X or uniform")
        if name == "trajectories":
            sp.add_argument("--trajectories", type=int, default=1000)
            sp.add_argument("--threads", type=int, default=None, help="worker threads (default $SQW_THREADS or 1)")
        if name == "asymptotics":
            sp.add_argument("--channel", choices=("edge", "induced"), default="edge")
    sp = sub.add_parser("verify")
    common(sp)
    sp.add_argument("--suite", choices=("spectral-mapping", "discriminant", "unitarity", "channel"), required=True)
    sp.add_argument("--alpha", type=float, default=np.pi)
    sp.add_argument("--omega", choices=("uniform", "random"), default="uniform")
    return p


def _validate(args) -> None:
    for attr in ("steps", "trajectories", "vertices", "threads"):
        v = getattr(args, attr, None)
        if v is None:
            continue
        if attr == "steps" and v < 0:
            raise InvalidInput("--steps must be non-negative")
        if attr != "steps" and v < 1:
            raise InvalidInput(f"--{attr} must be positive")
    if args.output not in (None, "-"):
        parent = os.path.dirname(os.path.abspath(args.output))
        if not os.path.isdir(parent):
            raise InvalidInput(f"output directory does not exist: {parent}")


def run(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        _validate(args)
        g = load_graph(args.graph, args.seed, args.vertices)
        f = load_family(g, args.family)
        text = COMMANDS[args.command](args, g, f)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInput, GraphError, FamilyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotNormal as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # Domain checks raised after loading (bad states, mismatched sizes).
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericFailure as exc:
        sys.stderr.write(str(exc))
        return EXIT_NUMERIC
    except (ConvergenceFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        export.write_text(text, args.output)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
