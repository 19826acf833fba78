"""Scattering quantum walks on graphs: unitary walks on directed edges, the
open edge channel and the induced vertex channel."""

from .graph_core import Graph, build_graph, edge_basis, t3_graph
from .scattering import (
    ScatteringFamily,
    dft_family,
    grover_alpha,
    haar_family,
    hadamard_center_family,
    identity_family,
    parse_family,
)
from .unitary_walk import build_unitary, flip_operator
from .open_walk import asymptotic_state, channel_spectrum, phi_diag, sample_trajectories, walk_channel
from .induced_walk import chi_vectors, evolve_induced, induced_asymptotics, induced_channel, vertex_stochastic

__all__ = [
    "Graph",
    "ScatteringFamily",
    "asymptotic_state",
    "build_graph",
    "build_unitary",
    "channel_spectrum",
    "chi_vectors",
    "dft_family",
    "edge_basis",
    "evolve_induced",
    "flip_operator",
    "grover_alpha",
    "haar_family",
    "hadamard_center_family",
    "identity_family",
    "induced_asymptotics",
    "induced_channel",
    "parse_family",
    "phi_diag",
    "sample_trajectories",
    "t3_graph",
    "vertex_stochastic",
    "walk_channel",
]
