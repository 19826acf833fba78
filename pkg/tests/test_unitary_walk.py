import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqw.graph_core import complete_graph, cycle_graph, star_graph, torus_coords, torus_graph
from sqw.numerics import eig_normal, haar_unitary
from sqw.scattering import (
    HADAMARD,
    NotUnitary,
    constant_family,
    explicit_family,
    grover_alpha,
    haar_family,
    identity_family,
)
from sqw.unitary_walk import (
    ComplementEmpty,
    DimensionMismatch,
    FamilyMismatch,
    GraphMismatch,
    NotRegular,
    NotTorus,
    OddSize,
    build_unitary,
    cesaro_vertex_average,
    cesaro_vertex_limit,
    chalker_coddington_torus,
    coin_decomposition,
    coined_equivalence_check,
    complete_embedding,
    evolve_and_observe,
    flip_operator,
    perturbation_bound,
    star_graph_analysis,
    vertex_probability_series,
)

from conftest import random_graphs


def _t3_family(t3, tx, tz, Sy):
    return explicit_family(t3, [np.array([[np.exp(1j * tx)]]), Sy, np.array([[np.exp(1j * tz)]])])


def test_t3_matrix_in_printed_basis(t3):
    tx, tz = 0.7, -1.9
    Sy = haar_unitary(2, 11)
    U = build_unitary(t3, _t3_family(t3, tx, tz, Sy))
    # |yx>, |yz>, |xy>, |zy> as (target, source)
    order = [U.basis.index_of[e] for e in [(1, 0), (1, 2), (0, 1), (2, 1)]]
    got = U.matrix[np.ix_(order, order)]
    want = np.array(
        [
            [0, 0, np.exp(1j * tx), 0],
            [0, 0, 0, np.exp(1j * tz)],
            [Sy[0, 0], Sy[0, 1], 0, 0],
            [Sy[1, 0], Sy[1, 1], 0, 0],
        ]
    )
    assert np.abs(got - want).max() < 1e-15


def test_t3_spectrum_is_square_root_of_DS(t3):
    tx, tz = 0.4, 2.2
    Sy = haar_unitary(2, 5)
    U = build_unitary(t3, _t3_family(t3, tx, tz, Sy))
    alphas = np.angle(np.linalg.eigvals(np.diag(np.exp(1j * np.array([tx, tz]))) @ Sy))
    want = np.sort_complex(np.concatenate([np.exp(1j * alphas / 2), -np.exp(1j * alphas / 2)]))
    got = np.sort_complex(np.linalg.eigvals(U.matrix))
    assert np.abs(got - want).max() < 1e-12


def test_entries_match_definition():
    for k, g in enumerate(random_graphs(6, seed=3)):
        f = haar_family(g, k)
        U = build_unitary(g, f)
        b = U.basis
        want = np.zeros_like(U.matrix)
        for x in g.vertices:
            for z in g.neighbors(x):
                for y in g.neighbors(x):
                    want[b.index_of[(z, x)], b.index_of[(x, y)]] = f.entry(x, z, y)
        assert np.abs(U.matrix - want).max() == 0
        assert U.unitarity_error() < 1e-9


def test_family_for_other_graph_rejected(t3, triangle):
    with pytest.raises(FamilyMismatch):
        build_unitary(triangle, identity_family(t3))


@pytest.mark.parametrize("N", [1, 3, 5])
def test_star_block_form(N):
    g = star_graph(N)
    S0 = haar_unitary(N, N)
    theta = np.linspace(0.1, 2.0, N)
    U = build_unitary(g, explicit_family(g, [S0] + [np.array([[np.exp(1j * t)]]) for t in theta])).matrix
    want = np.block([[np.zeros((N, N)), np.diag(np.exp(1j * theta))], [S0, np.zeros((N, N))]])
    assert np.abs(U - want).max() < 1e-15


def test_identity_family_is_flip():
    for g in random_graphs(6, seed=4):
        U = build_unitary(g, identity_family(g)).matrix
        assert np.abs(U - flip_operator(g).matrix).max() == 0


def test_flip_properties():
    for g in random_graphs(6, seed=5):
        F = flip_operator(g)
        b = F.basis
        assert np.abs(F.matrix @ F.matrix - np.eye(F.dim)).max() == 0
        for i, (t, s) in enumerate(b.directed_edges):
            assert F.matrix[b.index_of[(s, t)], i] == 1
        ev = np.linalg.eigvals(F.matrix)
        assert np.abs(np.abs(ev.real) - 1).max() < 1e-12
        assert np.abs(ev.imag).max() < 1e-12


def test_flip_theta_identity_is_flip():
    g = torus_graph((4, 3))
    assert np.abs(flip_operator(g, [0, 1, 2, 3]).matrix - flip_operator(g).matrix).max() == 0


def test_flip_theta_is_permutation_unitary():
    g = torus_graph((4, 4))
    F = flip_operator(g, [1, 0, 3, 2]).matrix
    assert np.abs(F.conj().T @ F - np.eye(F.shape[0])).max() == 0
    assert np.all(F.sum(axis=0) == 1)


def test_flip_theta_needs_regular_graph(t3):
    with pytest.raises(NotRegular):
        flip_operator(t3, [0])


def test_coin_decomposition_recovers_S():
    for k, g in enumerate(random_graphs(6, seed=6)):
        f = haar_family(g, 100 + k)
        blocks = coin_decomposition(build_unitary(g, f))
        assert max(np.abs(B - S).max() for B, S in zip(blocks, f.matrices)) < 1e-15


def test_intertwining():
    for k, g in enumerate(random_graphs(5, seed=7)):
        U = build_unitary(g, haar_family(g, k))
        for x in g.vertices:
            assert np.abs(U.matrix @ U.in_projector(x) - U.out_projector(x) @ U.matrix).max() < 1e-15


def test_coined_equivalence_haar_torus():
    g = torus_graph((4, 4))
    assert coined_equivalence_check((4, 4), haar_family(g, 9)).discrepancy < 1e-9


def test_coined_equivalence_hadamard_cycle():
    g = torus_graph((6,))
    rep = coined_equivalence_check((6,), constant_family(g, {2: HADAMARD}))
    assert rep.discrepancy < 1e-9


def test_coined_equivalence_identity_coins():
    g = torus_graph((3, 4))
    rep = coined_equivalence_check((3, 4), identity_family(g))
    assert rep.discrepancy == 0
    # identity coins reduce U_S to F; on the coined side that is the translation with τ → −τ
    back = rep.identification.T @ flip_operator(g).matrix @ rep.identification
    assert np.abs(back - rep.TC).max() == 0


def test_coined_equivalence_rejects_other_graph():
    with pytest.raises(NotTorus):
        coined_equivalence_check((4, 4), identity_family(cycle_graph(5)))


def test_cc_identity_blocks_are_permutations():
    rep = chalker_coddington_torus(4, 4, np.eye(2), np.eye(2))
    assert rep.off_block_norm == 0
    for B in rep.blocks:
        assert B.shape == (32, 32)
        assert np.all((B == 0) | (B == 1))
        assert np.all(B.sum(axis=0) == 1) and np.all(B.sum(axis=1) == 1)


@pytest.mark.parametrize("sides", [(4, 4), (4, 6), (6, 4)])
def test_cc_random_blocks_invariant(sides):
    rep = chalker_coddington_torus(*sides, haar_unitary(2, 1), haar_unitary(2, 2))
    assert rep.off_block_norm < 1e-12
    assert rep.walk.unitarity_error() < 1e-9
    assert all(len(i) == 2 * sides[0] * sides[1] for i in rep.block_indices)


def test_cc_first_block_scatters_like_network():
    J, K = 4, 6
    coords = torus_coords((J, K))
    rng = np.random.default_rng(3)
    even = {tuple(c): haar_unitary(2, rng) for c in coords}
    odd = {tuple(c): haar_unitary(2, rng) for c in coords}
    rep = chalker_coddington_torus(J, K, even, odd)
    assert rep.off_block_norm < 1e-12
    U, b = rep.walk.matrix, rep.walk.basis
    first = set(rep.block_indices[0].tolist())
    for x in range(J * K):
        ins = [i for i in b.in_block(x) if i in first]
        outs = [i for i in b.out_block(x) if i in first]
        assert len(ins) == 2 and len(outs) == 2
        # U|a> = S11|c> + S21|d>, U|b> = S12|c> + S22|d>
        parity = coords[x].sum() % 2
        S = (even if parity == 0 else odd)[tuple(coords[x])]
        assert np.abs(U[np.ix_(outs, ins)] - S).max() < 1e-15
        # links of the first copy run from even-parity nodes to odd-parity nodes and back
        for i in outs:
            t, _ = b.directed_edges[i]
            assert coords[t].sum() % 2 != parity


def test_cc_second_block_swaps_matrices():
    Se, So = haar_unitary(2, 4), haar_unitary(2, 8)
    rep = chalker_coddington_torus(4, 4, Se, So)
    U, b = rep.walk.matrix, rep.walk.basis
    second = set(rep.block_indices[1].tolist())
    coords = torus_coords((4, 4))
    for x in range(16):
        ins = [i for i in b.in_block(x) if i in second]
        outs = [i for i in b.out_block(x) if i in second]
        S = So if coords[x].sum() % 2 == 0 else Se
        assert np.abs(U[np.ix_(outs, ins)] - S).max() < 1e-15


def test_cc_odd_size_rejected():
    with pytest.raises(OddSize):
        chalker_coddington_torus(3, 4, np.eye(2), np.eye(2))


def test_embedding_t3_in_k3(t3):
    f = haar_family(t3, 21)
    rep = complete_embedding(t3, f, [np.array([[np.exp(0.3j)]]), np.zeros((0, 0)), np.array([[1j]])])
    assert rep.block_error < 1e-15
    assert rep.complement_block_error < 1e-15
    assert rep.cross_norm == 0
    assert rep.complete.dim == 6
    assert rep.complete.unitarity_error() < 1e-9


def test_embedding_complete_graph_rejected():
    g = complete_graph(4)
    with pytest.raises(ComplementEmpty):
        complete_embedding(g, identity_family(g))


def test_embedding_four_cycle_in_k4():
    g = cycle_graph(4)
    f = haar_family(g, 3)
    phases = [np.array([[np.exp(1j * t)]]) for t in (0.1, 0.2, 0.3, 0.4)]
    rep = complete_embedding(g, f, phases)
    assert rep.block_error < 1e-15 and rep.cross_norm == 0
    # complement of C4 is the matching {0,2}, {1,3}: each pair of its edges forms its own 2×2 block
    UK, kb = rep.complete.matrix, rep.complete.basis
    for a, c in [(0, 2), (1, 3)]:
        pair = [kb.index_of[(a, c)], kb.index_of[(c, a)]]
        rest = [i for i in range(UK.shape[0]) if i not in pair]
        assert np.abs(UK[np.ix_(rest, pair)]).max() == 0
        blk = UK[np.ix_(pair, pair)]
        assert abs(blk[1, 0] - phases[a][0, 0]) < 1e-15 and abs(blk[0, 1] - phases[c][0, 0]) < 1e-15


def test_embedding_rejects_bad_complement_size(t3):
    with pytest.raises(FamilyMismatch):
        complete_embedding(t3, identity_family(t3), [np.eye(2), np.zeros((0, 0)), np.eye(1)])


def test_evolve_zero_steps(t3, rng):
    U = build_unitary(t3, haar_family(t3, 1))
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    obs = evolve_and_observe(U, psi, 0)
    assert np.abs(obs.edge_probabilities - np.abs(psi) ** 2).max() < 1e-15


def test_evolve_one_step_from_basis_edge(t3):
    U = build_unitary(t3, haar_family(t3, 2))
    b = U.basis
    start = b.index_of[(1, 0)]
    psi = np.zeros(4, dtype=complex)
    psi[start] = 1
    obs = evolve_and_observe(U, psi, 1)
    assert np.abs(obs.edge_probabilities - np.abs(U.matrix[:, start]) ** 2).max() < 1e-15
    outside = np.setdiff1d(np.arange(4), b.out_block(1))
    assert obs.edge_probabilities[outside].max() == 0


def test_vertex_probabilities_sum_to_one():
    for k, g in enumerate(random_graphs(5, seed=8)):
        U = build_unitary(g, haar_family(g, k))
        psi = np.ones(U.dim, dtype=complex) / np.sqrt(U.dim)
        Q = vertex_probability_series(U, psi, 30)
        assert np.abs(Q.sum(axis=1) - 1).max() < 1e-10


def test_evolve_rejects_bad_state(t3):
    U = build_unitary(t3, identity_family(t3))
    with pytest.raises(DimensionMismatch):
        evolve_and_observe(U, np.ones(3), 1)
    with pytest.raises(DimensionMismatch):
        evolve_and_observe(U, np.ones(4), 1)


def test_cesaro_limit_of_eigenvector():
    g = cycle_graph(5)
    U = build_unitary(g, haar_family(g, 4))
    dec = eig_normal(U.matrix)
    P = dec.projectors[0]
    col = np.argmax(np.linalg.norm(P, axis=0))
    psi = P[:, col] / np.linalg.norm(P[:, col])
    for x in g.vertices:
        want = np.linalg.norm(psi[U.basis.in_slice(x)]) ** 2
        assert abs(cesaro_vertex_limit(U, psi, x) - want) < 1e-10


def test_cesaro_limit_matches_finite_average():
    g = cycle_graph(4)
    U = build_unitary(g, haar_family(g, 12))
    psi = np.zeros(U.dim, dtype=complex)
    psi[0] = 1
    for x in g.vertices:
        lim = cesaro_vertex_limit(U, psi, x)
        errs = [abs(cesaro_vertex_average(U, psi, x, N) - lim) for N in (500, 4000)]
        # the finite average approaches the limit at rate O(1/N)
        assert errs[1] < 0.05
        assert errs[1] * 4000 < 50


def test_perturbation_bound_zero_for_equal_families(t3):
    f = haar_family(t3, 3)
    assert perturbation_bound(f, f) == 0


def test_perturbation_bound_identity_vs_grover_pi():
    g = cycle_graph(6)
    assert abs(perturbation_bound(identity_family(g), grover_alpha(g, np.pi)) - 2) < 1e-14


def test_perturbation_bound_rejects_other_graph(t3, triangle):
    with pytest.raises(GraphMismatch):
        perturbation_bound(identity_family(t3), identity_family(triangle))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_perturbation_bound_dominates_operator_norm(seed):
    for g in random_graphs(5, seed=seed % 1000, n_max=7):
        f1, f2 = haar_family(g, seed), haar_family(g, seed + 1)
        diff = build_unitary(g, f1).matrix - build_unitary(g, f2).matrix
        assert np.linalg.norm(diff, 2) <= perturbation_bound(f1, f2) + 1e-12


def test_star_single_edge():
    rep = star_graph_analysis(np.eye(1), [0.0])
    vals = sorted(v.real for v, _ in rep.spectrum)
    assert np.abs(np.array(vals) - [-1, 1]).max() < 1e-15
    assert rep.direct_error < 1e-15


@pytest.mark.parametrize("N", [2, 4, 6])
def test_star_spectrum_and_projectors(N):
    S0 = haar_unitary(N, 40 + N)
    theta = np.random.default_rng(N).uniform(-np.pi, np.pi, N)
    rep = star_graph_analysis(S0, theta)
    assert rep.direct_error < 1e-12
    alphas = np.angle(np.linalg.eigvals(rep.DS))
    want = np.concatenate([np.exp(1j * alphas / 2), -np.exp(1j * alphas / 2)])
    got = np.linalg.eigvals(rep.U.matrix)
    assert np.abs(np.sort_complex(got) - np.sort_complex(want)).max() < 1e-10
    for lam, E in rep.projectors:
        assert np.abs(E @ E - E).max() < 1e-12
        assert np.abs(rep.U.matrix @ E - lam * E).max() < 1e-12


def test_star_degenerate_multiplicities():
    # D(θ)S0 = diag(1, 1, -1): eigenvalues ±1 doubled, ±i single
    rep = star_graph_analysis(np.diag([1, 1, -1]).astype(complex), [0.0, 0.0, 0.0])
    mult = {complex(np.round(v, 12)): m for v, m in rep.spectrum}
    assert mult[1] == 2 and mult[-1] == 2
    assert mult[1j] == 1 and mult[-1j] == 1


def test_star_square_is_block_diagonal():
    N = 4
    S0 = haar_unitary(N, 77)
    theta = np.array([0.3, -1.0, 2.0, 0.5])
    rep = star_graph_analysis(S0, theta)
    U2 = rep.U.matrix @ rep.U.matrix
    D = np.diag(np.exp(1j * theta))
    assert np.abs(U2[:N, :N] - D @ S0).max() < 1e-14
    assert np.abs(U2[N:, N:] - S0 @ D).max() < 1e-14
    assert np.abs(U2[:N, N:]).max() == 0 and np.abs(U2[N:, :N]).max() == 0


def test_star_center_limit_is_half():
    N = 5
    S0 = haar_unitary(N, 3)
    theta = np.random.default_rng(1).uniform(-np.pi, np.pi, N)
    rep = star_graph_analysis(S0, theta)
    psi = np.zeros(2 * N, dtype=complex)
    psi[:N] = haar_unitary(N, 9)[:, 0]
    assert abs(cesaro_vertex_limit(rep.U, psi, 0) - 0.5) < 1e-10


def test_star_branch_limit_formula():
    N = 4
    S0 = haar_unitary(N, 13)
    theta = np.array([0.2, 1.1, -0.4, 2.5])
    rep = star_graph_analysis(S0, theta)
    psi = np.zeros(2 * N, dtype=complex)
    psi[:N] = haar_unitary(N, 14)[:, 1]
    w, phi = np.linalg.eig(rep.DS)
    phi /= np.linalg.norm(phi, axis=0)
    # leaf k holds the single incoming edge |k0>, i.e. row N + k − 1 of the in-space
    for k in range(1, N + 1):
        kidx = rep.U.basis.index_of[(k, 0)]
        row = (S0 @ phi)[kidx - N]
        want = sum(0.5 * abs(row[j]) ** 2 * abs(np.vdot(phi[:, j], psi[:N])) ** 2 for j in range(N))
        assert abs(rep.cesaro_branch_limit(psi, k) - want) < 1e-10
        assert abs(cesaro_vertex_limit(rep.U, psi, k) - want) < 1e-10


def test_star_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        star_graph_analysis(np.ones((2, 2)), [0, 0])
