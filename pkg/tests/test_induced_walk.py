import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqw.graph_core import build_graph, cycle_graph, functional_graph, path_graph, random_connected_graph, star_graph
from sqw.induced_walk import (
    absorption_probabilities,
    cesaro_projector,
    chi_vectors,
    completed_theta_channel,
    dft_induced_analysis,
    dft_stationary,
    evolve_induced,
    evolve_induced_kraus,
    grover_induced_stochastic,
    halfline_example,
    halfline_matrix,
    induced_asymptotics,
    induced_channel,
    theta_operation,
    vertex_stochastic,
)
from sqw.numerics import nullity, perron_analysis
from sqw.open_walk import BadState, WindowTooSmall, random_state
from sqw.scattering import NonUnitOmega, dft_family, grover_alpha, haar_family, hadamard_center_family, random_omega

from conftest import random_graphs


def _shuffled_order(g, rng):
    return [list(rng.permutation(g.neighbors(x))) for x in g.vertices]


def test_chi_invariants(rng):
    for k, g in enumerate(random_graphs(10, seed=41)):
        chi = chi_vectors(g, haar_family(g, k), random_omega(g, rng), rng.uniform(-3, 3, g.vertex_count))
        d = chi.invariant_defects()
        assert max(d.values()) < 1e-10


def test_theta_norm_formula(rng):
    for k, g in enumerate(random_graphs(6, seed=42)):
        f = haar_family(g, k)
        omega = random_omega(g, rng)
        chi = chi_vectors(g, f, omega)
        for x in g.vertices:
            v = f[x] @ omega[x]
            want = sum(abs(omega[z][g.slot(z, x)]) ** 2 * abs(v[g.slot(x, z)]) ** 2 for z in g.neighbors(x))
            assert abs(chi.theta_norms[x] ** 2 - want) < 1e-14


def test_dft_theta_uniform_omega():
    for g in random_graphs(6, seed=43):
        chi = chi_vectors(g, dft_family(g))
        for x in g.vertices:
            x1 = g.neighbors(x)[0]
            want = np.zeros(g.vertex_count)
            want[x1] = 1 / np.sqrt(g.degree(x1))
            assert np.abs(chi.theta[x] - want).max() < 1e-14


def test_two_vertices_chi_equals_theta():
    g = path_graph(2)
    chi = chi_vectors(g, haar_family(g, 3))
    assert np.abs(chi.theta_norms - 1).max() < 1e-14
    assert np.abs(chi.chi - chi.theta).max() < 1e-14


def test_chi_rejects_bad_omega(t3):
    with pytest.raises(NonUnitOmega):
        chi_vectors(t3, haar_family(t3, 0), [np.ones(1), np.array([1.0, 1.0]), np.ones(1)])


def test_kraus_completeness_and_action(rng):
    for k, g in enumerate(random_graphs(6, seed=44)):
        chi = chi_vectors(g, haar_family(g, k), random_omega(g, rng))
        ch = induced_channel(chi)
        assert ch.trace_defect() < 1e-12
        for x in g.vertices:
            e = np.zeros((g.vertex_count, g.vertex_count))
            e[x, x] = 1
            assert np.abs(ch(e) - np.outer(chi.chi[x], chi.chi[x].conj())).max() < 1e-15


def test_induced_choi_psd(rng):
    g = random_connected_graph(12, rng)
    ch = induced_channel(chi_vectors(g, haar_family(g, 2)))
    assert np.linalg.eigvalsh(ch.choi()).min() > -1e-8


@pytest.mark.parametrize("fam", ["hadamard", "dft"])
def test_induced_not_unital(fam, t3):
    f = hadamard_center_family(t3) if fam == "hadamard" else dft_family(t3)
    ch = induced_channel(chi_vectors(t3, f))
    assert np.abs(ch(np.eye(3)) - np.eye(3)).max() > 0.1


def test_theta_operation_adjoint_on_identity(rng):
    for k, g in enumerate(random_graphs(5, seed=45)):
        chi = chi_vectors(g, haar_family(g, k), random_omega(g, rng))
        op = theta_operation(chi)
        dual = sum(K.conj().T @ K for K in op.kraus)
        assert np.abs(dual - np.diag(chi.theta_norms**2)).max() < 1e-14
        assert np.linalg.eigvalsh(np.eye(g.vertex_count) - dual).min() > -1e-12


def test_completed_theta_channel_is_cptp(rng):
    g = star_graph(4)
    ch = completed_theta_channel(chi_vectors(g, haar_family(g, 7), random_omega(g, rng)))
    assert ch.trace_defect() < 1e-12
    assert np.linalg.eigvalsh(ch.choi()).min() > -1e-10


def test_stochastic_matrix_shape(rng):
    for k, g in enumerate(random_graphs(8, seed=46)):
        P = vertex_stochastic(chi_vectors(g, haar_family(g, k), random_omega(g, rng)))
        assert np.abs(P.sum(axis=1) - 1).max() < 1e-12
        allowed = g.adjacency_matrix().astype(bool) | np.eye(g.vertex_count, dtype=bool)
        assert P[~allowed].max(initial=0) == 0


@pytest.mark.parametrize("alpha", [0.0, 0.4, -1.3, 2.0, np.pi])
def test_grover_stochastic_matrix(alpha):
    for g in random_graphs(6, seed=47):
        P = vertex_stochastic(chi_vectors(g, grover_alpha(g, alpha)))
        assert np.abs(P - grover_induced_stochastic(g)).max() < 1e-14
        assert np.abs(P - P.T).max() < 1e-14
        assert np.abs(P.sum(axis=0) - 1).max() < 1e-12


def test_dft_stochastic_matrix():
    for g in random_graphs(6, seed=48):
        P = vertex_stochastic(chi_vectors(g, dft_family(g)))
        for x in g.vertices:
            x1 = g.neighbors(x)[0]
            assert abs(P[x, x1] - 1 / g.degree(x1)) < 1e-14
            assert abs(P[x, x] - (1 - 1 / g.degree(x1))) < 1e-14


def test_one_step_closed_form(rng):
    g = cycle_graph(4)
    chi = chi_vectors(g, haar_family(g, 1))
    rho = random_state(4, rng)
    want = sum(rho[x, x].real * np.outer(chi.chi[x], chi.chi[x].conj()) for x in range(4))
    assert np.abs(evolve_induced(chi, rho, 1).state - want).max() < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_closed_form_matches_kraus(seed, n):
    rng = np.random.default_rng(seed)
    g = random_connected_graph(int(rng.integers(2, 8)), rng)
    chi = chi_vectors(g, haar_family(g, seed), random_omega(g, rng), rng.uniform(-3, 3, g.vertex_count))
    rho = random_state(g.vertex_count, rng)
    assert np.abs(evolve_induced(chi, rho, n).state - evolve_induced_kraus(chi, rho, n)).max() < 1e-10


def test_quantum_classical_consistency(rng):
    for k, g in enumerate(random_graphs(5, seed=49)):
        chi = chi_vectors(g, haar_family(g, k), random_omega(g, rng))
        rho = random_state(g.vertex_count, rng)
        ev = evolve_induced(chi, rho, 20)
        assert np.abs(ev.Q.sum(axis=1) - 1).max() < 1e-12
        ch = induced_channel(chi)
        r = rho
        for n in range(1, 21):
            r = ch(r)
            assert np.abs(np.real(np.diag(r)) - ev.Q[n]).max() < 1e-12


def test_beta_covariance(rng):
    g = star_graph(3)
    f = haar_family(g, 5)
    omega = random_omega(g, rng)
    beta = rng.uniform(-3, 3, 4)
    a, b = chi_vectors(g, f, omega), chi_vectors(g, f, omega, beta)
    assert np.abs(vertex_stochastic(a) - vertex_stochastic(b)).max() < 1e-15
    rho = random_state(4, rng)
    assert np.abs(evolve_induced(a, rho, 6).Q - evolve_induced(b, rho, 6).Q).max() < 1e-14
    # the limit states differ by the phase on the diagonal component of each χ
    la = induced_asymptotics(a).limit_state(rho)
    lb = induced_asymptotics(b).limit_state(rho)
    assert np.abs(np.diag(la) - np.diag(lb)).max() < 1e-14


def test_evolve_rejects_bad_state(t3):
    with pytest.raises(BadState):
        evolve_induced(chi_vectors(t3, dft_family(t3)), np.eye(3), 2)


@pytest.mark.parametrize("alpha", [0.0, 1.0, np.pi])
def test_grover_uniform_limit(alpha, rng):
    for g in random_graphs(5, seed=50):
        asy = induced_asymptotics(chi_vectors(g, grover_alpha(g, alpha)))
        rho = random_state(g.vertex_count, rng)
        assert np.abs(asy.vertex_limit(rho) - 1 / g.vertex_count).max() < 1e-10


def test_grover_modes():
    assert induced_asymptotics(chi_vectors(cycle_graph(5), grover_alpha(cycle_graph(5), 1.0))).mode == "exponential"
    g = path_graph(2)
    asy = induced_asymptotics(chi_vectors(g, grover_alpha(g, 1.0)))
    assert asy.mode == "cesaro" and asy.gap is None


def test_exponential_mode_limit(rng):
    g = cycle_graph(5)
    chi = chi_vectors(g, haar_family(g, 2), random_omega(g, rng))
    asy = induced_asymptotics(chi)
    assert asy.mode == "exponential" and asy.gap > 0
    rho = random_state(5, rng)
    far = evolve_induced(chi, rho, 400).state
    assert np.abs(far - asy.limit_state(rho)).max() < 1e-10


def test_dft_connected_sigma():
    for g in random_graphs(6, seed=51):
        rep = dft_induced_analysis(g)
        if len(rep.sigma.components) != 1:
            continue
        pi = rep.stationary[0]
        off = [x for x in g.vertices if x not in rep.sigma.on_cycle]
        assert np.all(pi[off] == 0)
        assert abs(pi.sum() - 1) < 1e-14
        assert np.abs(pi @ rep.P - pi).max() < 1e-12


def test_dft_stationary_matches_perron(rng):
    count = 0
    while count < 50:
        g = random_connected_graph(int(rng.integers(2, 10)), rng)
        rep = dft_induced_analysis(g, _shuffled_order(g, rng))
        pr = perron_analysis(rep.P)
        assert len(pr.stationary) == len(rep.stationary)
        got = sorted(rep.stationary, key=lambda p: int(np.argmax(p > 0)))
        want = sorted(pr.stationary, key=lambda p: int(np.argmax(p > 0)))
        for a, b in zip(got, want):
            assert np.abs(a - b).max() < 1e-10
        count += 1


def _two_triangles():
    g = build_graph([(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)], 6)
    order = [[1, 2], [2, 0], [0, 1, 3], [4, 2, 5], [5, 3], [3, 4]]
    return g, order


def test_dft_multiple_components(rng):
    g, order = _two_triangles()
    rho = random_state(6, rng)
    rep = dft_induced_analysis(g, order, rho)
    assert len(rep.sigma.components) == 2
    assert nullity(rep.P - np.eye(6)) == 2
    assert abs(rep.component_weights.sum() - 1) < 1e-14
    mean = np.mean([np.real(np.diag(rho)) @ np.linalg.matrix_power(rep.P, k) for k in range(2000, 2200)], axis=0)
    assert np.abs(mean - rep.vertex_limit).max() < 1e-10
    asy = induced_asymptotics(chi_vectors(rep.graph, dft_family(rep.graph)))
    assert asy.mode == "decomposed"
    assert np.abs(asy.vertex_limit(rho) - rep.vertex_limit).max() < 1e-10


def test_dft_stationary_formula_on_cycle():
    g = star_graph(3)
    sigma = functional_graph(g, [1, 0, 0, 0])
    (pi,) = dft_stationary(g, sigma)
    # cycle {0, 1}: π_0 ∝ d_1 = 1, π_1 ∝ d_0 = 3
    assert np.abs(pi - [0.25, 0.75, 0, 0]).max() < 1e-15


def test_absorption_and_cesaro_projector():
    P = np.array([[1, 0, 0], [0.25, 0.5, 0.25], [0, 0, 1.0]])
    rep = perron_analysis(P)
    h = absorption_probabilities(P, rep.recurrent)
    assert np.abs(h[1] - [0.5, 0.5]).max() < 1e-15
    C = cesaro_projector(P)
    assert np.abs(C - np.linalg.matrix_power(P, 200)).max() < 1e-12


def test_halfline_rows():
    P, verts = halfline_matrix(8)
    at = lambda x: int(x + 8)  # noqa: E731
    assert np.abs(P.sum(axis=1) - 1).max() < 1e-15
    printed = {
        (-2, -2): 0.5, (-2, -1): 0.5,
        (-1, -1): 2 / 3, (-1, 0): 1 / 3,
        (0, 0): 2 / 3, (0, 1): 1 / 3,
        (1, 0): 1 / 3, (1, 1): 2 / 3,
        (2, 1): 1 / 3, (2, 2): 2 / 3,
        (3, 2): 0.5, (3, 3): 0.5,
    }
    for x in range(-2, 4):
        row = np.zeros(P.shape[0])
        for (a, b), v in printed.items():
            if a == x:
                row[at(b)] = v
        assert np.abs(P[at(x)] - row).max() < 1e-15
    assert np.abs(P[np.ix_([at(0), at(1)], [at(0), at(1)])] - np.array([[2, 1], [1, 2]]) / 3).max() < 1e-15


def test_halfline_checks():
    rep = halfline_example(30, 27)
    assert rep.diag_errors["P22"] < 1e-15 and rep.diag_errors["P-1-1"] < 1e-15
    assert rep.crossing_max == 0
    pi = np.zeros(rep.vertices.size)
    pi[rep.index(0)] = pi[rep.index(1)] = 0.5
    assert np.abs(rep.stationary - pi).max() < 1e-10
    assert rep.gamma > 0.05


def test_halfline_window_too_small():
    with pytest.raises(WindowTooSmall):
        halfline_matrix(5)
