import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etconsensus.errors import GraphError, NotSymmetric
from etconsensus.graph import (
    DEMO_GRAPH,
    DEMO_LAPLACIAN,
    WeightedGraph,
    consensus_projector,
    incidence_factorization,
    laplacian,
    spectrum,
)

# Roots of det(L - lambda I) for the six-agent Laplacian, located by bracketing
# on a 1e-3 grid and bisecting the LU determinant (no symmetric eigensolver).
CHARPOLY_ROOTS = [0.0, 0.8383729814496361, 1.4892098750070208, 2.549502097051863,
                  4.647501468788766, 5.4754135777027155]


def test_single_edge_laplacian():
    g = WeightedGraph(2, [(0, 1, 1.0)])
    np.testing.assert_array_equal(laplacian(g), [[1, -1], [-1, 1]])
    D, W = incidence_factorization(g)
    np.testing.assert_array_equal(D, [[1], [-1]])
    np.testing.assert_array_equal(W, [[1]])


def test_triangle_k3():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)])
    np.testing.assert_array_equal(laplacian(g), 3 * np.eye(3) - np.ones((3, 3)))


def test_weighted_triangle_factorization():
    g = WeightedGraph(3, [(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0)])
    D, W = incidence_factorization(g)
    # brute-force sum of weighted rank-one edge terms
    expected = np.zeros((3, 3))
    for i, j, w in g.edges:
        v = np.zeros(3)
        v[i], v[j] = 1, -1
        expected += w * np.outer(v, v)
    np.testing.assert_allclose(D @ W @ D.T, expected, atol=1e-12)
    for col in D.T:
        assert sorted(col) == [-1, 0, 1]
        assert col[np.flatnonzero(col)[0]] == 1  # +1 sits at the smaller index


def test_six_agent_laplacian_matches_reference_matrix():
    L = laplacian(DEMO_GRAPH)
    np.testing.assert_array_equal(L, DEMO_LAPLACIAN)
    np.testing.assert_array_equal(L[0], [3.5, -1, -2, 0, -0.5, 0])
    D, W = incidence_factorization(DEMO_GRAPH)
    np.testing.assert_allclose(D @ W @ D.T, DEMO_LAPLACIAN, atol=1e-12)


def test_spectrum_against_determinant_roots():
    sp = spectrum(DEMO_LAPLACIAN)
    np.testing.assert_allclose(sp.eigenvalues, CHARPOLY_ROOTS, rtol=1e-10, atol=1e-12)
    assert sp.lambda2 == pytest.approx(0.8383729814496361, rel=1e-10)
    assert sp.lambdaN == pytest.approx(5.4754135777027155, rel=1e-10)
    assert sp.eigenratio == pytest.approx(sp.lambdaN / sp.lambda2)


def test_path_graph_spectrum():
    sp = spectrum(laplacian(WeightedGraph(2, [(0, 1, 1.0)])))
    np.testing.assert_allclose(sp.eigenvalues, [0.0, 2.0], atol=1e-14)


def test_modal_identities_six_agents():
    sp = spectrum(DEMO_LAPLACIAN)
    U, Y = sp.modal_basis, sp.reduced_basis
    np.testing.assert_allclose(U.T @ DEMO_LAPLACIAN @ U, np.diag(sp.eigenvalues), atol=1e-8)
    np.testing.assert_allclose(Y.T @ Y, np.eye(5), atol=1e-8)
    np.testing.assert_allclose(Y @ Y.T, consensus_projector(6), atol=1e-8)
    np.testing.assert_allclose(np.abs(U[:, 0]), np.full(6, 1 / np.sqrt(6)), atol=1e-12)


def test_sign_convention_is_deterministic():
    U = spectrum(DEMO_LAPLACIAN).modal_basis
    for col in U.T:
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0


def test_nonsymmetric_rejected():
    L = DEMO_LAPLACIAN.copy()
    L[0, 1] += 1e-6
    with pytest.raises(NotSymmetric):
        spectrum(L)


@pytest.mark.parametrize(
    "n, edges",
    [
        (3, [(0, 0, 1.0), (0, 1, 1.0), (1, 2, 1.0)]),  # self loop
        (3, [(0, 1, 1.0), (1, 0, 2.0), (1, 2, 1.0)]),  # duplicate pair
        (3, [(0, 1, 0.0), (1, 2, 1.0)]),  # zero weight
        (3, [(0, 1, -1.0), (1, 2, 1.0)]),  # negative weight
        (4, [(0, 1, 1.0), (2, 3, 1.0)]),  # disconnected
        (3, [(0, 3, 1.0), (1, 2, 1.0)]),  # index out of range
    ],
)
def test_invalid_graphs(n, edges):
    with pytest.raises(GraphError):
        WeightedGraph(n, edges)


def test_from_laplacian_roundtrip():
    g = WeightedGraph.from_laplacian(DEMO_LAPLACIAN)
    np.testing.assert_array_equal(laplacian(g), DEMO_LAPLACIAN)


@st.composite
def connected_graphs(draw, max_nodes=50):
    n = draw(st.integers(2, max_nodes))
    weights = st.floats(0.05, 10.0, allow_nan=False)
    edges = {}
    # random spanning tree keeps the graph connected
    for v in range(1, n):
        u = draw(st.integers(0, v - 1))
        edges[(u, v)] = draw(weights)
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    for i, j in extra:
        if i != j:
            edges[(min(i, j), max(i, j))] = draw(weights)
    return WeightedGraph(n, [(i, j, w) for (i, j), w in edges.items()])


@settings(max_examples=40, deadline=None)
@given(connected_graphs())
def test_random_graph_properties(g):
    L = laplacian(g)
    n = g.node_count
    assert np.trace(L) == pytest.approx(2 * sum(w for _, _, w in g.edges))
    np.testing.assert_allclose(L @ np.ones(n), 0, atol=1e-12)
    D, W = incidence_factorization(g)
    np.testing.assert_allclose(D @ W @ D.T, L, atol=1e-12)
    sp = spectrum(L)
    assert abs(sp.eigenvalues[0]) <= 1e-9
    assert sp.lambda2 > 1e-9
    Y = sp.reduced_basis
    np.testing.assert_allclose(Y.T @ Y, np.eye(n - 1), atol=1e-8)
    np.testing.assert_allclose(Y @ Y.T, consensus_projector(n), atol=1e-8)
