import numpy as np
import pytest

from etconsensus.dynamics import dynamics_additive, dynamics_dac, dynamics_nominal, dynamics_topology
from etconsensus.engine import AffineModel, ReferenceSignal, ReferenceTerm, Scenario, Variant
from etconsensus.graph import DEMO_GRAPH, DEMO_LAPLACIAN, WeightedGraph, incidence_factorization, laplacian
from etconsensus.kernel import CythonKernel
from etconsensus.lti import DEMO_AGENT_BLOCKS, StateSpaceSystem, random_norm_bounded
from etconsensus.triggering import TriggerParams

BACKENDS = ["python"] + (["cython"] if CythonKernel is not None else [])
P2 = laplacian(WeightedGraph(2, [(0, 1, 1.0)]))
TRIG = TriggerParams(0.02, 0.1, 5.0)


def test_nominal_examples():
    np.testing.assert_array_equal(dynamics_nominal(np.zeros(6), np.full(6, 3.0), 0.2, DEMO_LAPLACIAN), 0)
    np.testing.assert_array_equal(dynamics_nominal([0, 0], [1.0, 0.0], 1.0, P2), [-1, 1])
    e1 = np.eye(6)[0]
    np.testing.assert_allclose(dynamics_nominal(e1, e1, 0.2, DEMO_LAPLACIAN), -0.2 * DEMO_LAPLACIAN[:, 0])


def test_nominal_equals_error_form():
    rng = np.random.default_rng(0)
    x, e = rng.normal(size=6), rng.normal(size=6)
    L = DEMO_LAPLACIAN
    np.testing.assert_allclose(dynamics_nominal(x, x + e, 0.2, L), -0.2 * L @ x - 0.2 * L @ e, atol=1e-14)


def test_additive_zero_and_static_zero_blocks():
    blocks = [StateSpaceSystem.static([[0.0]])] * 6
    states = [np.zeros(0)] * 6
    xdot, derivs, d, y, u = dynamics_additive(np.zeros(6), np.zeros(6), states, 0.2, DEMO_LAPLACIAN, blocks)
    assert not np.any(xdot) and not np.any(d)
    rng = np.random.default_rng(1)
    x, yhat = rng.normal(size=6), rng.normal(size=6)
    xdot, _, d, y, _ = dynamics_additive(x, yhat, states, 0.2, DEMO_LAPLACIAN, blocks)
    np.testing.assert_allclose(xdot, dynamics_nominal(x, yhat, 0.2, DEMO_LAPLACIAN))
    np.testing.assert_array_equal(y, x)


def test_additive_static_gain_pair():
    blocks = [StateSpaceSystem.static([[0.1]])] * 2
    x, yhat = np.array([0.3, -0.7]), np.array([1.0, 0.0])
    xdot, _, d, y, u = dynamics_additive(x, yhat, [np.zeros(0)] * 2, 1.0, P2, blocks)
    # by hand: u = -L yhat = (-1, 1); d = 0.1 u; y = x + d
    np.testing.assert_allclose(u, [-1, 1])
    np.testing.assert_allclose(xdot, [-1, 1])
    np.testing.assert_allclose(d, [-0.1, 0.1])
    np.testing.assert_allclose(y, [0.2, -0.6])


def test_topology_examples():
    D, W = incidence_factorization(DEMO_GRAPH)
    zero_edges = [StateSpaceSystem.static([[0.0]])] * DEMO_GRAPH.edge_count
    rng = np.random.default_rng(2)
    xhat = rng.normal(size=6)
    xdot, _ = dynamics_topology(xhat, [np.zeros(0)] * 7, 0.2, D, W, zero_edges)
    np.testing.assert_allclose(xdot, dynamics_nominal(xhat, xhat, 0.2, DEMO_LAPLACIAN), atol=1e-14)
    xdot, _ = dynamics_topology(np.full(6, 2.5), [np.zeros(0)] * 7, 0.2, D, W, zero_edges)
    np.testing.assert_allclose(xdot, 0, atol=1e-14)
    D2, W2 = incidence_factorization(WeightedGraph(2, [(0, 1, 1.0)]))
    delta0 = 0.13
    xdot, _ = dynamics_topology([1.0, -0.5], [np.zeros(0)], 0.4, D2, W2, [StateSpaceSystem.static([[delta0]])])
    np.testing.assert_allclose(xdot, -0.4 * (1 + delta0) * P2 @ [1.0, -0.5])


def test_dac_fixed_point_on_consensus():
    blocks = [StateSpaceSystem.static([[0.0]])] * 6
    x = w = what = yhat = np.full(6, 1.5)
    out = dynamics_dac(x, w, what, yhat, [np.zeros(0)] * 6, np.zeros(6), np.zeros(6), 1.2, 0.25,
                       DEMO_LAPLACIAN, blocks)
    np.testing.assert_allclose(out["u"], 0, atol=1e-14)
    np.testing.assert_allclose(out["xdot"], 0, atol=1e-14)
    np.testing.assert_allclose(out["wdot"], 0, atol=1e-14)


def _random_holders(model, rng):
    N = model.N
    return rng.normal(size=N), rng.normal(size=N), rng.uniform(0, 0.4, size=N)


def _scenario(variant):
    common = dict(graph=DEMO_GRAPH, trigger=TRIG, x0=np.arange(6.0), horizon=1.0)
    if variant is Variant.NOMINAL:
        return Scenario(Variant.NOMINAL, beta=0.2, **common)
    if variant is Variant.ADDITIVE:
        return Scenario(Variant.ADDITIVE, beta=0.2, agent_uncertainties=DEMO_AGENT_BLOCKS, **common)
    if variant is Variant.TOPOLOGY:
        edges = [random_norm_bounded(50 + k, 1 + k % 3, 0.1315) for k in range(7)]
        return Scenario(Variant.TOPOLOGY, beta=0.08, edge_uncertainties=edges, **common)
    refs = [ReferenceSignal((ReferenceTerm(1.0 + i, "sin" if i % 2 else "cos", 0.1 * (i + 1), 0.3 * i, 0.01 * i),))
            for i in range(6)]
    return Scenario(Variant.DAC, beta=1.2, theta=0.25, agent_uncertainties=DEMO_AGENT_BLOCKS,
                    references=refs, **common)


def _split_blocks(vec, blocks):
    out, off = [], 0
    for b in blocks:
        out.append(vec[off:off + b.order])
        off += b.order
    return out


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("variant", list(Variant))
def test_assembled_derivative_matches_reference_formulas(variant, backend):
    sc = _scenario(variant)
    model = AffineModel(sc)
    kern = model.build_kernel(backend)
    rng = np.random.default_rng(list(Variant).index(variant))
    L = laplacian(sc.graph)
    N = 6
    for trial in range(5):
        s = rng.normal(size=model.n_states)
        hv, hy, ht = _random_holders(model, rng)
        t = 0.4 + rng.uniform(0, 3)
        got = kern.deriv(t, s, hv, hy, ht)
        if variant is Variant.NOMINAL:
            want = dynamics_nominal(s, hv, sc.beta, L)
        elif variant is Variant.ADDITIVE:
            x, xi = s[:N], s[N:]
            xdot, derivs, d, y, u = dynamics_additive(x, hv, _split_blocks(xi, sc.agent_uncertainties),
                                                      sc.beta, L, sc.agent_uncertainties)
            want = np.concatenate([xdot] + derivs)
            # sampling error is yhat - y
            np.testing.assert_allclose(kern.errors(s, t, hv, hy, ht), hv - y, atol=1e-12)
        elif variant is Variant.TOPOLOGY:
            D, W = incidence_factorization(sc.graph)
            x, eta = s[:N], s[N:]
            xdot, derivs = dynamics_topology(hv, _split_blocks(eta, sc.edge_uncertainties), sc.beta, D, W,
                                             sc.edge_uncertainties)
            want = np.concatenate([xdot] + derivs)
            np.testing.assert_allclose(kern.errors(s, t, hv, hy, ht), hv - x, atol=1e-12)
        else:
            x, w, xi = s[:N], s[N:2 * N], s[2 * N:]
            what = np.exp(-sc.theta * (t - ht)) * hv + (1 - np.exp(-sc.theta * (t - ht))) * hy
            r = np.array([ref.value(t) for ref in sc.references])
            rdot = np.array([ref.derivative(t) for ref in sc.references])
            out = dynamics_dac(x, w, what, hy, _split_blocks(xi, sc.agent_uncertainties), r, rdot,
                               sc.beta, sc.theta, L, sc.agent_uncertainties)
            want = np.concatenate([out["xdot"], out["wdot"]] + out["block_derivatives"])
            np.testing.assert_allclose(kern.errors(s, t, hv, hy, ht), what - w, atol=1e-12)
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)


def test_reference_derivative_by_finite_difference():
    sc = _scenario(Variant.DAC)
    for ref in sc.references:
        for t in (0.0, 1.3, 17.0):
            h = 1e-6
            fd = (ref.value(t + h) - ref.value(t - h)) / (2 * h)
            assert ref.derivative(t) == pytest.approx(fd, abs=1e-7)


def test_reference_rejects_growth_and_bad_kind():
    with pytest.raises(ValueError):
        ReferenceTerm(1.0, "sin", 1.0, decay=-0.1)
    with pytest.raises(ValueError):
        ReferenceTerm(1.0, "tan", 1.0)
