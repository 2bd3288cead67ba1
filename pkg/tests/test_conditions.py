import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etconsensus.conditions import (
    assemble_and_crosscheck,
    check_additive,
    check_dac_consensus,
    check_dac_performance,
    check_nominal,
    check_topology,
    default_grid,
    gain_profiles,
    mu_upper_bound_2block,
    mu_upper_bound_3block,
    robustness_gamma,
)
from etconsensus.graph import DEMO_GRAPH, laplacian, spectrum

# independent determinant-bisection roots (see test_graph.py)
LAM2 = 0.8383729814496361
LAMN = 5.4754135777027155
EIGS = [0.0, LAM2, 1.4892098750070208, 2.549502097051863, 4.647501468788766, LAMN]


def test_nominal():
    r = check_nominal(0.02, LAMN)
    assert r.lhs == pytest.approx(0.219, abs=5e-4) and r.rhs == 1.0 and r.satisfied
    assert check_nominal(0.0, LAMN).satisfied
    boundary = check_nominal(0.125, 4.0)
    assert boundary.lhs == 1.0 and not boundary.satisfied


def test_additive_reference_values():
    ok = check_additive(0.02, 0.2, 0.4654, LAMN)
    assert ok.inputs["gamma"] == pytest.approx(0.4680, abs=5e-4)
    assert ok.lhs == pytest.approx(0.981, abs=5e-3)
    assert ok.satisfied
    bad = check_additive(0.02, 1.2, 0.4654, LAMN)
    assert bad.lhs == pytest.approx(3.54, abs=0.02)
    assert not bad.satisfied
    # hand arithmetic to 1e-12
    g = max(0.4654, math.sqrt(2 * 0.02 * LAMN))
    assert ok.lhs == pytest.approx((0.2 * LAMN + 1) * g, rel=1e-12)


def test_additive_vanishing_gamma():
    for beta in (0.1, 10.0, 1e4):
        assert check_additive(1e-12, beta, 0.0, LAMN).satisfied


def test_topology():
    r = check_topology(0.002, 0.1315, LAM2, LAMN)
    assert r.lhs == pytest.approx(0.1480, abs=5e-4)
    expected_rhs = LAM2 / math.hypot(LAM2, LAMN)
    assert r.rhs == pytest.approx(expected_rhs, rel=1e-12)
    assert r.satisfied == (r.lhs < expected_rhs)
    assert check_topology(1e-6, 0.1, 3.0, 3.0).rhs == pytest.approx(1 / math.sqrt(2), rel=1e-14)
    with pytest.raises(ValueError):
        check_topology(0.002, 0.1, 5.0, 1.0)


@settings(max_examples=50)
@given(st.floats(0.01, 10), st.floats(0.0, 1.0), st.floats(0.7072, 3.0))
def test_topology_large_delta_never_satisfied(lam2, frac, delta):
    lamN = lam2 + frac * 10
    assert not check_topology(1e-6, delta, lam2, lamN).satisfied


def test_dac_consensus():
    r = check_dac_consensus(0.02, 1.2, 0.25, 0.4654, LAMN)
    assert r.lhs == pytest.approx(1.2409, abs=1e-4)
    assert r.rhs == pytest.approx(1 / robustness_gamma(0.4654, 0.02, LAMN), rel=1e-14)
    assert check_dac_consensus(1e-9, 1.0, 1e-12, 0.0, LAMN).lhs == pytest.approx(1.0, abs=1e-11)
    assert not check_dac_consensus(0.02, 1.0, 1e-12, 1.0, LAMN).satisfied


def test_dac_performance():
    theta, beta = 0.25, 1.2
    r = check_dac_performance(0.02, beta, theta, 0.4654, LAM2, LAMN)
    c = theta * beta * LAMN / (theta + beta * LAMN)
    hand = (theta / (beta * LAM2) + 1) ** 2 + (c + 1) ** 2 + 2 * c + 2 / (beta * LAM2)
    assert r.lhs == pytest.approx(hand, rel=1e-12)
    assert r.rhs == pytest.approx(1 / 0.46799 ** 2, rel=1e-3)
    limit = check_dac_performance(1e-9, 1e8, 1e-9, 0.0, LAM2, LAMN)
    assert limit.lhs == pytest.approx(2.0, abs=1e-6)
    assert not check_dac_performance(0.02, beta, theta, 1.0, LAM2, LAMN).satisfied


def test_mu_bounds():
    assert mu_upper_bound_2block(0, 0, 0, 0) == 0
    assert mu_upper_bound_2block(1, 0, 0, 1) == pytest.approx(math.sqrt(2))
    assert mu_upper_bound_2block(0.5, 0.3, 0.2, 0.4) == pytest.approx(math.sqrt(0.53), rel=1e-14)
    assert mu_upper_bound_3block(np.eye(3)) == pytest.approx(math.sqrt(3))
    assert mu_upper_bound_3block(np.zeros((3, 3))) == 0


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100), min_size=9, max_size=9))
def test_mu_3block_brute_force(vals):
    g = np.array(vals).reshape(3, 3)
    total = 0.0
    for i in range(3):
        for j in range(3):
            # diagonal terms once, each off-diagonal product appears twice in the sum over (i,j)
            total += g[i, j] * g[j, i]
    assert mu_upper_bound_3block(g) == pytest.approx(math.sqrt(total), rel=1e-12, abs=1e-300)


def test_default_grid():
    w = default_grid()
    assert w[0] == 0 and len(w) == 401
    assert w[1] == pytest.approx(1e-4) and w[-1] == pytest.approx(1e4)


def test_additive_profile_limits():
    beta = 0.2
    p0 = gain_profiles("additive", beta, None, LAM2, LAMN, omegas=[0.0])
    for k in ("G11", "G12", "G21", "G22"):
        assert p0.blocks[k][0] == 0
    hi = gain_profiles("additive", beta, None, LAM2, LAMN, omegas=[1e8])
    assert hi.blocks["G11"][0] == pytest.approx(beta * LAMN, rel=1e-12)
    assert hi.blocks["G12"][0] == pytest.approx(beta * LAMN, rel=1e-12)
    assert hi.blocks["G22"][0] == pytest.approx(1.0, rel=1e-12)
    assert hi.mu[0] == pytest.approx(beta * LAMN + 1, rel=1e-12)
    full = gain_profiles("additive", beta, None, LAM2, LAMN)
    assert full.sup_mu <= beta * LAMN + 1 + 1e-12
    assert full.sup_mu == pytest.approx(beta * LAMN + 1, rel=1e-6)


def test_additive_profile_monotone_in_frequency():
    w = np.sort(np.random.default_rng(0).uniform(0, 100, 500))
    p = gain_profiles("additive", 0.2, None, LAM2, LAMN, omegas=w)
    assert np.all(np.diff(p.blocks["G11"]) >= 0)
    assert np.all(np.diff(p.blocks["G22"]) >= 0)


@pytest.mark.parametrize("family, beta, theta", [("additive", 0.2, None), ("topology", 0.08, None),
                                                 ("dac", 1.2, 0.25)])
def test_closed_forms_respect_upper_bounds(family, beta, theta):
    p = gain_profiles(family, beta, theta, LAM2, LAMN, eigenvalues=EIGS)
    for name, bound in p.bounds.items():
        assert np.all(p.blocks[name] <= bound * (1 + 1e-12) + 1e-15), name


def test_dac_g13_bound():
    theta, beta = 0.25, 1.2
    p = gain_profiles("dac", beta, theta, LAM2, LAMN)
    c = theta * beta * LAMN / (theta + beta * LAMN)
    assert np.all(p.blocks["G13"] <= c + 1e-15)
    assert p.sup_mu_consensus <= p.sup_mu


def test_topology_g21_closed_form_against_modes():
    w = np.logspace(-3, 3, 50)
    beta = 0.08
    p = gain_profiles("topology", beta, None, LAM2, LAMN, omegas=w, eigenvalues=EIGS)
    lam = np.array(EIGS[1:])
    ref = np.sqrt(np.max(beta ** 2 * lam[None, :] / (w[:, None] ** 2 + beta ** 2 * lam[None, :] ** 2), axis=1))
    np.testing.assert_allclose(p.blocks["G21"], ref, rtol=1e-14)


def test_eigenvalue_oracle_matches_graph():
    np.testing.assert_allclose(spectrum(laplacian(DEMO_GRAPH)).eigenvalues, EIGS, atol=1e-12)


@pytest.mark.parametrize("family, beta, theta", [("additive", 0.2, None), ("topology", 0.08, None),
                                                 ("dac", 1.2, 0.25)])
def test_assembled_loop_matches_closed_forms(family, beta, theta):
    dev, per_block = assemble_and_crosscheck(family, DEMO_GRAPH, beta, theta)
    assert dev < 1e-8, per_block


def test_unknown_family():
    with pytest.raises(ValueError):
        gain_profiles("bogus", 0.2, None, LAM2, LAMN)
    with pytest.raises(ValueError):
        gain_profiles("dac", 0.2, None, LAM2, LAMN)


def test_report_serialisation():
    d = check_additive(0.02, 0.2, 0.4654, LAMN).to_dict()
    assert d["satisfied"] is True and set(d) == {"name", "lhs", "rhs", "satisfied", "inputs"}
