"""Sufficient robustness conditions and the frequency-gain profiles behind them.

Every ``check_*`` function returns a :class:`ConditionReport` whose
``satisfied`` flag is the strict inequality ``lhs < rhs``.

Gain-profile families
---------------------
``"additive"``
    two-block loop of the output-feedback protocol with additive agent
    uncertainty (inputs ``[d; eps]``, outputs ``[u; w]``).
``"topology"``
    two-block loop of the protocol with perturbed edge weights (inputs
    ``[v; e]``, outputs ``[w; z]``).
``"dac"``
    three-block loop of the dynamic average consensus protocol (inputs
    ``[d; eps; r]``, outputs ``[u; z; e]``); the upper-left 2x2 part gives
    the consensus condition, the full matrix the tracking-performance one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph, consensus_projector, incidence_factorization, laplacian, spectrum
from .lti import _golden_max

FAMILIES = ("additive", "topology", "dac")


@dataclass(frozen=True)
class ConditionReport:
    name: str
    lhs: float
    rhs: float
    inputs: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return bool(self.lhs < self.rhs)

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "satisfied": self.satisfied,
                "inputs": dict(self.inputs)}


def robustness_gamma(eta, alpha, lambdaN):
    """``max(eta, sqrt(2 alpha lambdaN))``: combined gain of the uncertainty and sampling operators."""
    return max(float(eta), math.sqrt(2.0 * alpha * lambdaN))


def check_nominal(alpha, lambdaN) -> ConditionReport:
    return ConditionReport("nominal", 2.0 * alpha * lambdaN, 1.0,
                           {"alpha": alpha, "lambdaN": lambdaN})


def check_additive(alpha, beta, eta, lambdaN) -> ConditionReport:
    g = robustness_gamma(eta, alpha, lambdaN)
    return ConditionReport("additive", (beta * lambdaN + 1.0) * g, 1.0,
                           {"alpha": alpha, "beta": beta, "eta": eta, "lambdaN": lambdaN, "gamma": g})


def check_topology(alpha, delta, lambda2, lambdaN) -> ConditionReport:
    if lambda2 > lambdaN:
        raise ValueError("lambda2 must not exceed lambdaN")
    g = robustness_gamma(delta, alpha, lambdaN)
    rhs = math.sqrt(lambda2 ** 2 / (lambda2 ** 2 + lambdaN ** 2))
    return ConditionReport("topology", g, rhs,
                           {"alpha": alpha, "delta": delta, "lambda2": lambda2, "lambdaN": lambdaN, "gamma": g})


def _dac_coupling(theta, beta, lambdaN):
    return theta * beta * lambdaN / (theta + beta * lambdaN)


def check_dac_consensus(alpha, beta, theta, eta, lambdaN) -> ConditionReport:
    g = robustness_gamma(eta, alpha, lambdaN)
    return ConditionReport("dac_consensus", _dac_coupling(theta, beta, lambdaN) + 1.0, 1.0 / g,
                           {"alpha": alpha, "beta": beta, "theta": theta, "eta": eta,
                            "lambdaN": lambdaN, "gamma": g})


def check_dac_performance(alpha, beta, theta, eta, lambda2, lambdaN) -> ConditionReport:
    """Tracking-performance condition; satisfied means ``||T_re||_inf <= 1/gamma``."""
    g = robustness_gamma(eta, alpha, lambdaN)
    c = _dac_coupling(theta, beta, lambdaN)
    lhs = (theta / (beta * lambda2) + 1.0) ** 2 + (c + 1.0) ** 2 + 2.0 * c + 2.0 / (beta * lambda2)
    return ConditionReport("dac_performance", lhs, 1.0 / g ** 2,
                           {"alpha": alpha, "beta": beta, "theta": theta, "eta": eta,
                            "lambda2": lambda2, "lambdaN": lambdaN, "gamma": g})


def mu_upper_bound_2block(g11, g12, g21, g22):
    """Upper bound on the structured singular value of a 2x2 block-norm table."""
    return np.sqrt(np.square(g11) + np.square(g22) + 2.0 * np.multiply(g12, g21))


def mu_upper_bound_3block(g):
    """Upper bound for three diagonal uncertainty blocks.

    `g` is indexable as ``g[i][j]`` (0-based) with non-negative block norms;
    entries may be arrays over frequency.
    """
    s = 0.0
    for i in range(3):
        s = s + np.square(g[i][i])
    for i, j in ((0, 1), (0, 2), (1, 2)):
        s = s + 2.0 * np.multiply(g[i][j], g[j][i])
    return np.sqrt(s)


def default_grid(points=400, lo=1e-4, hi=1e4):
    """``points`` log-spaced frequencies over ``[lo, hi]`` rad/s, plus zero."""
    return np.concatenate([[0.0], np.logspace(math.log10(lo), math.log10(hi), points)])


@dataclass
class GainProfile:
    """Closed-form block norms over a frequency grid.

    ``blocks`` maps names like ``"G12"`` to ``||G_12(jw)||``. ``bounds`` holds
    the frequency-independent (or simpler) upper bounds used to derive the
    scalar conditions. ``mu`` is the block-norm upper bound on the structured singular value per frequency and
    ``sup_mu`` its refined supremum; for the DAC family ``mu_consensus`` and
    ``sup_mu_consensus`` cover the upper-left 2x2 part.
    """

    family: str
    omegas: np.ndarray
    blocks: dict
    bounds: dict
    mu: np.ndarray
    sup_mu: float
    mu_consensus: np.ndarray = None
    sup_mu_consensus: float = None


def _modes(lambda2, lambdaN, eigenvalues):
    if eigenvalues is None:
        return np.array([lambda2, lambdaN], dtype=float)
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    return lam[lam > 1e-9]


def _block_norms(family, beta, theta, lambda2, lambdaN, omegas, eigenvalues=None):
    """Block norms at `omegas` as maxima over the non-zero Laplacian modes.

    Without `eigenvalues` only ``lambda2`` and ``lambdaN`` are used; every
    block then equals its closed form except the topology ``G12``, which
    needs the full spectrum and otherwise falls back to its upper bound.
    """
    w = np.asarray(omegas, dtype=float)[:, None]
    lam = _modes(lambda2, lambdaN, eigenvalues)[None, :]
    w2 = w * w
    bl = beta * lam
    if family == "additive":
        g11 = np.sqrt(np.max(bl ** 2 * w2 / (w2 + bl ** 2), axis=1))
        g22 = np.sqrt(np.max(w2 / (w2 + bl ** 2), axis=1))
        return {"G11": g11, "G12": g11.copy(), "G21": g22.copy(), "G22": g22}
    if family == "topology":
        g11 = np.sqrt(np.max(bl ** 2 / (w2 + bl ** 2), axis=1))
        if eigenvalues is None:
            g12 = np.sqrt(w2[:, 0] * lambdaN / (w2[:, 0] + (beta * lambda2) ** 2))
        else:
            g12 = np.sqrt(np.max(w2 * lam / (w2 + bl ** 2), axis=1))
        g21 = np.sqrt(np.max(beta ** 2 * lam / (w2 + bl ** 2), axis=1))
        g22 = np.sqrt(np.max(w2 / (w2 + bl ** 2), axis=1))
        return {"G11": g11, "G12": g12, "G21": g21, "G22": g22}
    if family == "dac":
        if theta is None or not theta > 0:
            raise ValueError("the dac family needs a positive theta")
        th2 = theta * theta
        den = (w2 + th2) * (w2 + bl ** 2)
        g11 = np.sqrt(np.max(w2 * th2 * bl ** 2 / den, axis=1))
        g12 = np.sqrt(np.max(bl ** 2 * w2 / (w2 + bl ** 2), axis=1))
        g21 = np.sqrt(np.max(w2 * th2 / den, axis=1))
        g22 = np.sqrt(np.max(w2 / (w2 + bl ** 2), axis=1))
        g31 = np.sqrt(np.max(th2 * bl ** 2 / den, axis=1))
        g32 = np.sqrt(np.max(bl ** 2 / (w2 + bl ** 2), axis=1))
        g33 = np.sqrt(np.max((w2 * w2 + (theta + bl) ** 2 * w2) / den, axis=1))
        return {"G11": g11, "G12": g12, "G13": g11.copy(), "G21": g21, "G22": g22, "G23": g21.copy(),
                "G31": g31, "G32": g32, "G33": g33}
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _bounds(family, beta, theta, lambda2, lambdaN, omegas):
    w2 = np.asarray(omegas, dtype=float) ** 2
    b2, bN = beta * lambda2, beta * lambdaN
    if family == "additive":
        return {"G11": np.full_like(w2, bN), "G22": np.ones_like(w2)}
    if family == "topology":
        return {
            "G11": np.sqrt(bN ** 2 / (w2 + b2 ** 2)),
            "G12": np.sqrt(w2 * lambdaN / (w2 + b2 ** 2)),
            "G21": np.sqrt(beta ** 2 * lambdaN / (w2 + b2 ** 2)),
        }
    c = _dac_coupling(theta, beta, lambdaN)
    one = np.ones_like(w2)
    return {"G13": c * one, "G31": one, "G23": one, "G32": one,
            "G33": (theta / b2 + 1.0) * one}


def _mu_of(family, g):
    if family == "dac":
        mat = [[g["G11"], g["G12"], g["G13"]], [g["G21"], g["G22"], g["G23"]],
               [g["G31"], g["G32"], g["G33"]]]
        return mu_upper_bound_3block(mat)
    return mu_upper_bound_2block(g["G11"], g["G12"], g["G21"], g["G22"])


def _refined_sup(fun, omegas, values):
    k = int(np.argmax(values))
    best = float(values[k])
    lo = omegas[max(k - 1, 0)]
    hi = omegas[min(k + 1, len(omegas) - 1)]
    if hi > lo:
        _, val = _golden_max(fun, lo, hi)
        best = max(best, float(val))
    return best


def gain_profiles(family, beta, theta=None, lambda2=None, lambdaN=None, omegas=None,
                  eigenvalues=None) -> GainProfile:
    """Evaluate the closed-form block norms and the small-gain bound on a grid.

    Parameters
    ----------
    family : {"additive", "topology", "dac"}
    beta, theta : float
        Coupling gain and DAC filter rate (`theta` only for "dac").
    lambda2, lambdaN : float
        Smallest non-zero and largest Laplacian eigenvalues.
    omegas : array_like, optional
        Frequencies in rad/s; defaults to :func:`default_grid`.
    eigenvalues : array_like, optional
        Full Laplacian spectrum; when given, norms are exact maxima over all
        modes rather than the extremal-eigenvalue forms.
    """
    if omegas is None:
        omegas = default_grid()
    omegas = np.asarray(omegas, dtype=float)
    blocks = _block_norms(family, beta, theta, lambda2, lambdaN, omegas, eigenvalues)
    mu = _mu_of(family, blocks)

    def mu_at(w, consensus=False):
        g = _block_norms(family, beta, theta, lambda2, lambdaN, [w], eigenvalues)
        if consensus:
            return float(mu_upper_bound_2block(g["G11"], g["G12"], g["G21"], g["G22"])[0])
        return float(_mu_of(family, g)[0])

    prof = GainProfile(family, omegas, blocks, _bounds(family, beta, theta, lambda2, lambdaN, omegas),
                       mu, _refined_sup(mu_at, omegas, mu))
    if family == "dac":
        prof.mu_consensus = mu_upper_bound_2block(blocks["G11"], blocks["G12"], blocks["G21"], blocks["G22"])
        prof.sup_mu_consensus = _refined_sup(lambda w: mu_at(w, True), omegas, prof.mu_consensus)
    return prof


def _loop_matrices(family, graph, beta, theta):
    """State-space matrices of each family's loop in agent coordinates."""
    L = laplacian(graph)
    N = graph.node_count
    I = np.eye(N)
    Z = np.zeros((N, N))
    M = consensus_projector(N)
    if family == "additive":
        A = -beta * L
        B = np.hstack([-beta * L, -beta * L])
        C = np.vstack([-beta * L, M])
        D = np.block([[-beta * L, -beta * L], [M, M]])
        return A, B, C, D, ([N, N], [N, N])
    if family == "topology":
        Dinc, W = incidence_factorization(graph)
        Wh = np.sqrt(W)
        m = Dinc.shape[1]
        A = -beta * L
        B = np.hstack([-beta * Dinc @ Wh, -beta * L])
        C = np.vstack([Wh @ Dinc.T, M])
        D = np.block([[np.zeros((m, m)), Wh @ Dinc.T], [np.zeros((N, m)), M]])
        return A, B, C, D, ([m, N], [m, N])
    if family == "dac":
        A = np.block([[Z, -beta * L], [theta * I, -theta * I - beta * L]])
        B = np.block([[Z, -beta * L, Z], [theta * I, -beta * L, theta * I]])
        C = np.block([[Z, -beta * L], [Z, M], [I, Z]])
        D = np.block([[Z, -beta * L, Z], [Z, M, Z], [Z, Z, M]])
        return A, B, C, D, ([N, N, N], [N, N, N])
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def assembled_block_norms(family, graph: WeightedGraph, beta, theta=None, omegas=None):
    """Largest singular value of every block of the loop transfer matrix.

    The loop is built in agent coordinates and each agent-indexed channel is
    projected onto the disagreement modes (``Y``) or, for the reference and
    tracking-error channels of the DAC loop, onto the full modal basis.
    Edge channels are left as they are.
    """
    if omegas is None:
        omegas = np.logspace(-3, 3, 200)
    spec = spectrum(laplacian(graph))
    U, Y = spec.modal_basis, spec.reduced_basis
    A, B, C, D, (out_sizes, in_sizes) = _loop_matrices(family, graph, beta, theta)
    N = graph.node_count

    def basis(k, size):
        if size != N:
            return np.eye(size)
        if family == "dac" and k == 2:
            return U
        return Y

    out_off = np.concatenate([[0], np.cumsum(out_sizes)])
    in_off = np.concatenate([[0], np.cumsum(in_sizes)])
    n = A.shape[0]
    nb = len(out_sizes)
    res = {f"G{i + 1}{j + 1}": np.empty(len(omegas)) for i in range(nb) for j in range(nb)}
    for k, w in enumerate(omegas):
        G = C @ np.linalg.solve(1j * w * np.eye(n) - A, B) + D
        for i in range(nb):
            Pi = basis(i, out_sizes[i])
            for j in range(nb):
                Pj = basis(j, in_sizes[j])
                blk = G[out_off[i]:out_off[i + 1], in_off[j]:in_off[j + 1]]
                res[f"G{i + 1}{j + 1}"][k] = np.linalg.norm(Pi.T @ blk @ Pj, 2)
    return res


def assemble_and_crosscheck(family, graph: WeightedGraph, beta, theta=None, omegas=None):
    """Maximum absolute gap between assembled and closed-form block norms.

    Returns ``(max_deviation, per_block)`` where ``per_block`` maps block
    names to their own maximum deviation. Closed forms use the full spectrum.
    """
    if omegas is None:
        omegas = np.logspace(-3, 3, 200)
    omegas = np.asarray(omegas, dtype=float)
    spec = spectrum(laplacian(graph))
    closed = _block_norms(family, beta, theta, spec.lambda2, spec.lambdaN, omegas, spec.eigenvalues)
    assembled = assembled_block_norms(family, graph, beta, theta, omegas)
    per_block = {}
    for name, vals in assembled.items():
        ref = closed.get(name)
        if ref is None:
            # blocks without a closed form must vanish identically
            ref = np.zeros_like(vals)
        per_block[name] = float(np.max(np.abs(vals - ref)))
    return max(per_block.values()), per_block
