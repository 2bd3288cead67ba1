"""Right-hand sides of the four closed loops, written out agent by agent.

The simulator integrates an assembled affine form of the same equations;
these functions state them directly and serve as its reference.
"""
import numpy as np

from .lti import co_simulate_step


def dynamics_nominal(x, xhat, beta, L):
    """``x' = -beta L xhat`` (equivalently ``-beta L x - beta L e``)."""
    return -beta * (np.asarray(L) @ np.asarray(xhat, dtype=float))


def dynamics_additive(x, yhat, block_states, beta, L, blocks):
    """Output-feedback protocol with additive dynamic uncertainty.

    Returns ``(xdot, block_derivatives, d, y, u)``: ``u = -beta L yhat``
    drives both the integrators and each uncertainty block; ``y = x + d``.
    """
    x = np.asarray(x, dtype=float)
    u = -beta * (np.asarray(L) @ np.asarray(yhat, dtype=float))
    derivs, d = [], np.zeros_like(x)
    for i, (blk, st) in enumerate(zip(blocks, block_states)):
        dx, out = co_simulate_step(blk, st, [u[i]])
        derivs.append(dx)
        d[i] = out[0]
    return u.copy(), derivs, d, x + d, u


def dynamics_topology(xhat, edge_states, beta, D, W, edge_blocks):
    """Protocol with multiplicatively perturbed edge weights.

    Edge inputs are ``W^{1/2} D^T xhat``; each edge block outputs ``v_k``
    and ``x' = -beta L xhat - beta D W^{1/2} v``.
    """
    xhat = np.asarray(xhat, dtype=float)
    D = np.asarray(D, dtype=float)
    Wh = np.sqrt(np.asarray(W, dtype=float))
    L = D @ np.asarray(W) @ D.T
    w_edge = Wh @ D.T @ xhat
    derivs, v = [], np.zeros(D.shape[1])
    for k, (blk, st) in enumerate(zip(edge_blocks, edge_states)):
        dx, out = co_simulate_step(blk, st, [w_edge[k]])
        derivs.append(dx)
        v[k] = out[0]
    return -beta * L @ xhat - beta * D @ Wh @ v, derivs


def dynamics_dac(x, w, what, yhat, block_states, r, rdot, beta, theta, L, blocks):
    """Event-triggered dynamic average consensus with additive uncertainty.

    ``yhat`` and ``r`` are accepted for completeness of the signal set; the
    flow itself depends on ``what`` (through ``u``) and on ``rdot``.

    Returns a dict with ``xdot``, ``wdot``, ``block_derivatives``, ``u``,
    ``d`` and ``y``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    u = -beta * (np.asarray(L) @ np.asarray(what, dtype=float))
    derivs, d = [], np.zeros_like(x)
    for i, (blk, st) in enumerate(zip(blocks, block_states)):
        dx, out = co_simulate_step(blk, st, [u[i]])
        derivs.append(dx)
        d[i] = out[0]
    y = x + d
    return {
        "xdot": u + np.asarray(rdot, dtype=float),
        "wdot": -theta * (w - y) + u,
        "block_derivatives": derivs,
        "u": u,
        "d": d,
        "y": y,
    }
