"""Continuous-time LTI blocks used as frequency-domain uncertainties.

Provides frequency response evaluation, an H-infinity norm based on
Hamiltonian bisection, the time-domain step used inside the simulator,
and seeded generation of norm-bounded random blocks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularResolvent, UnstableSystem

STABILITY_MARGIN = 1e-9


def _as_matrix(m, rows=None, cols=None, name="matrix"):
    a = np.array(m, dtype=float)
    if a.size == 0:
        a = np.zeros((rows or 0, cols or 0))
    elif a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1) if rows in (None, 1) else a.reshape(-1, 1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional")
    return a


@dataclass(frozen=True, eq=False)
class StateSpaceSystem:
    """Realization ``x' = A x + B u``, ``y = C x + D u``.

    ``order == 0`` is a static gain ``D``; pass ``A=[]`` in that case.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = _as_matrix(self.D, name="D")
        q, p = D.shape
        A = np.array(self.A, dtype=float)
        n = 0 if A.size == 0 else (1 if A.ndim == 0 else A.shape[0])
        A = _as_matrix(self.A, n, n, "A")
        B = _as_matrix(self.B, n, p, "B") if n else np.zeros((0, p))
        C = _as_matrix(self.C, q, n, "C") if n else np.zeros((q, 0))
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape != (n, p):
            raise ValueError(f"B has shape {B.shape}, expected {(n, p)}")
        if C.shape != (q, n):
            raise ValueError(f"C has shape {C.shape}, expected {(q, n)}")
        for name, arr in zip("ABCD", (A, B, C, D)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.order else np.zeros(0, dtype=complex)

    def is_stable(self, margin=STABILITY_MARGIN) -> bool:
        return self.order == 0 or bool(np.max(self.poles().real) < -margin)

    def dc_gain(self) -> np.ndarray:
        return freq_response(self, 0.0).real

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "ABCD"}

    @classmethod
    def from_dict(cls, d) -> "StateSpaceSystem":
        missing = [k for k in "ABCD" if k not in d]
        if missing:
            raise ValueError(f"state-space block is missing keys {missing}")
        return cls(d["A"], d["B"], d["C"], d["D"])

    @classmethod
    def static(cls, gain) -> "StateSpaceSystem":
        return cls([], [], [], gain)

    def __eq__(self, other):
        if not isinstance(other, StateSpaceSystem):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABCD")

    def __repr__(self):
        return f"StateSpaceSystem(order={self.order}, inputs={self.n_inputs}, outputs={self.n_outputs})"


def series(second: StateSpaceSystem, first: StateSpaceSystem) -> StateSpaceSystem:
    """Cascade: the output of `first` drives `second`."""
    n1, n2 = first.order, second.order
    A = np.block(
        [
            [first.A, np.zeros((n1, n2))],
            [second.B @ first.C, second.A],
        ]
    )
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpaceSystem(A, B, C, D)


def freq_response(sys: StateSpaceSystem, omega: float) -> np.ndarray:
    """Evaluate ``C (j*omega*I - A)^-1 B + D``."""
    if sys.order == 0:
        return sys.D.astype(complex)
    M = 1j * omega * np.eye(sys.order) - sys.A
    try:
        X = np.linalg.solve(M, sys.B.astype(complex))
    except np.linalg.LinAlgError as exc:
        raise SingularResolvent(f"resolvent singular at omega={omega}") from exc
    if not np.all(np.isfinite(X)):
        raise SingularResolvent(f"resolvent singular at omega={omega}")
    return sys.C @ X + sys.D


def sigma_max_response(sys: StateSpaceSystem, omegas, chunk=4096) -> np.ndarray:
    """Largest singular value of the frequency response on a grid."""
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty(omegas.shape)
    if sys.order == 0:
        out[:] = np.linalg.norm(sys.D, 2) if sys.D.size else 0.0
        return out
    n = sys.order
    eye = np.eye(n)
    B = sys.B.astype(complex)
    siso = sys.D.shape == (1, 1)
    for start in range(0, omegas.size, chunk):
        w = omegas.ravel()[start:start + chunk]
        M = 1j * w[:, None, None] * eye - sys.A
        X = np.linalg.solve(M, np.broadcast_to(B, (w.size,) + B.shape))
        G = sys.C @ X + sys.D
        if siso:
            vals = np.abs(G[:, 0, 0])
        else:
            vals = np.linalg.svd(G, compute_uv=False)[:, 0]
        out.ravel()[start:start + chunk] = vals
    return out


def _check_stable(sys):
    if sys.order and np.max(sys.poles().real) >= -STABILITY_MARGIN:
        raise UnstableSystem(
            f"A has an eigenvalue with real part {np.max(sys.poles().real):.3g} >= -{STABILITY_MARGIN:g}"
        )


def _hamiltonian(sys, gamma):
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    p = D.shape[1]
    R = gamma**2 * np.eye(p) - D.T @ D
    Rinv = np.linalg.inv(R)
    Af = A + B @ Rinv @ D.T @ C
    top = np.hstack([Af, B @ Rinv @ B.T])
    bottom = np.hstack([-C.T @ (np.eye(D.shape[0]) + D @ Rinv @ D.T) @ C, -Af.T])
    return np.vstack([top, bottom])


def _imaginary_axis_test(sys, gamma):
    """Return (crosses, frequencies, ambiguous) for level `gamma`.

    ``crosses`` is True when the Hamiltonian has eigenvalues on the
    imaginary axis, i.e. some singular value of ``G(jw)`` reaches `gamma`.
    """
    ev = np.linalg.eigvals(_hamiltonian(sys, gamma))
    scale = np.maximum(1.0, np.abs(ev))
    rel = np.abs(ev.real) / scale
    on_axis = rel <= 1e-9
    ambiguous = bool(np.any((rel > 1e-9) & (rel <= 1e-7)))
    freqs = np.abs(ev.imag[on_axis])
    return bool(np.any(on_axis)), freqs, ambiguous


def _initial_grid(sys, points=200):
    poles = sys.poles()
    mags = np.abs(poles[np.abs(poles) > 0])
    lo = np.log10(mags.min()) - 3 if mags.size else -3.0
    hi = np.log10(mags.max()) + 3 if mags.size else 3.0
    extra = np.abs(poles.imag)
    return np.unique(np.concatenate([[0.0], np.logspace(lo, hi, points), extra, mags]))


def _golden_max(fun, a, b, iters=100):
    """Golden-section search for a local maximum of `fun` on ``[a, b]``."""
    r = (np.sqrt(5.0) - 1) / 2
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if b - a <= 1e-14 * max(1.0, abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = fun(d)
    return (c, fc) if fc > fd else (d, fd)


def hinf_norm_sweep(sys: StateSpaceSystem, points=100_000) -> float:
    """Dense log-frequency sweep with golden-section refinement at the argmax."""
    if sys.order == 0:
        return float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    grid = _initial_grid(sys, points)
    vals = sigma_max_response(sys, grid)
    k = int(np.argmax(vals))
    best = float(vals[k])
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.size - 1)]
    if b > a:
        _, refined = _golden_max(lambda w: float(sigma_max_response(sys, [w])[0]), a, b)
        best = max(best, refined)
    return best


def hinf_norm(sys: StateSpaceSystem, tol: float = 1e-8) -> float:
    """H-infinity norm ``sup_w sigma_max(G(jw))`` to relative tolerance `tol`.

    Bisection on the level ``gamma`` using the imaginary-axis eigenvalue
    test of the associated Hamiltonian matrix, bracketed from below by a
    coarse frequency sweep. When an eigenvalue sits too close to the
    imaginary axis to classify, falls back to :func:`hinf_norm_sweep`.

    Raises
    ------
    UnstableSystem
        If ``A`` has an eigenvalue with real part ``>= -1e-9``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if sys.order == 0:
        return float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    _check_stable(sys)

    grid = _initial_grid(sys)
    vals = sigma_max_response(sys, grid)
    d_norm = float(np.linalg.norm(sys.D, 2)) if sys.D.size else 0.0
    lb = max(float(vals.max()), d_norm)
    if lb == 0.0:
        # G(jw) vanishes on the grid and D = 0; test a tiny level directly.
        lb = 1e-300
    ub = 2.0 * lb
    for _ in range(200):
        crosses, freqs, ambiguous = _imaginary_axis_test(sys, ub)
        if ambiguous:
            return hinf_norm_sweep(sys)
        if not crosses:
            break
        if freqs.size:
            lb = max(lb, float(sigma_max_response(sys, freqs).max()))
        ub *= 2.0
    while ub - lb > tol * lb:
        mid = 0.5 * (lb + ub)
        crosses, freqs, ambiguous = _imaginary_axis_test(sys, mid)
        if ambiguous:
            return hinf_norm_sweep(sys)
        if crosses:
            lb = mid
            if freqs.size:
                # Peaks lie between consecutive crossing frequencies.
                f = np.sort(freqs)
                probe = np.concatenate([f, 0.5 * (f[1:] + f[:-1])])
                lb = max(lb, float(sigma_max_response(sys, probe).max()))
        else:
            ub = mid
    return 0.5 * (lb + ub) if lb > 1e-300 else 0.0


def co_simulate_step(sys: StateSpaceSystem, state, inp):
    """Return ``(A x + B u, C x + D u)`` for the block's internal state ``x``."""
    state = np.asarray(state, dtype=float).reshape(sys.order)
    inp = np.asarray(inp, dtype=float).reshape(sys.n_inputs)
    return sys.A @ state + sys.B @ inp, sys.C @ state + sys.D @ inp


def random_norm_bounded(seed: int, order: int, bound: float) -> StateSpaceSystem:
    """Seeded random stable SISO block with ``hinf_norm <= bound``.

    The state matrix is a random skew part plus a negative-definite
    symmetric part shifted by ``-0.5``; ``C`` and ``D`` are rescaled so
    that the norm lands at ``bound / 1.01``.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    if not bound > 0:
        raise ValueError("bound must be positive")
    rng = np.random.default_rng(int(seed))
    P = rng.normal(size=(order, order))
    K = rng.normal(size=(order, order))
    A = (K - K.T) - (P @ P.T) / order - 0.5 * np.eye(order)
    B = rng.normal(size=(order, 1))
    C = rng.normal(size=(1, order))
    D = 0.2 * rng.normal(size=(1, 1))
    raw = StateSpaceSystem(A, B, C, D)
    scale = bound / (hinf_norm(raw, 1e-10) * 1.01)
    return StateSpaceSystem(A, B, C * scale, D * scale)


def _block(a, b, c, d):
    return StateSpaceSystem(a, b, c, d)


# Additive uncertainty realizations of the six-agent example, digit for digit.
DEMO_AGENT_BLOCKS = (
    _block([[-55.4, 140.7], [-155.7, -71.41]], [[-8.24], [-1.28]], [[3.3989, -5.4689]], [[0.1022]]),
    _block([[-55.4, 140.7], [-163.7, -39.56]], [[-5.1520], [-9.2230]], [[2.03, -2.14]], [[0.2760]]),
    _block([[-0.3]], [[-0.28]], [[0.5454]], [[0.0460]]),
    _block([[-5.4, 14.7], [-15.7, -1.41]], [[-1.24], [-0.28]], [[0.1150, -2.4610]], [[0.0920]]),
    _block([[-55.4, 140.7], [-155.7, -71.41]], [[-3.0150], [-3.1122]], [[0.33, -2.14]], [[0.4133]]),
    _block(
        [[-44.4, 140.7, -57.4], [-19.7, -18.41, -6.32], [45.70, 29.0, -130.84]],
        [[-0.24], [-1.28], [1.16]],
        [[4.4563, -10.2542, 4.2646]],
        [[0.2875]],
    ),
)

DEMO_ETA = 0.4654
DEMO_EDGE_BOUND = 0.1315
