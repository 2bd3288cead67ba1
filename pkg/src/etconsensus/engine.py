"""Hybrid simulation of event-triggered consensus protocols.

Continuous states are integrated with fixed-step RK4 on a uniform grid.
After each step every agent's trigger function is evaluated; when one is
non-negative the crossing is refined by bisection, the states are
advanced to it, and the broadcast estimates of all agents triggering at
that instant are updated before integration resumes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernel as _kernel
from .errors import ConfigError, EventStorm, NonFinite
from .graph import WeightedGraph, consensus_projector, incidence_factorization, laplacian
from .lti import StateSpaceSystem
from .triggering import TriggerParams, local_disagreement_sq

DEFAULT_STEP = 1e-3
MAX_STEP = 1e-2
DIVERGENCE_LIMIT = 1e9
BISECTION_ITERS = 30
EVENT_REL_TOL = 1e-8


class Variant(str, enum.Enum):
    NOMINAL = "nominal"
    ADDITIVE = "additive"
    TOPOLOGY = "topology"
    DAC = "dac"


@dataclass(frozen=True)
class ReferenceTerm:
    """``amplitude * exp(-decay t) * sin|cos(frequency t + phase)``."""

    amplitude: float
    kind: str
    frequency: float
    phase: float = 0.0
    decay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError(f"reference kind must be 'sin' or 'cos', got {self.kind!r}")
        if self.decay < 0:
            raise ValueError("reference decay must be non-negative (bounded references)")

    def value(self, t):
        f = np.sin if self.kind == "sin" else np.cos
        return self.amplitude * np.exp(-self.decay * t) * f(self.frequency * t + self.phase)

    def derivative(self, t):
        ph = self.frequency * t + self.phase
        env = self.amplitude * np.exp(-self.decay * t)
        if self.kind == "sin":
            return env * (self.frequency * np.cos(ph) - self.decay * np.sin(ph))
        return env * (-self.frequency * np.sin(ph) - self.decay * np.cos(ph))


@dataclass(frozen=True)
class ReferenceSignal:
    terms: tuple = ()

    def value(self, t):
        return sum((term.value(t) for term in self.terms), np.zeros_like(np.asarray(t, dtype=float)))

    def derivative(self, t):
        return sum((term.derivative(t) for term in self.terms), np.zeros_like(np.asarray(t, dtype=float)))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Complete description of one simulation run."""

    variant: Variant
    graph: WeightedGraph
    trigger: TriggerParams
    beta: float
    x0: np.ndarray
    horizon: float
    step: float = DEFAULT_STEP
    theta: Optional[float] = None
    agent_uncertainties: Optional[Sequence[StateSpaceSystem]] = None
    edge_uncertainties: Optional[Sequence[StateSpaceSystem]] = None
    references: Optional[Sequence[ReferenceSignal]] = None
    w0: Optional[np.ndarray] = None
    decimation: int = 10
    max_events_per_agent: int = 10**6
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        n = self.graph.node_count
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.size != n:
            raise ConfigError(f"expected {n} initial states, got {x0.size}", "x0")
        object.__setattr__(self, "x0", x0)
        if not self.beta > 0:
            raise ConfigError("must be positive", "beta")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ConfigError("must be a positive real", "horizon")
        if not (0 < self.step <= MAX_STEP):
            raise ConfigError(f"must lie in (0, {MAX_STEP:g}]", "step")
        if not self.step < self.horizon:
            raise ConfigError("must be smaller than the horizon", "step")
        if int(self.decimation) < 1:
            raise ConfigError("must be >= 1", "decimation")
        v = self.variant
        needs_agents = v in (Variant.ADDITIVE, Variant.DAC)
        if needs_agents != (self.agent_uncertainties is not None):
            raise ConfigError(f"agent uncertainties are {'required' if needs_agents else 'not allowed'} "
                              f"for variant {v.value}", "uncertainties.agents")
        if needs_agents:
            if len(self.agent_uncertainties) != n:
                raise ConfigError(f"expected {n} agent blocks", "uncertainties.agents")
            for blk in self.agent_uncertainties:
                _check_siso_stable(blk, "uncertainties.agents")
        needs_edges = v is Variant.TOPOLOGY
        if needs_edges != (self.edge_uncertainties is not None):
            raise ConfigError(f"edge uncertainties are {'required' if needs_edges else 'not allowed'} "
                              f"for variant {v.value}", "uncertainties.edges")
        if needs_edges:
            if len(self.edge_uncertainties) != self.graph.edge_count:
                raise ConfigError(f"expected {self.graph.edge_count} edge blocks", "uncertainties.edges")
            for blk in self.edge_uncertainties:
                _check_siso_stable(blk, "uncertainties.edges")
        is_dac = v is Variant.DAC
        if is_dac:
            if self.theta is None or not self.theta > 0:
                raise ConfigError("must be positive for the dac variant", "theta")
            if self.references is None or len(self.references) != n:
                raise ConfigError(f"expected {n} reference signals", "references")
        else:
            if self.references is not None:
                raise ConfigError("only allowed for the dac variant", "references")
            if self.w0 is not None:
                raise ConfigError("only allowed for the dac variant", "w0")
        if self.w0 is not None:
            w0 = np.array(self.w0, dtype=float).reshape(-1)
            if w0.size != n:
                raise ConfigError(f"expected {n} values", "w0")
            object.__setattr__(self, "w0", w0)

    @property
    def n_agents(self) -> int:
        return self.graph.node_count

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


def _check_siso_stable(blk, field_name):
    if blk.n_inputs != 1 or blk.n_outputs != 1:
        raise ConfigError("uncertainty blocks must be SISO", field_name)
    if not blk.is_stable():
        raise ConfigError("uncertainty block is not stable", field_name)


@dataclass(frozen=True)
class EventRecord:
    """One broadcast. `value` is the sampled estimate; `output` the sampled
    output (DAC hold only, otherwise NaN). `cascade` marks agents pushed over
    their threshold by a neighbour's broadcast at the same instant; their
    `f_value` is the post-jump value rather than a refined crossing."""

    agent: int
    time: float
    f_value: float
    value: float
    output: float = float("nan")
    cascade: bool = False
    f_scale: float = float("nan")  # e^2 + alpha*disagreement + mu*exp(-nu t) before the update


@dataclass
class SimulationTrace:
    scenario: Scenario
    times: np.ndarray
    x: np.ndarray  # N x T
    estimates: np.ndarray  # N x T
    aux: dict
    records: list
    final_state: np.ndarray
    completed: bool = True
    status: str = "ok"

    @property
    def variant(self) -> Variant:
        return self.scenario.variant

    @property
    def events(self):
        """Per-agent lists of event times."""
        out = [[] for _ in range(self.scenario.n_agents)]
        for rec in self.records:
            out[rec.agent].append(rec.time)
        return out

    @property
    def sampling_error(self) -> np.ndarray:
        return self.aux["e"]

    def agent_records(self, i):
        return [r for r in self.records if r.agent == i]


class AffineModel:
    """Assembled form ``s' = Acl s + Bh h + Pr r'``, ``err = Eh h + Es s``."""

    def __init__(self, scenario: Scenario):
        self.scenario = sc = scenario
        N = sc.n_agents
        self.N = N
        L = laplacian(sc.graph)
        self.L = L
        beta = sc.beta
        I = np.eye(N)
        self.dac = sc.variant is Variant.DAC
        self.Ys = self.Yh = None
        self.channel_maps = {}
        v = sc.variant

        if v is Variant.NOMINAL:
            n_s = N
            Acl = np.zeros((N, N))
            Bh = -beta * L
            Es = -I
            Eh = I.copy()
            self.x_slice = slice(0, N)
            s0 = sc.x0.copy()
        elif v is Variant.ADDITIVE:
            Ab, Bb, Cb, Db = _stack_blocks(sc.agent_uncertainties)
            nb = Ab.shape[0]
            n_s = N + nb
            Acl = np.zeros((n_s, n_s))
            Acl[N:, N:] = Ab
            Bh = np.vstack([-beta * L, -beta * Bb @ L])
            Es = np.hstack([-I, -Cb])
            Eh = I + beta * Db @ L
            self.x_slice = slice(0, N)
            s0 = np.concatenate([sc.x0, np.zeros(nb)])
            self.channel_maps["u"] = (np.zeros((N, n_s)), -beta * L)
            self.channel_maps["d"] = (np.hstack([np.zeros((N, N)), Cb]), -beta * Db @ L)
            self.channel_maps["y"] = (np.hstack([I, Cb]), -beta * Db @ L)
        elif v is Variant.TOPOLOGY:
            D, W = incidence_factorization(sc.graph)
            Wh = np.sqrt(W)
            Ae, Be, Ce, De = _stack_blocks(sc.edge_uncertainties)
            ne = Ae.shape[0]
            n_s = N + ne
            Acl = np.zeros((n_s, n_s))
            Acl[:N, N:] = -beta * D @ Wh @ Ce
            Acl[N:, N:] = Ae
            Bh = np.vstack([-beta * L - beta * D @ Wh @ De @ Wh @ D.T, Be @ Wh @ D.T])
            Es = np.hstack([-I, np.zeros((N, ne))])
            Eh = I.copy()
            self.x_slice = slice(0, N)
            s0 = np.concatenate([sc.x0, np.zeros(ne)])
            m = D.shape[1]
            self.channel_maps["v"] = (np.hstack([np.zeros((m, N)), Ce]), De @ Wh @ D.T)
            self.channel_maps["edge_in"] = (np.zeros((m, n_s)), Wh @ D.T)
        else:
            Ab, Bb, Cb, Db = _stack_blocks(sc.agent_uncertainties)
            nb = Ab.shape[0]
            th = sc.theta
            n_s = 2 * N + nb
            Acl = np.zeros((n_s, n_s))
            Acl[N:2 * N, :N] = th * I
            Acl[N:2 * N, N:2 * N] = -th * I
            Acl[N:2 * N, 2 * N:] = th * Cb
            Acl[2 * N:, 2 * N:] = Ab
            Bh = np.vstack([-beta * L, -(I + th * Db) @ (beta * L), -beta * Bb @ L])
            Pr = np.zeros((n_s, N))
            Pr[:N] = I
            self.Pr = Pr
            Es = np.hstack([np.zeros((N, N)), -I, np.zeros((N, nb))])
            Eh = I.copy()
            self.x_slice = slice(0, N)
            self.w_slice = slice(N, 2 * N)
            self.Ys = np.hstack([I, np.zeros((N, N)), Cb])
            self.Yh = -beta * Db @ L
            x0 = sc.x0
            if sc.w0 is None:
                # w(0) = y(0) with u(0) = -beta L w(0)
                w0 = np.linalg.solve(I + beta * Db @ L, x0)
            else:
                w0 = sc.w0
            self.w0 = w0
            s0 = np.concatenate([x0, w0, np.zeros(nb)])
            self.channel_maps["u"] = (np.zeros((N, n_s)), -beta * L)
            self.channel_maps["d"] = (np.hstack([np.zeros((N, 2 * N)), Cb]), -beta * Db @ L)
            self.channel_maps["y"] = (self.Ys, self.Yh)
            self.channel_maps["w"] = (np.hstack([np.zeros((N, N)), I, np.zeros((N, nb))]), np.zeros((N, N)))

        self.n_states = n_s
        self.Acl, self.Bh, self.Es, self.Eh = Acl, Bh, Es, Eh
        if not self.dac:
            self.Pr = np.zeros((n_s, N))
        self.s0 = s0
        self.channel_maps["e"] = (Es, Eh)

    def reference_arrays(self):
        agent, amp, kind, freq, phase, decay = [], [], [], [], [], []
        for i, ref in enumerate(self.scenario.references or ()):
            for term in ref.terms:
                agent.append(i)
                amp.append(term.amplitude)
                kind.append(0 if term.kind == "sin" else 1)
                freq.append(term.frequency)
                phase.append(term.phase)
                decay.append(term.decay)
        return (np.array(agent, dtype=np.intp), np.array(amp, dtype=float), np.array(kind, dtype=np.intp),
                np.array(freq, dtype=float), np.array(phase, dtype=float), np.array(decay, dtype=float))

    def continuous_matrices(self):
        """Closed loop with ideal communication (estimate == true signal)."""
        K = -np.linalg.solve(self.Eh, self.Es)
        return self.Acl + self.Bh @ K, np.zeros_like(self.Bh), K

    def build_kernel(self, backend=None, continuous=False):
        sc = self.scenario
        cls = _kernel.get_kernel_class(backend)
        ei = np.array([e[0] for e in sc.graph.edges], dtype=np.intp)
        ej = np.array([e[1] for e in sc.graph.edges], dtype=np.intp)
        ew = np.array([e[2] for e in sc.graph.edges], dtype=float)
        Acl, Bh = self.Acl, self.Bh
        if continuous:
            Acl, Bh, _ = self.continuous_matrices()
        return cls(Acl, Bh, self.Pr, self.Es, self.Eh, ei, ej, ew,
                   sc.trigger.alpha, sc.trigger.mu, sc.trigger.nu, float(sc.theta or 0.0), self.dac,
                   *self.reference_arrays(), triggers_enabled=not continuous, limit=DIVERGENCE_LIMIT)

    def sample_holders(self, s, hv, hy, ht, S, t, kern):
        """Broadcast new samples for agents `S` at time `t` (in place).

        Zero-order hold: the new estimates solve ``err_S = 0`` jointly, which
        with output feedthrough accounts for the estimate's own effect on the
        measured output. DAC hold: ``what_S <- w_S`` then ``yhat_S <- y_S``.
        """
        S = np.asarray(sorted(S), dtype=np.intp)
        if not self.dac:
            rest = np.setdiff1d(np.arange(self.N), S)
            rhs = -(self.Es[S] @ s) - self.Eh[np.ix_(S, rest)] @ hv[rest]
            hv[S] = np.linalg.solve(self.Eh[np.ix_(S, S)], rhs)
        else:
            hv[S] = -(self.Es[S] @ s)
            ht[S] = t
            h = kern.held(t, hv, hy, ht)
            hy[S] = (self.Ys @ s + self.Yh @ h)[S]


def _stack_blocks(blocks):
    """Block-diagonal stacking of SISO systems: returns (A, B, C, D) with
    B of shape (n, k) and C of shape (k, n) for k blocks."""
    k = len(blocks)
    n = sum(b.order for b in blocks)
    A = np.zeros((n, n))
    B = np.zeros((n, k))
    C = np.zeros((k, n))
    D = np.zeros((k, k))
    off = 0
    for i, b in enumerate(blocks):
        o = b.order
        A[off:off + o, off:off + o] = b.A
        B[off:off + o, i] = b.B[:, 0]
        C[i, off:off + o] = b.C[0, :]
        D[i, i] = b.D[0, 0]
        off += o
    return A, B, C, D


def _event_scale(model, kern, s, t, hv, hy, ht):
    sc = model.scenario
    h = kern.held(t, hv, hy, ht)
    err = kern.errors(s, t, hv, hy, ht)
    dis = local_disagreement_sq(h, sc.graph)
    return err * err + sc.trigger.alpha * dis + sc.trigger.mu * math.exp(-sc.trigger.nu * t)


def _locate_crossing(model, kern, s, ta, dt, hv, hy, ht):
    """Bisect ``max_i f_i`` on ``(ta, ta + dt]``; returns (tau, state at ta + tau)."""
    lo, hi = 0.0, dt
    s_hi = kern.substep(s, ta, hi, hv, hy, ht)
    for _ in range(BISECTION_ITERS):
        f = kern.triggers(s_hi, ta + hi, hv, hy, ht)
        k = int(np.argmax(f))
        scale = _event_scale(model, kern, s_hi, ta + hi, hv, hy, ht)[k]
        if f[k] <= EVENT_REL_TOL * scale:
            break
        mid = 0.5 * (lo + hi)
        s_mid = kern.substep(s, ta, mid, hv, hy, ht)
        if np.max(kern.triggers(s_mid, ta + mid, hv, hy, ht)) >= 0.0:
            hi, s_hi = mid, s_mid
        else:
            lo = mid
    return hi, s_hi


def simulate(scenario: Scenario, backend=None, continuous=False) -> SimulationTrace:
    """Run `scenario` and return its trace.

    Parameters
    ----------
    backend : {None, "cython", "python"}
        Kernel implementation; None picks the compiled one when available.
    continuous : bool
        Test hook: replace event-triggered broadcasting by ideal continuous
        communication (estimates track the true signals, no events after t0).

    Raises
    ------
    NonFinite
        A state exceeded 1e9 in magnitude. ``exc.trace`` holds the partial run.
    EventStorm
        An agent logged more than ``scenario.max_events_per_agent`` events.
    """
    model = AffineModel(scenario)
    kern = model.build_kernel(backend, continuous=continuous)
    sc = scenario
    N, n_s = model.N, model.n_states
    h = sc.step
    K = sc.n_steps
    dec = int(sc.decimation)
    n_samples = K // dec + 1

    out_t = np.zeros(n_samples)
    out_s = np.zeros((n_samples, n_s))
    out_h = np.zeros((n_samples, N))
    out_hy = np.zeros((n_samples, N))

    s = np.ascontiguousarray(model.s0, dtype=float).copy()
    hv = np.zeros(N)
    hy = np.zeros(N)
    ht = np.zeros(N)
    records = []
    counts = np.zeros(N, dtype=np.int64)

    def log_events(S, t, fvals, scales, cascaded=()):
        for i in sorted(S):
            records.append(EventRecord(int(i), float(t), float(fvals[i]), float(hv[i]),
                                       float(hy[i]) if model.dac else float("nan"), i in cascaded,
                                       float(scales[i])))
            counts[i] += 1
            if counts[i] > sc.max_events_per_agent:
                raise EventStorm(f"agent {i} exceeded {sc.max_events_per_agent} events by t={t:.6g}",
                                 _assemble(model, kern, out_t, out_s, out_h, out_hy, 0, records, s, False,
                                           "event_storm", continuous))

    # Every agent broadcasts at t0; there is no earlier estimate to compare against.
    model.sample_holders(s, hv, hy, ht, range(N), 0.0, kern)
    log_events(range(N), 0.0, np.zeros(N), np.zeros(N))
    out_t[0] = 0.0
    out_s[0] = s
    out_h[0] = kern.held(0.0, hv, hy, ht)
    out_hy[0] = hy

    def abort(last_k):
        last = last_k // dec
        return NonFinite(
            f"state magnitude exceeded {DIVERGENCE_LIMIT:g} near t={last_k * h:.6g}",
            _assemble(model, kern, out_t, out_s, out_h, out_hy, last, records, s, False, "diverged",
                      continuous),
        )

    k = 0
    while k < K:
        k, status = kern.advance(s, k, K, h, hv, hy, ht, dec, out_t, out_s, out_h, out_hy)
        if status == _kernel.STATUS_DONE:
            break
        if status == _kernel.STATUS_NONFINITE:
            raise abort(k)
        ta, tb = k * h, (k + 1) * h
        while True:
            dt = tb - ta
            s_b = kern.substep(s, ta, dt, hv, hy, ht)
            if not np.all(np.abs(s_b) <= DIVERGENCE_LIMIT):
                raise abort(k)
            if np.max(kern.triggers(s_b, tb, hv, hy, ht)) < 0.0:
                s[:] = s_b
                break
            tau, s_star = _locate_crossing(model, kern, s, ta, dt, hv, hy, ht)
            t_star = tb if tau >= dt else ta + tau
            s[:] = s_star
            f = kern.triggers(s, t_star, hv, hy, ht)
            scale = _event_scale(model, kern, s, t_star, hv, hy, ht)
            S = set(np.flatnonzero(f >= -EVENT_REL_TOL * scale).tolist())
            fvals = f.copy()
            scales = scale.copy()
            cascaded = set()
            while True:
                model.sample_holders(s, hv, hy, ht, S, t_star, kern)
                f = kern.triggers(s, t_star, hv, hy, ht)
                new = set(np.flatnonzero(f >= 0.0).tolist()) - S
                if not new:
                    break
                # a neighbour's broadcast pushed these agents over their thresholds
                new_scale = _event_scale(model, kern, s, t_star, hv, hy, ht)
                for i in new:
                    fvals[i] = f[i]
                    scales[i] = new_scale[i]
                S |= new
                cascaded |= new
            log_events(S, t_star, fvals, scales, cascaded)
            ta = t_star
            if ta >= tb:
                break
        k += 1
        if k % dec == 0:
            i = k // dec
            out_t[i] = k * h
            out_s[i] = s
            out_h[i] = kern.held(k * h, hv, hy, ht)
            out_hy[i] = hy

    return _assemble(model, kern, out_t, out_s, out_h, out_hy, n_samples - 1, records, s, True, "ok",
                     continuous)


def _assemble(model, kern, out_t, out_s, out_h, out_hy, last, records, s, completed, status, continuous):
    sc = model.scenario
    n = last + 1
    t = out_t[:n].copy()
    S = out_s[:n]
    if continuous:
        _, _, Kc = model.continuous_matrices()
        H = S @ Kc.T
    else:
        H = out_h[:n].copy()
    x = S[:, model.x_slice].T.copy()
    aux = {}
    for name, (Cs, Ch) in model.channel_maps.items():
        aux[name] = (S @ Cs.T + H @ Ch.T).T
    M = consensus_projector(model.N)
    aux["z"] = M @ H.T
    if sc.variant is Variant.TOPOLOGY:
        aux["zx"] = M @ x
    if model.dac:
        aux["yhat"] = out_hy[:n].T.copy()
        aux["r"] = np.array([ref.value(t) for ref in sc.references])
    return SimulationTrace(
        scenario=sc,
        times=t,
        x=x,
        estimates=H.T.copy(),
        aux=aux,
        records=list(records),
        final_state=np.array(s, dtype=float),
        completed=completed,
        status=status,
    )


def replay_estimates(trace: SimulationTrace) -> np.ndarray:
    """Rebuild the estimate channels from the event log and holder formulas alone."""
    sc = trace.scenario
    N = sc.n_agents
    out = np.empty((N, trace.times.size))
    theta = float(sc.theta or 0.0)
    for i in range(N):
        recs = trace.agent_records(i)
        times = np.array([r.time for r in recs])
        idx = np.searchsorted(times, trace.times, side="right") - 1
        vals = np.array([r.value for r in recs])[idx]
        if sc.variant is Variant.DAC:
            outs = np.array([r.output for r in recs])[idx]
            decay = np.exp(-theta * (trace.times - times[idx]))
            out[i] = decay * vals + (1.0 - decay) * outs
        else:
            out[i] = vals
    return out
