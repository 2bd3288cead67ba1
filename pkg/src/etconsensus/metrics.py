"""Post-processing of simulation traces."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .engine import SimulationTrace, Variant
from .errors import VariantMismatch
from .graph import consensus_projector, laplacian, spectrum
from .triggering import local_disagreement_sq

POINTWISE_SLACK = 1e-6
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def consensus_error(trace: SimulationTrace) -> np.ndarray:
    """``||M x(t)||`` at every stored sample."""
    M = consensus_projector(trace.scenario.n_agents)
    return np.linalg.norm(M @ trace.x, axis=0)


def consensus_time(times, series, threshold=0.1) -> Optional[float]:
    """First sample time after which `series` stays strictly below `threshold`.

    Returns None when the last sample is not below the threshold.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    series = np.asarray(series, dtype=float)
    above = np.flatnonzero(~(series < threshold))
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    if last == series.size - 1:
        return None
    return float(times[last + 1])


def l2_norm(times, signals) -> float:
    """Truncated L2 norm of a vector signal (rows = components) by the trapezoid rule."""
    sq = np.sum(np.atleast_2d(np.asarray(signals, dtype=float)) ** 2, axis=0)
    return math.sqrt(max(float(_trapezoid(sq, np.asarray(times, dtype=float))), 0.0))


def sampling_error_channels(trace: SimulationTrace):
    """(sampling error, consensus signal z) pair the trigger operates on."""
    return trace.aux["e"], trace.aux["z"]


def operator_gain_check(trace: SimulationTrace, alpha, lambdaN, mu, nu, N=None):
    """Trace-level check of ``||e||_2 <= sqrt(2 alpha lambdaN) ||z||_2 + sqrt(N mu / nu)``.

    Returns ``(lhs, rhs, margin)`` with ``margin = rhs - lhs``.
    """
    N = trace.scenario.n_agents if N is None else N
    e, z = sampling_error_channels(trace)
    lhs = l2_norm(trace.times, e)
    rhs = math.sqrt(2.0 * alpha * lambdaN) * l2_norm(trace.times, z) + math.sqrt(N * mu / nu)
    return lhs, rhs, rhs - lhs


def pointwise_trigger_slack(trace: SimulationTrace) -> float:
    """Largest value of ``e_i^2 - alpha*disagreement_i - mu*exp(-nu t)`` over all samples.

    The event rule keeps this non-positive; a value above ``POINTWISE_SLACK``
    means a missed event.
    """
    p = trace.scenario.trigger
    g = trace.scenario.graph
    e = trace.aux["e"]
    worst = -math.inf
    for k, t in enumerate(trace.times):
        dis = local_disagreement_sq(trace.estimates[:, k], g)
        f = e[:, k] ** 2 - p.alpha * dis - p.mu * math.exp(-p.nu * t)
        worst = max(worst, float(f.max()))
    return worst


@dataclass(frozen=True)
class InterEventStats:
    minimum: Optional[float]
    mean: Optional[float]
    counts: tuple


def inter_event_stats(events) -> InterEventStats:
    """Minimum and mean gap between consecutive events of the same agent.

    `events` is a sequence of per-agent event-time sequences. With no
    consecutive pair at all, minimum and mean are None.
    """
    gaps = [np.diff(np.asarray(ev, dtype=float)) for ev in events]
    gaps = np.concatenate(gaps) if gaps else np.empty(0)
    counts = tuple(len(ev) for ev in events)
    if gaps.size == 0:
        return InterEventStats(None, None, counts)
    return InterEventStats(float(gaps.min()), float(gaps.mean()), counts)


def dac_tracking_error(trace: SimulationTrace):
    """Per-agent ``x_i - mean(r)`` series, its norm series and the sup over ``t > T/2``.

    Returns ``(errors, norms, sup_second_half)``.
    """
    if trace.scenario.variant is not Variant.DAC:
        raise VariantMismatch(f"tracking error needs a dac trace, got {trace.scenario.variant.value}")
    r = trace.aux["r"]
    err = trace.x - r.mean(axis=0)
    norms = np.linalg.norm(err, axis=0)
    T = trace.times[-1]
    late = trace.times > T / 2
    return err, norms, float(norms[late].max()) if late.any() else float("nan")


@dataclass
class RunSummary:
    t_min: Optional[float]
    final_consensus_error: float
    event_counts: list
    min_inter_event: Optional[float]
    operator_gain_margin: float
    pointwise_trigger_slack: float
    dac_tracking_sup: Optional[float] = None
    dac_tracking_sup_first_half: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def summarize(trace: SimulationTrace, threshold=0.1) -> RunSummary:
    sc = trace.scenario
    lam_N = spectrum(laplacian(sc.graph)).lambdaN
    series = consensus_error(trace)
    stats = inter_event_stats(trace.events)
    _, _, margin = operator_gain_check(trace, sc.trigger.alpha, lam_N, sc.trigger.mu, sc.trigger.nu)
    out = RunSummary(
        t_min=consensus_time(trace.times, series, threshold),
        final_consensus_error=float(series[-1]),
        event_counts=list(stats.counts),
        min_inter_event=stats.minimum,
        operator_gain_margin=margin,
        pointwise_trigger_slack=pointwise_trigger_slack(trace),
    )
    if sc.variant is Variant.DAC:
        _, norms, late = dac_tracking_error(trace)
        early = trace.times <= trace.times[-1] / 2
        out.dac_tracking_sup = late
        out.dac_tracking_sup_first_half = float(norms[early].max())
    return out
