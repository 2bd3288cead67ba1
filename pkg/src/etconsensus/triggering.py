"""Triggering functions and inter-event holders."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TriggerParams:
    """Threshold weight `alpha`, offset amplitude `mu` and decay rate `nu` (1/s)."""

    alpha: float
    mu: float
    nu: float

    def __post_init__(self):
        for name in ("alpha", "mu", "nu"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive real, got {v!r}")
            object.__setattr__(self, name, float(v))


def trigger_value(error, local_disagreement_sq, t, p: TriggerParams):
    """``error**2 - alpha * disagreement - mu * exp(-nu * t)``.

    An event fires when the value is ``>= 0``. Works elementwise on arrays.
    """
    return np.square(error) - p.alpha * local_disagreement_sq - p.mu * np.exp(-p.nu * t)


def local_disagreement_sq(values, graph) -> np.ndarray:
    """Per-agent ``sum_j a_ij (v_i - v_j)**2``."""
    v = np.asarray(values, dtype=float)
    out = np.zeros(graph.node_count)
    for i, j, w in graph.edges:
        d = w * (v[i] - v[j]) ** 2
        out[i] += d
        out[j] += d
    return out


@dataclass(frozen=True)
class HolderState:
    """Broadcast state of one agent since its last event.

    For the zero-order hold only `held_value` matters. The DAC hold keeps
    the sampled augmented state (`held_value`), the sampled output
    `held_output` and the filter rate `theta`.
    """

    last_trigger_time: float
    held_value: float
    held_output: float = 0.0
    theta: float = 0.0


def zoh_value(h: HolderState) -> float:
    return h.held_value


def dac_hold_value(h: HolderState, t: float) -> float:
    """First-order filtered hold, closed form for a piecewise-constant output sample."""
    dt = t - h.last_trigger_time
    if dt < 0:
        raise ValueError("t precedes the last trigger time")
    decay = math.exp(-h.theta * dt)
    return decay * h.held_value + (1.0 - decay) * h.held_output
