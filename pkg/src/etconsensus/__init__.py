"""Event-triggered consensus under frequency-domain uncertainty."""
from .conditions import (
    ConditionReport,
    assemble_and_crosscheck,
    check_additive,
    check_dac_consensus,
    check_dac_performance,
    check_nominal,
    check_topology,
    gain_profiles,
    mu_upper_bound_2block,
    mu_upper_bound_3block,
)
from .engine import EventRecord, ReferenceSignal, ReferenceTerm, Scenario, SimulationTrace, Variant, simulate
from .errors import (
    ConfigError,
    ETConsensusError,
    EventStorm,
    GraphError,
    NonFinite,
    NotSymmetric,
    SingularResolvent,
    UnstableSystem,
    VariantMismatch,
)
from .graph import LaplacianSpectrum, WeightedGraph, incidence_factorization, laplacian, spectrum
from .kernel import BACKEND
from .lti import StateSpaceSystem, freq_response, hinf_norm, random_norm_bounded
from .metrics import RunSummary, summarize
from .triggering import TriggerParams, trigger_value

__version__ = "0.1.0"
