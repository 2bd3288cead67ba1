"""Exception types raised across the package."""


class ETConsensusError(Exception):
    """Base class for all package errors."""


class GraphError(ETConsensusError, ValueError):
    """Invalid graph description (self loops, duplicates, bad weights, disconnected)."""


class NotSymmetric(ETConsensusError, ValueError):
    pass


class SingularResolvent(ETConsensusError, ArithmeticError):
    """``j*omega*I - A`` could not be inverted."""


class UnstableSystem(ETConsensusError, ValueError):
    pass


class VariantMismatch(ETConsensusError, ValueError):
    pass


class ConfigError(ETConsensusError, ValueError):
    """Configuration failed validation; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SimulationAborted(ETConsensusError, RuntimeError):
    """Base for aborted runs. ``trace`` holds whatever was simulated before the abort."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NonFinite(SimulationAborted):
    """A state left the representable range (divergent closed loop)."""


class EventStorm(SimulationAborted):
    """An agent exceeded the per-agent event budget (Zeno-like breakdown)."""
