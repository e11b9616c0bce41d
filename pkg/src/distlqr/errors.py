"""Exception hierarchy shared across the toolkit."""


class DistLqrError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(DistLqrError):
    """Invalid run configuration (schema or dimension violations)."""


class SynthesisError(DistLqrError):
    """A design step failed: Riccati preconditions, SDP infeasibility, ..."""


class VerificationError(DistLqrError):
    """A computed design failed its independent certificate checks."""


class SimulationError(DistLqrError):
    """Numerical integration failed (non-finite state, bad horizon)."""
