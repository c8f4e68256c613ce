"""Exception types raised by the simulation and measurement routines."""


class CausalabError(Exception):
    """Base class for all package errors."""


class SizeCapExceeded(CausalabError):
    """A sampled object grew beyond the caller's vertex budget.

    Estimators treat this as a censored replication, never as a silent
    truncation.
    """

    def __init__(self, size_cap, message=None):
        self.size_cap = size_cap
        super().__init__(message or f"vertex count exceeded size_cap={size_cap}")


class InvalidCode(CausalabError, ValueError):
    """A tree code does not describe a valid plane tree."""


class TruncationTooShallow(CausalabError, ValueError):
    """The supplied map is not deep enough for an exact answer."""


class Unreachable(CausalabError):
    """Two vertices lie in different connected components."""


class MengerMismatch(CausalabError):
    """Max-flow value and dual shortest crossing disagree."""


class SolverNotConverged(CausalabError):
    """The Laplacian solve did not reach the requested residual."""


class NoCrossing(CausalabError):
    """An annulus admits no bottom-top crossing."""


class BracketTooWide(CausalabError):
    """Escaped mass is too large relative to the return probabilities used."""


class ExcessiveBoundaryHits(CausalabError):
    """Too many walkers reached the truncation boundary of the map."""

    def __init__(self, rate, limit=0.01):
        self.rate = rate
        self.limit = limit
        super().__init__(f"{rate:.2%} of walkers hit the truncation boundary (limit {limit:.0%})")


class InequalityViolated(CausalabError):
    """A Varopoulos-Carne check failed."""


class DegenerateInput(CausalabError, ValueError):
    """Too few or non-positive points for a log-log fit."""


class ConfigError(CausalabError, ValueError):
    """Invalid experiment configuration."""


class ReplicationFailure(CausalabError):
    """More than 10% of the replications of a run raised."""
