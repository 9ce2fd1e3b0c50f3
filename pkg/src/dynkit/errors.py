"""Shared exception types."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration budget without converging."""


class HermiticityError(ValueError):
    """A quantity that must be hermitian (or real) violated its tolerance."""


class DegenerateJumpError(RuntimeError):
    """A triggered quantum jump hit a state the channel operator annihilates."""
