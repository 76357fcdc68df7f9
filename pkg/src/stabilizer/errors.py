"""Exception types shared across the package."""


class StabilizerError(Exception):
    """Base class for all library errors."""


class NotInW(StabilizerError):
    """A unitary has an eigenvalue at (or numerically near) -1.

    The Lyapunov machinery divides by (X + I); states or goals with an
    eigenvalue at -1 sit outside its domain.
    """


class IntegratorTolerance(StabilizerError):
    """The geometric integrator exceeded its accuracy budget."""


class SwitchNeverReached(StabilizerError):
    """Two-step run exhausted its horizon before the switch predicate held."""


class InsufficientData(StabilizerError):
    """Not enough usable samples for a statistical fit."""
