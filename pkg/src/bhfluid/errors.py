"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid input parameters (bad lengths, out-of-range values, bad sectors)."""


class LookupFailure(KeyError):
    """A Fock state was requested that is not part of the basis."""


class AmbiguityError(RuntimeError):
    """Eigenstate tracking could not decide between two candidates."""


class PropagationError(RuntimeError):
    """The time integrator failed; ``t`` holds the time at which it gave up."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class DegenerateConditionError(ValueError):
    """Conditioning on a site with vanishing occupation."""


class FitError(ValueError):
    """Not enough data to fit."""


class ConditioningError(ArithmeticError):
    """Confusion matrix too ill-conditioned to invert."""


class InternalError(RuntimeError):
    """An internal consistency check failed (e.g. a non-Hermitian Hamiltonian)."""
