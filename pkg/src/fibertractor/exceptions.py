"""Exception types shared across the package."""


class DomainError(ValueError):
    """A physical parameter lies outside its allowed range."""


class SingularTransferError(ArithmeticError):
    """A scattering matrix cannot be rearranged into transfer form, or a
    chain's boundary-value system is (numerically) singular."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class ConvergenceError(ArithmeticError):
    """An iterative series did not converge within its budget."""


class TwoModeModelInvalid(ValueError):
    """Too much power leaves the two target modes for the two-mode model to apply."""
