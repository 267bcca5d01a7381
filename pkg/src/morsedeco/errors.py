"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class DissociationError(DomainError):
    """Initial state carries too much weight outside the bound subspace."""

    def __init__(self, message, norm_deficit):
        super().__init__(message)
        self.norm_deficit = norm_deficit


class DegenerateCouplingError(DomainError):
    pass


class WindowError(DomainError):
    """Phase-space window does not contain the state."""

    def __init__(self, message, mass_inside):
        super().__init__(message)
        self.mass_inside = mass_inside


class QuadratureError(ArithmeticError):
    def __init__(self, message, max_change, points_per_unit):
        super().__init__(message)
        self.max_change = max_change
        self.points_per_unit = points_per_unit


class PositivityError(ArithmeticError):
    pass


class NumericalAbort(RuntimeError):
    """Integration stopped; carries the last state that passed all checks."""

    def __init__(self, message, last_good_time, last_good_state, record=None):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.last_good_state = last_good_state
        self.record = record


class InconclusiveError(RuntimeError):
    """No decoherence breakpoint with the required time-scale separation."""

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit
