"""Exception hierarchy shared by all modules."""


class MscaleError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(MscaleError, ValueError):
    """An argument is outside its admissible range."""


class InsufficientDataError(MscaleError, ValueError):
    pass


class InfeasibleError(MscaleError):
    """A constraint system has no solution.

    ``groups`` names an irreducible subset of constraint blocks that is
    already infeasible on its own (empty when not diagnosed).
    """

    def __init__(self, message, groups=()):
        super().__init__(message)
        self.groups = tuple(groups)


class UnboundedError(MscaleError):
    pass


class NumericalError(MscaleError):
    """The LP engine returned something that does not survive verification."""


class IterationLimitError(MscaleError):
    """The tube-squeezing loop ran out of iterations.

    Carries the last fit and the worst violated interval so callers can
    still inspect what was computed.
    """

    def __init__(self, message, fit=None, worst_interval=None):
        super().__init__(message)
        self.fit = fit
        self.worst_interval = worst_interval
