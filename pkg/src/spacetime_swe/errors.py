"""Exception types raised by the solver stack."""


class SWEError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SWEError, ValueError):
    pass


class InvalidMesh(SWEError):
    pass


class SolverFailure(SWEError):
    """Singular or otherwise unsolvable linear system."""

    def __init__(self, message, worst_element=None):
        super().__init__(message)
        self.worst_element = worst_element


class NonConvergence(SWEError):
    """Newton iteration hit its iteration cap."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)
