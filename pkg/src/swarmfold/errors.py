"""Exception hierarchy shared by all modules."""


class SwarmfoldError(ValueError):
    """Base class for every error raised by the package."""


class InvalidParameter(SwarmfoldError):
    pass


class DegeneratePoints(SwarmfoldError):
    pass


class OutsideBall(SwarmfoldError):
    pass


class DimensionMismatch(SwarmfoldError):
    pass


class NoConvergence(SwarmfoldError):
    pass


class InvalidStepSize(SwarmfoldError):
    pass


class InvalidNoiseParameter(SwarmfoldError):
    pass


class DegenerateInitialData(SwarmfoldError):
    pass


class OffManifoldPoint(SwarmfoldError):
    pass


class InvalidParams(SwarmfoldError):
    pass


class DegenerateData(SwarmfoldError):
    pass


class NonHermitian(SwarmfoldError):
    pass


class SingularSystem(SwarmfoldError):
    pass


class ObjectiveFailure(SwarmfoldError):
    """Raised when an objective evaluation fails inside an optimizer.

    ``generation`` records where in the run the failure happened.
    """

    def __init__(self, message, generation=None):
        super().__init__(message)
        self.generation = generation


class DegenerateInstance(SwarmfoldError):
    pass


class InsufficientData(SwarmfoldError):
    pass


class InfeasibleThreshold(SwarmfoldError):
    pass
