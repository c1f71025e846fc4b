"""Exception hierarchy shared by every geoobs module."""


class GeoObsError(Exception):
    """Base class for computation errors (CLI exit code 2)."""


class ValidationError(GeoObsError):
    """Bad user input: malformed files or out-of-range parameters (exit code 1)."""

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


# series
class NonzeroConstantTerm(GeoObsError):
    pass


class SingularJacobian(GeoObsError):
    pass


class ImplicitSolveFailed(GeoObsError):
    pass


# geometry
class FrameNotNormalized(GeoObsError):
    pass


class NonzeroSlope(GeoObsError):
    pass


class NotOnIntersection(GeoObsError):
    pass


class ParallelNormals(GeoObsError):
    pass


class NoValidTilt(GeoObsError):
    pass


# classifier
class NotASaddle(GeoObsError):
    pass


class DeltaOutOfRange(GeoObsError):
    pass


class AsymptoteDegenerate(GeoObsError):
    pass


class ZeroForm(GeoObsError):
    pass


class NonPositiveInput(GeoObsError):
    pass


# tracer
class InconsistentInitialState(GeoObsError):
    pass


class LeftChart(GeoObsError):
    pass


class NonConverged(GeoObsError):
    """Shooting failed to hit the target; ``result`` holds the best attempt."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IoFailure(GeoObsError):
    pass
