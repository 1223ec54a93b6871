"""Exception and warning types raised across the package."""


class KramersError(Exception):
    """Base class for all errors raised by this package."""


class AssumptionViolated(KramersError):
    """A structural hypothesis on the landscape (Morse, heteroclinic targets) fails."""

    def __init__(self, message, item=None):
        super().__init__(message)
        self.item = item


# landscape
class UnknownPotential(KramersError, KeyError):
    pass


class DegenerateCritical(AssumptionViolated):
    """A critical point has a Hessian eigenvalue within tol_morse of zero."""


class SpectralAmbiguity(AssumptionViolated):
    """The drift Jacobian at an index-1 point does not have a unique real unstable eigenvalue."""


class NonConvergenceWarning(UserWarning):
    """A Newton seed did not converge and was dropped."""


# heights
class DescentStall(KramersError):
    pass


class LeftBox(KramersError):
    pass


class HeightUnreachable(KramersError):
    pass


class TooFewMinima(AssumptionViolated):
    pass


class GateDegeneracyWarning(UserWarning):
    pass


# reduced chain
class NegativeDet(AssumptionViolated):
    pass


class SingularSystem(KramersError):
    pass


# local analysis
class ImaginaryAxisEigen(AssumptionViolated):
    pass


class NoExit(KramersError):
    pass


class UnstableA(KramersError):
    pass


class NoValidRadius(KramersError):
    pass


# test function
class OutsideRectangle(KramersError, ValueError):
    pass


# simulation
class NonFinite(KramersError):
    pass


class QuadratureFailure(KramersError):
    pass


class StepSizeWarning(UserWarning):
    pass


# cli
class MissingStageOutput(KramersError):
    pass
