"""Exception hierarchy for the toolkit."""


class TCPRError(Exception):
    """Base class for every error raised by this package."""


# -- feature banks ---------------------------------------------------------

class BankFormatError(TCPRError):
    """A bank file could not be decoded."""


class BadMagic(BankFormatError):
    pass


class DimMismatch(BankFormatError):
    pass


class LabelOutOfRange(BankFormatError):
    pass


class NonFiniteValue(BankFormatError):
    pass


class ClassOutOfRange(TCPRError):
    pass


class IoFailure(TCPRError):
    pass


# -- numerical degeneracies ------------------------------------------------
#
# Anything deriving from DegenerateInput marks an episode as failed instead
# of aborting a whole evaluation run.

class DegenerateInput(TCPRError):
    pass


class ZeroVector(DegenerateInput):
    pass


class ZeroAfterProjection(DegenerateInput):
    pass


class ZeroStd(DegenerateInput):
    pass


class NonFiniteLoss(DegenerateInput):
    """Gradient descent diverged; lower the learning rate."""


# -- configuration / episode level ------------------------------------------

class MissingBase(TCPRError):
    pass


class MissingQuery(TCPRError):
    pass


class EmptyClass(TCPRError):
    pass


class InsufficientClasses(TCPRError):
    pass


class InsufficientSamples(TCPRError):
    pass


class AllEpisodesFailed(TCPRError):
    pass


class TooFewSamples(TCPRError):
    """Fewer than two values were given to a confidence interval.

    The arithmetic mean is still available as ``mean``.
    """

    def __init__(self, mean, message="need at least 2 samples for a confidence interval"):
        super().__init__(message)
        self.mean = mean
