"""Exception types raised across the package."""


class EnhancementError(Exception):
    """Base class; ``code`` is the machine-parseable name used by the CLI."""

    @property
    def code(self):
        return type(self).__name__


class EmptyInput(EnhancementError, ValueError):
    pass


class NonFiniteInput(EnhancementError, ValueError):
    pass


class InvalidBasisSize(EnhancementError, ValueError):
    pass


class LayoutMismatch(EnhancementError, ValueError):
    pass


class ShapeMismatch(EnhancementError, ValueError):
    pass


class NumericalDivergence(EnhancementError, FloatingPointError):
    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class SampleRateMismatch(EnhancementError, ValueError):
    pass


class ChunkSizeMismatch(EnhancementError, ValueError):
    pass


class StreamingUnsupported(EnhancementError, ValueError):
    pass


class DegenerateReference(EnhancementError, ValueError):
    pass


class ExtractorInconsistent(EnhancementError, ValueError):
    pass


class GradientUndefined(EnhancementError, ArithmeticError):
    pass


class UnsupportedChannels(EnhancementError, ValueError):
    pass


class UnsupportedRate(EnhancementError, ValueError):
    pass


class UnsupportedEncoding(EnhancementError, ValueError):
    pass


class MalformedWav(EnhancementError, ValueError):
    pass


class MalformedContainer(EnhancementError, ValueError):
    pass


class WeightsConfigMismatch(EnhancementError, ValueError):
    pass


class ConfigError(EnhancementError, ValueError):
    pass
