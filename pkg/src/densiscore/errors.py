"""Exception types raised across the package."""


class DensiscoreError(Exception):
    """Base class for all package errors."""


class DegenerateSample(DensiscoreError, ValueError):
    """A sample has zero spread (or too few points) along some axis."""


class OptimizationFailed(DensiscoreError, RuntimeError):
    """No bandwidth candidate produced a finite cross-validation objective."""


class DimensionMismatch(DensiscoreError, ValueError):
    pass


class NonFiniteWeight(DensiscoreError, ValueError):
    """An inverse-density weight would be infinite or NaN."""


class ZeroDenominator(DensiscoreError, ArithmeticError):
    """A relative metric is undefined because its normalizer vanishes."""


class SingularSystem(DensiscoreError, RuntimeError):
    pass


class TooFewSamples(DensiscoreError, ValueError):
    pass
