"""Exception types shared across the package."""


class FrogboundError(Exception):
    """Base class for all domain errors raised by this package."""


class OutOfRange(FrogboundError):
    """A drift parameter lies outside the open interval (1/(d+1), 1/2)."""


class ArityMismatch(FrogboundError):
    """Two parameter sets that must differ in arity by exactly one do not."""


class NegativeExponent(FrogboundError):
    """A polynomial assembled with a negative exponent; the drift is too small
    or the assembly is buggy."""


class ResourceExhausted(FrogboundError):
    """A certified computation hit its precision or subdivision budget without
    reaching a sound verdict."""


class SearchExhausted(FrogboundError):
    """No candidate drift value could be certified."""
