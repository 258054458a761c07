"""Exception types shared across the package."""


class RieszLabError(Exception):
    """Base class for all package errors."""


class InvalidAddress(RieszLabError, ValueError):
    """A vertex or end word violates the label alphabet of T_q."""


class EqualEnds(RieszLabError, ValueError):
    """The confluent of an end with itself is not a vertex."""


class EmptySet(RieszLabError, ValueError):
    pass


class PositiveMeasure(RieszLabError, ValueError):
    """A boundary set was required to be lambda-null but is not."""


class OutsideDomain(RieszLabError, KeyError):
    """A function value outside its stored ball was requested without an extension."""


class NotSubharmonic(RieszLabError, ValueError):
    def __init__(self, witness, message=None):
        self.witness = witness
        super().__init__(message or f"not subharmonic at {witness}")


class RadiusExhausted(RieszLabError, ValueError):
    pass


class OutOfRange(RieszLabError, ValueError):
    pass


class SingularSystem(RieszLabError, ArithmeticError):
    pass


class NotIntegrable(RieszLabError, ValueError):
    pass


class HypothesisViolated(RieszLabError, ValueError):
    def __init__(self, witness, message=None):
        self.witness = witness
        super().__init__(message or f"hypothesis violated at {witness}")


class NotTransient(RieszLabError, ValueError):
    pass


class ConfigInvalid(RieszLabError, ValueError):
    pass


class CheckFailed(RieszLabError):
    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__(f"{len(self.failures)} check(s) failed")
