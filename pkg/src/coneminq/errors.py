"""Exception and warning types raised by coneminq."""


class ConeminqError(Exception):
    """Base class for all errors raised by this package."""


class NotPointed(ConeminqError):
    pass


class DegenerateCone(ConeminqError):
    pass


class UnsupportedDim(ConeminqError):
    pass


class UnsupportedCone(ConeminqError):
    """Operation needs a polyhedral (or planar) cone."""


class OutsideDomain(ConeminqError):
    """A direction lies outside the open spherical domain it must belong to."""


# radial/support use the name from the operation contracts
OutsideOmega = OutsideDomain


class InvalidDirection(ConeminqError):
    pass


class NonPositive(ConeminqError):
    pass


class Unbounded(ConeminqError):
    pass


class MismatchedNormals(ConeminqError):
    pass


class InvalidP(ConeminqError):
    pass


class EmptyTruncation(ConeminqError):
    pass


class ZeroMass(ConeminqError):
    pass


class NonNegativityViolation(ConeminqError):
    pass


class TooFewSamples(ConeminqError):
    pass


class InputError(ConeminqError):
    """Malformed input file; carries a field path for diagnostics."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UnsupportedRegimeWarning(UserWarning):
    pass


class InactiveAtomWarning(UserWarning):
    pass


class NotConvergedWarning(UserWarning):
    pass
