"""Exception hierarchy shared by all nivtest modules."""


class NivTestError(Exception):
    """Base class for all errors raised by nivtest."""


class InputError(NivTestError, ValueError):
    """Invalid user input (shapes, ranges, domains)."""


class NonSquareError(InputError):
    pass


class NotSymmetricError(InputError):
    pass


class NonFiniteError(InputError):
    pass


class DimensionMismatchError(InputError):
    pass


class OutOfDomainError(InputError):
    pass


class BasisCollisionError(InputError):
    pass


class NumericalError(NivTestError, ArithmeticError):
    """A numerical routine failed to produce a usable answer."""


class DidNotConvergeError(NumericalError):
    pass


class IntegrationFailureError(NumericalError):
    pass


class DegenerateMixtureError(NumericalError):
    pass
