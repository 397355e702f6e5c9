"""Exception hierarchy.

Every error that can be traced back to a concrete frequency or sphere sample
carries it in ``witness`` so that CLI reports can name the offending point.
"""


class TPParError(Exception):
    """Base class for all package errors."""

    exit_code = 3

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConditionFailure(TPParError):
    """A structural condition (ellipticity, complementing, ...) is violated."""

    exit_code = 2


# symbol algebra
class DimensionMismatch(TPParError):
    pass


class DegenerateRoot(ConditionFailure):
    pass


class RootOnRealAxis(ConditionFailure):
    pass


class WrongSplit(ConditionFailure):
    pass


class SingularCharMatrix(ConditionFailure):
    pass


# group fourier
class InvalidGrid(TPParError):
    pass


class StateMismatch(TPParError):
    pass


class MeanNotZero(TPParError):
    pass


# solvers
class SymbolVanishes(ConditionFailure):
    pass


class ClusteredRoots(TPParError):
    pass


class IllConditionedTrace(TPParError):
    pass


class SingularSystem(ConditionFailure):
    pass


# io
class SchemaError(TPParError):
    pass


class MeanModePresent(SchemaError):
    pass


class BadMagic(TPParError):
    pass


class SizeMismatch(TPParError):
    pass
