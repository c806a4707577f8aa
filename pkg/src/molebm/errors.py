"""Exception hierarchy.

Every error raised on bad input derives from :class:`DataError`; numerical
aborts derive from :class:`NumericalError`. The CLI maps these two families
to distinct exit codes.
"""


class MolEBMError(Exception):
    pass


class DataError(MolEBMError, ValueError):
    """Input that violates a documented precondition."""


class NumericalError(MolEBMError, ArithmeticError):
    """A computation produced non-finite values."""


class IndexOutOfVocab(DataError):
    pass


class TooManyAtoms(DataError):
    pass


class DuplicateBond(DataError):
    pass


class InvalidPermutation(DataError):
    pass


class EmptyGraph(DataError):
    pass


class EmptySet(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DimsMismatch(DataError):
    pass


class VocabMismatch(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MissingProperty(DataError):
    pass


class DegenerateStats(DataError):
    pass


class EmptyComposite(DataError):
    pass


class Disconnected(DataError):
    pass


class ConfigError(DataError):
    pass


class CheckpointError(DataError):
    pass


class FormatVersionMismatch(CheckpointError):
    pass


class ChecksumMismatch(CheckpointError):
    pass


class ParseError(DataError):
    """Parse failure carrying a 1-based line and/or 0-based column."""

    def __init__(self, message, line=None, position=None):
        self.detail = message
        self.line = line
        self.position = position
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class UnknownAtomSymbol(ParseError):
    pass


class NonFiniteEnergy(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass
