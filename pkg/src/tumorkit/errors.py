"""Exception hierarchy shared by every tumorkit module."""


class TumorKitError(Exception):
    """Base class for all errors raised by tumorkit."""


class FormatError(TumorKitError, ValueError):
    """A file could be read but its contents are malformed."""


class UnsupportedError(TumorKitError, ValueError):
    """A well-formed file uses a feature outside the supported subset."""


class IoError(TumorKitError, OSError):
    """Reading or writing a file failed at the OS level."""


class ShapeError(TumorKitError, ValueError):
    """Operands have incompatible dimensions or spacing."""


class EmptyMaskError(TumorKitError, ValueError):
    """An operation needs at least one true voxel and got none."""


class LabelError(TumorKitError, ValueError):
    """A label volume contains values outside {0, 1, 2, 3}."""


class RangeError(TumorKitError, ValueError):
    """A probability lies outside [0, 1]."""


class ArityError(TumorKitError, ValueError):
    """Too few operands were supplied."""


class ConfigError(TumorKitError, ValueError):
    """A configuration value violates its invariant."""


class InfeasibleError(TumorKitError, RuntimeError):
    """A randomized construction could not satisfy its constraints."""


class DegenerateError(TumorKitError, ArithmeticError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


class IncompleteError(TumorKitError, ValueError):
    """A score table is missing a (model, case) cell."""
