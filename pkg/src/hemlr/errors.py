"""Exception types shared across the package.

Grouped by the layer that raises them; everything derives from
:class:`HemlrError` so callers can catch broadly.
"""


class HemlrError(Exception):
    """Base class for all package errors."""


# -- data layer ------------------------------------------------------------

class DataError(HemlrError):
    """Base for input-data problems (maps to CLI exit code 1)."""


class MalformedRow(DataError):
    """CSV row with a column count different from the first row."""


class NonIntegerLabel(DataError):
    """Label field failed to parse as a non-negative integer."""


class EmptyFile(DataError):
    """CSV contained no data rows."""


class LabelOutOfRange(DataError):
    """Class index >= declared class count."""


# -- numeric core ----------------------------------------------------------

class DimensionMismatch(HemlrError):
    """Operand shapes do not conform."""


class DegenerateLikelihood(HemlrError):
    """A per-entry likelihood term underflowed to zero; the log loss
    would be -inf."""


class SingularSystem(HemlrError):
    """Normal system of a polynomial fit is not solvable."""


# -- ciphertext emulator ---------------------------------------------------

class HeError(HemlrError):
    """Base for emulator errors."""


class PayloadTooLarge(HeError):
    """Vector longer than the slot count."""


class LevelMismatch(HeError):
    """Binary op on ciphertexts at different levels; align first."""


class ScaleMismatch(HeError):
    """Addition of ciphertexts at different scale exponents."""


class LevelExhausted(HeError):
    """No multiplicative level left (maps to CLI exit code 3)."""


class NothingToRescale(HeError):
    """Rescale called on a ciphertext already at base scale."""


# -- packing layer ---------------------------------------------------------

class PackingError(HemlrError):
    """Base for packed-matrix errors."""


class MatrixTooWide(PackingError):
    """Padded row width exceeds the slot count."""


class MultiCiphertextUnsupported(PackingError):
    """Single-ciphertext operation applied to a multi-ciphertext matrix."""


class BothOrNeitherTransposed(PackingError):
    """Matmul needs exactly one transposed operand."""


class CapacityExceeded(DataError):
    """Dataset does not fit the upload protocol's ciphertext layout."""


# -- cli -------------------------------------------------------------------

class ConfigError(HemlrError):
    """Invalid configuration (maps to CLI exit code 2)."""
