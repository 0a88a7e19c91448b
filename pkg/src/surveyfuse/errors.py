"""Exception hierarchy shared by all surveyfuse modules."""


class FusionError(Exception):
    """Base class for all surveyfuse errors."""


class SchemaError(FusionError):
    """Invalid harmonization spec (duplicate names, bad categories, bad divisor)."""


class MappingError(FusionError):
    """A raw survey value or column has no harmonized mapping."""


class IngestionError(FusionError):
    """A survey file is missing, malformed, or violates referential integrity."""


class DataError(FusionError):
    """Data violates a value-level contract (negative target, unlabeled donor)."""


class DimensionError(FusionError):
    """Bit-vector lengths or feature dictionaries do not line up."""


class DictionaryMismatchError(FusionError):
    """Two encoded datasets were produced with different feature dictionaries."""


class MatchError(FusionError):
    """Nearest-neighbor matching cannot proceed (empty donor pool)."""
