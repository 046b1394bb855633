"""Exception types shared across the package."""


class SynthfaceError(Exception):
    """Base class for all package errors."""


class ConfigError(SynthfaceError):
    """Invalid configuration or parameter value (usage error)."""


class ModelFormatError(SynthfaceError):
    """Malformed model file or a model invariant violation."""


class PriorFormatError(SynthfaceError):
    """Malformed illumination prior file."""


class GeometryError(SynthfaceError):
    """Degenerate geometry (point behind camera, collapsed mesh, ...)."""


class DatasetError(SynthfaceError):
    """Dataset generation or manifest verification failure."""


class EvalFormatError(SynthfaceError):
    """Malformed embeddings, pair list, or template file."""
