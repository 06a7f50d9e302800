"""Exception types shared across the package."""


class TryOnError(Exception):
    """Base class for all package errors."""


class DimensionError(TryOnError, ValueError):
    """Tensor shapes or spatial sizes are incompatible."""


class ArgumentError(TryOnError, ValueError):
    """An argument is outside its legal range."""


class ContractError(TryOnError):
    """A pluggable component broke its output contract."""


class AnnotationError(TryOnError):
    """A person annotation (parse map, keypoints) is unusable."""


class AssetError(TryOnError):
    """A dataset asset is missing or cannot be decoded."""

    def __init__(self, asset, path, reason):
        self.asset = asset
        self.path = str(path)
        self.reason = reason
        super().__init__(f"{asset}: {reason} ({path})")


class SemanticError(TryOnError):
    """A caption or attribute record is invalid."""


class ProvenanceError(TryOnError):
    """Checkpoints or reports do not share a configuration fingerprint."""
