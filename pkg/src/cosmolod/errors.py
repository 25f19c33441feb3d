"""Exception types shared across the package."""


class CosmolodError(Exception):
    """Base class for all package errors."""


class CodecError(CosmolodError, ValueError):
    """Non-finite input or malformed value fed to a codec."""


class FormatError(CosmolodError, ValueError):
    """Corrupt or unsupported on-disk / wire bytes."""


class RangeError(CosmolodError, ValueError):
    """Value outside its documented range (depth overflow, bad octant, ...)."""


class CacheError(CosmolodError, ValueError):
    """Cache operation that cannot be satisfied (item larger than capacity)."""
