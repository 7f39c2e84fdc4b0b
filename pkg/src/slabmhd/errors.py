"""Exception types shared across the package."""


class SlabError(Exception):
    """Base class for package errors."""


class GridError(SlabError, ValueError):
    """Invalid grid parameters or mismatched grids."""


class ParityError(SlabError, ValueError):
    """A field does not respect its declared reflection parity."""


class ConstraintError(SlabError, ValueError):
    """A field violates the divergence-free or wall boundary constraint."""


class BlowUpError(SlabError, RuntimeError):
    """Raised when the integrator detects non-finite or runaway values.

    ``last_state`` holds the last healthy state so callers can persist it.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class ConfigError(SlabError, ValueError):
    """Invalid experiment configuration."""


class ArtifactError(SlabError, FileNotFoundError):
    """A report was requested for a directory without usable artifacts."""
