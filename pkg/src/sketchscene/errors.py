"""Exception taxonomy shared across the package.

Every error raised by library code derives from :class:`SketchSceneError`
so callers can catch the whole family with one clause.  CLI and service
layers map these onto exit codes / HTTP statuses.
"""

from __future__ import annotations


class SketchSceneError(Exception):
    """Base class for all package errors."""


class ShapeError(SketchSceneError, ValueError):
    """An array has the wrong shape, dtype, or incompatible dimensions."""


class RangeError(SketchSceneError, ValueError):
    """A scalar argument (timestep, factor, alpha, ...) is out of range."""


class MaskError(SketchSceneError, ValueError):
    """A mask is not binary or does not match its latent geometry."""


class NumericError(SketchSceneError, ValueError):
    """A tensor contains NaN or Inf where finite values are required."""


class ConfigError(SketchSceneError, ValueError):
    """A configuration value is invalid (unknown kind, bad range, ...)."""


class ParseError(SketchSceneError, ValueError):
    """A document could not be parsed.

    ``offset`` is the byte offset of the first error when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaVersionError(ParseError):
    """A document declares a schema_version this build does not support."""


class ValidationFailure(SketchSceneError, ValueError):
    """A scene or config failed validation; carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(v.code for v in self.violations)
        super().__init__(f"validation failed: {lines}")


class TokenizationError(SketchSceneError, ValueError):
    """Prompt text cannot be tokenized (too long, malformed slot, ...)."""


class BindingError(SketchSceneError, ValueError):
    """An identity token has no bound embedding vector."""


class CapabilityError(SketchSceneError, RuntimeError):
    """The active backend does not support the requested operation."""


class AdapterError(SketchSceneError, RuntimeError):
    """Base class for failures while talking to an external tool."""


class AdapterConnectivityError(AdapterError):
    """The external tool is unreachable or timed out."""


class AdapterContractError(AdapterError):
    """The external tool returned a malformed or out-of-contract reply."""


class EmptyMaskError(SketchSceneError, RuntimeError):
    """Segmentation produced an empty mask after cleanup."""


class ObjectGenerationError(SketchSceneError, RuntimeError):
    """Object generation failed after exhausting retries.

    ``object_id`` names the failing annotation.
    """

    def __init__(self, message: str, object_id: str):
        super().__init__(message)
        self.object_id = object_id


class PlacementError(SketchSceneError, ValueError):
    """An asset cannot be placed at its annotation box."""


class NotFoundError(SketchSceneError, KeyError):
    """A scene, job, or artifact id does not exist."""


class ConflictError(SketchSceneError, RuntimeError):
    """Optimistic-concurrency revision mismatch."""


class JobStateError(SketchSceneError, RuntimeError):
    """An operation is not valid for the job's current state."""
