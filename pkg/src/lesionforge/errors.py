"""Exception hierarchy shared across the toolkit."""


class LesionForgeError(Exception):
    """Base class for all toolkit errors."""


class DimMismatchError(LesionForgeError):
    """Operands have incompatible heights/widths/channels."""


class EmptyMaskError(LesionForgeError):
    """A mask with at least one foreground pixel was required."""


class BadFactorError(LesionForgeError):
    """Downsampling factor does not divide the mask dimensions."""


class EmptyInputError(LesionForgeError):
    """An operation received an empty collection it cannot act on."""


class InvalidPermutationError(LesionForgeError):
    """Ranks for a criterion are not a permutation of 1..k."""


class InconsistentMethodSetError(LesionForgeError):
    """Ranking records disagree on the set of ranked methods."""


class NoFeasiblePlacementError(LesionForgeError):
    """No candidate center admits the region without clipping."""


class VariantMismatchError(LesionForgeError):
    """Surface reference presence contradicts the backend variant."""


class BackendUnavailableError(LesionForgeError):
    """The inpainting backend cannot be reached or is not configured."""


class PoolExhaustedError(LesionForgeError):
    """A background bucket is smaller than the per-condition draw needs."""


class WeightsMissingError(LesionForgeError):
    """A trained checkpoint was required but not found/loaded."""


class NonFiniteLossError(LesionForgeError):
    """Training loss became NaN/Inf; aborted with diagnostics."""


class DuplicateIdError(LesionForgeError):
    """Manifest merge encountered a duplicate record id."""


class ManifestError(LesionForgeError):
    """Manifest file is malformed or violates record invariants."""


class ConfigError(LesionForgeError):
    """Pipeline configuration is invalid."""


class MissingArtifactError(LesionForgeError):
    """An upstream pipeline artifact is absent; names the producing stage."""


class InsufficientCoverageError(LesionForgeError):
    """Too few complete (background, region) pairs to build review sets."""


class DuplicateSubmissionError(LesionForgeError):
    """A ranking for this (session, set) was already stored."""


class UnknownSetError(LesionForgeError):
    """Submission references a set id the session does not contain."""


class EmptyStoreError(LesionForgeError):
    """The ranking store holds no records to report on."""


class GenerationAbortedError(LesionForgeError):
    """Per-sample failure rate during generation exceeded the configured bound."""
