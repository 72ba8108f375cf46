"""Exception types shared across the stationprint pipeline."""


class StationprintError(Exception):
    """Base class for all stationprint errors."""


class MalformedCatalogError(StationprintError):
    """Catalog file is not valid JSON or entries are missing required fields."""


class CatalogConflictError(StationprintError):
    """Two catalog entries share the same station id."""


class StreamUnreachableError(StationprintError):
    """Stream could not be opened (connect failure or timeout)."""


class NotAStreamError(StationprintError):
    """URL responded, but not with an audio stream."""


class DemuxError(StationprintError):
    """In-band metadata framing violated; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CodecUnsupportedError(StationprintError):
    """No decoder registered for the stream's content type."""


class ShapeError(StationprintError):
    """Input dimensions do not match what the model expects."""


class TrainingDivergedError(StationprintError):
    """Loss became non-finite during training; carries the epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


class DegenerateInputError(StationprintError):
    """Input has too little structure for the requested fit."""


class FilterbankDegenerateError(StationprintError):
    """Requested mel resolution leaves at least one filter empty."""


class EmptyPartitionError(StationprintError):
    """A fingerprint partition has no samples to normalize."""


class StationNotFoundError(StationprintError):
    """Query referenced a station id absent from the store."""


class InsufficientScreeError(StationprintError):
    """Scree has too few points for elbow selection."""


class StoreVersionError(StationprintError):
    """Fingerprints from different model versions were mixed."""


class ConfigError(StationprintError):
    """Pipeline configuration is missing or inconsistent."""


class StageError(StationprintError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: str):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
