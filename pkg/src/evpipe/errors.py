"""Exception taxonomy shared across the pipeline."""


class EvpipeError(Exception):
    """Base class for all pipeline errors."""


# --- windowing / histograms ---------------------------------------------

class NonMonotonicFrames(EvpipeError):
    """Frame timestamps are not strictly increasing."""


class EmptyFrameList(EvpipeError):
    pass


class EventOutOfBounds(EvpipeError):
    """An event coordinate exceeds the target raster dimensions."""


class NonDivisibleFactor(EvpipeError):
    pass


class CountOverflow(EvpipeError):
    """A histogram cell exceeded the u16 range with saturation disabled."""


# --- ingest ---------------------------------------------------------------

class BadMagic(EvpipeError):
    pass


class UnsupportedVersion(EvpipeError):
    pass


class TruncatedRecord(EvpipeError):
    pass


class ReorderViolation(EvpipeError):
    """An event is out of order by more than the reorder-buffer tolerance."""


class CoordinateOutOfBounds(EvpipeError):
    """A CD event lies outside the declared sensor dimensions."""


class MalformedRow(EvpipeError):
    pass


class BoundsViolation(EvpipeError):
    """A twist sample exceeds the platform sanity bounds."""


# --- clock sync -----------------------------------------------------------

class InsufficientPulses(EvpipeError):
    pass


class NoStableMatch(EvpipeError):
    """Trigger/frame pairing collapsed below the minimum usable count."""


# --- geometry ---------------------------------------------------------------

class TooFewPoints(EvpipeError):
    pass


class DegenerateConfiguration(EvpipeError):
    pass


class SingularHomography(EvpipeError):
    pass


# --- actions ----------------------------------------------------------------

class NonMonotonicInput(EvpipeError):
    pass


class LengthMismatch(EvpipeError):
    pass


# --- container ----------------------------------------------------------------

class DimMismatch(EvpipeError):
    pass


class ChecksumMismatch(EvpipeError):
    def __init__(self, message, record_index=None):
        super().__init__(message)
        self.record_index = record_index


class TruncatedBlob(EvpipeError):
    pass


class ManifestBlobDisagreement(EvpipeError):
    pass


class TooFewEpisodes(EvpipeError):
    pass


# --- eval ---------------------------------------------------------------------

class EmptyInput(EvpipeError):
    pass


class MissingPredictions(EvpipeError):
    pass


# --- synth / cli -----------------------------------------------------------------

class ConfigInvalid(EvpipeError):
    pass
