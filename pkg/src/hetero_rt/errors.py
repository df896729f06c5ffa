"""Exception hierarchy for the runtime and simulator."""


class HeteroRtError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateWorkRequestError(HeteroRtError):
    """A work request id was submitted twice."""


class RoutingError(HeteroRtError):
    """A message targeted an unknown chare or entry method."""


class ConsistencyError(HeteroRtError):
    """A completion referenced an unknown or already-completed work request."""


class ClockError(HeteroRtError):
    """Simulated time moved backwards."""


class GroupingError(HeteroRtError):
    """Work requests of different kernel classes were combined."""


class KernelFitError(HeteroRtError):
    """A kernel cannot fit even one block on the device."""


class CapacityError(HeteroRtError):
    """Device memory cannot satisfy an allocation even after eviction."""


class MeasurementError(HeteroRtError):
    """A performance sample had non-positive item count or duration."""


class LivenessError(HeteroRtError):
    """The event loop ran dry while work was still pending."""


class TraceFormatError(HeteroRtError):
    """A trace file line could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"trace line {line_no}: {reason}")
        self.line_no = line_no


class ConfigError(HeteroRtError):
    """An experiment configuration value is invalid."""
