class SpotSimError(Exception):
    pass


class TraceParseError(SpotSimError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TraceValidationError(SpotSimError):
    pass


class OutOfRangeError(SpotSimError):
    pass


class ConfigError(SpotSimError):
    pass


class NeverAvailableError(SpotSimError):
    """The price never drops below the bid anywhere in the trace."""


class DoesNotTerminate(SpotSimError):
    """Failure before completion is certain, so the expected time is unbounded."""


class NoFeasibleOfferError(SpotSimError):
    pass


class StateMachineError(SpotSimError):
    pass
