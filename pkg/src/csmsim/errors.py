"""Exception hierarchy shared by all csmsim modules."""


class CsmSimError(Exception):
    """Base class for every error raised by csmsim."""

    exit_code = 1


class ContractViolation(CsmSimError, ValueError):
    """A caller broke a documented precondition (shape, dimension, finiteness)."""

    exit_code = 2


class ConfigError(CsmSimError, ValueError):
    exit_code = 2


class ParseError(CsmSimError):
    """Malformed netlist or data file. ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CsmSimError):
    exit_code = 2


class MappingError(CsmSimError):
    exit_code = 2


class NumericalError(CsmSimError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, gate=None, interval=None):
        self.gate = gate
        self.interval = interval
        super().__init__(message)


class TrainingError(NumericalError):
    """Training diverged; ``epoch`` is the first epoch with a non-finite loss."""

    def __init__(self, message, epoch):
        self.epoch = epoch
        super().__init__(f"{message} (epoch {epoch})")


class SearchFailure(CsmSimError):
    """No hidden-layer size met the accuracy threshold; carries the full report."""

    exit_code = 3

    def __init__(self, message, report):
        self.report = report
        super().__init__(message)


class CapacityError(CsmSimError):
    exit_code = 4
