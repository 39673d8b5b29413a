"""Exception hierarchy for locrad."""


class LocradError(Exception):
    """Base class for all errors raised by this package."""


class UnknownNode(LocradError, KeyError):
    def __init__(self, node_id):
        super().__init__(node_id)
        self.node_id = node_id

    def __str__(self):
        return f"unknown node id {self.node_id!r}"


class ParseError(LocradError, ValueError):
    def __init__(self, line, col, expected, found=None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"line {line}, col {col}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class LinkError(LocradError, ValueError):
    """Foreign key clause references a table or column that was never declared."""


class FormatError(LocradError, ValueError):
    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class InfeasibleParams(LocradError, ValueError):
    pass


class CueInfeasible(LocradError, ValueError):
    pass


class TooFewSamples(LocradError, ValueError):
    pass


class NoPositives(LocradError, ValueError):
    pass


class EmptyName(LocradError, ValueError):
    pass


class PoolExhausted(LocradError, ValueError):
    pass


class ShapeMismatch(LocradError, ValueError):
    pass


class Diverged(LocradError, ArithmeticError):
    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


class Infeasible(LocradError, ValueError):
    pass


class DegenerateLabels(LocradError, ValueError):
    pass


class ZeroVariance(LocradError, ValueError):
    pass


class TooFewPairs(LocradError, ValueError):
    pass


class ZeroPooledVariance(LocradError, ValueError):
    pass


class TooFewPoints(LocradError, ValueError):
    pass


class TooFewTasks(LocradError, ValueError):
    pass


class ConfigError(LocradError, ValueError):
    pass
