class RelayCapError(Exception):
    exit_code = 1


class DimensionMismatch(RelayCapError, ValueError):
    pass


class OverlappingAxes(RelayCapError, ValueError):
    pass


class SymbolOutOfRange(RelayCapError, ValueError):
    pass


class RowNotNormalized(RelayCapError):
    def __init__(
        self,
        x: int,
        total: float,
    ):
        self.x = x
        self.total = total
        super().__init__(f"p(y,y1|x={x}) sums to {total!r}, not 1")


class NotDeterministic(RelayCapError):
    def __init__(
        self,
        x: int,
        y: int,
        y1a: int,
        y1b: int,
    ):
        self.x = x
        self.y = y
        self.y1a = y1a
        self.y1b = y1b
        super().__init__(
            f"relay output is not a function of (x, y): (x={x}, y={y}) "
            f"admits both y1={y1a} and y1={y1b}"
        )


class StateNotRecoverable(NotDeterministic):
    def __init__(
        self,
        x: int,
        y: int,
        y1a: int,
        y1b: int,
    ):
        super().__init__(x, y, y1a, y1b)
        self.args = (
            f"state is not recoverable from (x, y): (x={x}, y={y}) "
            f"admits both s={y1a} and s={y1b}",
        )


class UnsupportedCorrelation(RelayCapError):
    pass


class GuardViolation(RelayCapError):
    pass


class SimulationFailed(RelayCapError):
    pass
