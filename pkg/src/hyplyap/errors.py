"""Exception types raised by hyplyap."""


class HyplyapError(Exception):
    """Base class for all library errors."""


class InvalidParameterError(HyplyapError, ValueError):
    pass


class InvalidWeightError(HyplyapError, ValueError):
    pass


class UnsupportedShapeError(HyplyapError, ValueError):
    pass


class NumericalBlowupError(HyplyapError, ArithmeticError):
    """The state became non-finite or exceeded the blowup threshold."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"numerical blowup at step n={step}")


class NoCertificateError(HyplyapError, ValueError):
    """No positive decay rate is available, so no envelope can be built."""


class SteadyStateError(HyplyapError, ArithmeticError):
    """Steady-state integration left the subcritical regime."""

    def __init__(self, x: float, message: str = ""):
        self.x = x
        super().__init__(message or f"steady state became (trans)critical near x={x:.6g}")


class SingularGainError(HyplyapError, ZeroDivisionError):
    pass


class ConfigError(HyplyapError, ValueError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
