"""Contains all exceptions that the cfsim application can throw."""


class CFSimException(Exception):
    """The most general exception, all other exceptions inherit the CFSimException"""


class ConfigException(CFSimException):
    """Raised for unreadable or invalid configurations, unknown keys and unknown mode names."""


class PowerControlException(CFSimException):
    """
    Raised when the max-min solver cannot finish. Carries the best feasible coefficients found so far
    together with the last SINR bracket of the bisection.
    """
    def __init__(self, message: str, best=None, bracket: tuple[float, float] = None):
        super().__init__(message)
        self.message = message
        self.best = best
        self.bracket = bracket

    def __reduce__(self):
        return PowerControlException, (self.message, self.best, self.bracket)


class DropException(CFSimException):
    """Wraps any failure that happened while evaluating a single drop."""
    def __init__(self, message: str, drop_index: int):
        super().__init__(f"[-] Drop {drop_index}: {message}")
        self.message = message
        self.drop_index = drop_index

    # Worker processes send exceptions back pickled
    def __reduce__(self):
        return DropException, (self.message, self.drop_index)
