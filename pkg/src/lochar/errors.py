"""Exception and warning types raised across the package."""


class LocharError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(LocharError, ValueError):
    pass


class DegeneratePort(LocharError, ValueError):
    """A first-row or first-column entry vanishes, so no real-bordered form exists."""


class ZeroCountChannel(LocharError, ValueError):
    """A single-photon count used as a denominator is zero."""

    def __init__(self, i, j, b):
        super().__init__(f"zero count in channel output={i} input={j} repetition={b}")
        self.i, self.j, self.b = i, j, b


class FitFailure(LocharError, RuntimeError):
    """Every starting point of a curve fit diverged."""

    def __init__(self, message, best=None, ports=None):
        if ports is not None:
            message = f"{message} (curve {ports})"
        super().__init__(message)
        self.best = best
        self.ports = ports


class MissingCurve(LocharError, KeyError):
    def __init__(self, ports):
        super().__init__(f"no coincidence curve for ports {tuple(ports)}")
        self.ports = tuple(ports)

    def __str__(self):
        return self.args[0]


class UnstableSign(LocharError, RuntimeError):
    """No reference tuple gives a stable sign for an argument."""

    def __init__(self, i, j, margin=None):
        super().__init__(f"unstable sign for entry ({i}, {j}), margin={margin}")
        self.i, self.j, self.margin = i, j, margin


class UnstableSignWarning(UserWarning):
    pass


class SingularSystem(LocharError, ArithmeticError):
    pass


class NegativeDiagonal(LocharError, ArithmeticError):
    pass


class DiagonalClampWarning(UserWarning):
    """Solved diagonal factors were non-positive or inconsistent and got clamped."""


class IncompleteAcquisition(LocharError, RuntimeError):
    def __init__(self, missing):
        self.missing = sorted(tuple(m) for m in missing)
        super().__init__(
            f"insufficient events for {len(self.missing)} port tuple(s): {self.missing}"
        )


class BootstrapUnstable(LocharError, RuntimeError):
    def __init__(self, dropped, total):
        super().__init__(f"{dropped} of {total} bootstrap rounds failed")
        self.dropped, self.total = dropped, total
