"""Exception types shared across the package."""


class DegeneracyError(RuntimeError):
    """A policy left (numerically) zero no-transmission mass at some stage.

    Raised instead of silently renormalizing: it indicates a misconfigured
    problem (e.g. stopping cost too small for the noise scale), not a
    recoverable state.
    """

    def __init__(self, stage, survival):
        self.stage = stage
        self.survival = survival
        super().__init__(
            f"degenerate policy at stage {stage}: surviving mass {survival:.3e}"
        )


class FitError(RuntimeError):
    """Maximum-likelihood fit failed (degenerate sample or no convergence)."""


class ProtocolError(RuntimeError):
    """Transmit flag and payload disagree on the sensing-unit/estimator link."""


class ParseError(ValueError):
    """Malformed input file row."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TrackValidationError(ValueError):
    """Structurally valid track file with inconsistent content."""


class HorizonMismatchError(ValueError):
    """Trajectory length does not match the scheme horizon."""


class AssemblyError(ValueError):
    """Solution chain is incomplete and cannot be assembled into a scheme."""
