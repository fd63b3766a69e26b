"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class DetwaveError(Exception):
    """Base class for all package errors."""


class ResolutionError(DetwaveError, ValueError):
    """A requested band or wavenumber is not resolved by the grid."""


class AdmissibilityError(DetwaveError, ValueError):
    """A tuple (r, delta) lies outside the admissible set."""


class CFLError(DetwaveError):
    """Raised when a time step would violate the CFL limit.

    ``admissible_dt`` is the largest step satisfying the limit for the
    current state.
    """

    def __init__(self, cfl, admissible_dt):
        self.cfl = cfl
        self.admissible_dt = admissible_dt
        super().__init__(
            f"CFL number {cfl:.3g} exceeds 0.5; admissible dt <= {admissible_dt:.6g}"
        )


class LambdaInfiniteError(DetwaveError):
    """The determining wavenumber is infinite (under-resolved flow)."""

    def __init__(self, t, which="u"):
        self.t = t
        self.which = which
        super().__init__(
            f"determining wavenumber of {which} is infinite at t={t:.6g}; "
            "the flow is not resolved by the band range"
        )


class SnapshotError(DetwaveError, IOError):
    """Malformed or incompatible snapshot file."""


class ConfigError(DetwaveError, ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)
