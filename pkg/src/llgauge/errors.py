"""Exception types shared across the lab."""


class LabError(Exception):
    """Base class for all llgauge errors."""


class ConfigError(LabError):
    """Invalid configuration: bad grid sizes, CFL violation, unknown experiment."""


class SolverInstabilityError(LabError):
    """Non-finite values or runaway norm drift during time stepping."""


class HorizonError(LabError):
    """A scale factor (a+bt or d-bt) reached zero inside the requested interval."""


class DomainCoverageError(LabError):
    """Radial profile does not cover the Cartesian target domain."""


class PoleError(LabError):
    """Frame chart degenerates (s3 too close to +1) and no fallback rotation helps."""


class GaugeExtractionError(LabError):
    """Frame-to-fields extraction produced inconsistent connection coefficients."""


class CompatibilityError(LabError):
    """Path-ordered frame integration disagrees between axis orders."""


class ExtrapolationError(LabError):
    """Requested time lies outside the stored radial run."""
