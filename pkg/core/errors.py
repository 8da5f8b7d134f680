"""
Exception hierarchy for hardyscope.
Precondition violations on plain arguments raise ValueError directly; the classes
below carry extra context the CLI reports.
"""

from typing import Any, Optional


class HardyScopeError(Exception):
    """Base class for all hardyscope failures"""


class SpecError(HardyScopeError, ValueError):
    """Malformed or inconsistent domain spec"""

    def __init__(self, message: str, obstacle_index: Optional[int] = None):
        self.obstacle_index = obstacle_index
        if obstacle_index is not None:
            message = f"obstacle #{obstacle_index}: {message}"
        super().__init__(message)


class ProfileExhaustedError(HardyScopeError):
    """Too few profile entries survive the statistical-zero filter"""

    def __init__(self, kept: int, required: int):
        self.kept = kept
        self.required = required
        super().__init__(
            f"profile exhausted: {kept} usable entries, at least {required} required"
        )


class BracketError(HardyScopeError, ValueError):
    """Bisection bracket does not straddle a transition"""


class StageFailure(HardyScopeError):
    """An arc-width search stage could not produce a satisfied certificate"""

    def __init__(self, stage: int, certificate: Any):
        self.stage = stage
        self.certificate = certificate
        super().__init__(
            f"stage {stage} failed at radius {certificate.radius:g}: "
            f"omega={certificate.omega.mean:.4g} +/- {certificate.omega.stderr:.2g}, "
            f"target={certificate.target:.4g}"
        )


class ConstantsSearchError(HardyScopeError):
    """Doubling search for class-D constants ran past its radius cap"""
