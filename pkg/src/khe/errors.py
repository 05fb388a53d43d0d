"""Exception types shared across the package."""


class KheError(Exception):
    """Base class for all package errors."""


class ConfigError(KheError):
    """Invalid configuration value (bad m0, CFL out of range, ...)."""


class DomainError(KheError):
    """Argument outside the mathematical domain of an operation."""


class NonPhysicalState(KheError):
    """Density or pressure lost positivity (solver blow-up signal)."""


class ShapeError(KheError):
    """Array shape inconsistent with the grid or with peer arrays."""


class TooFewSamples(KheError):
    """Interpolation stencil does not fit into the sample set."""


class NonUniform(KheError):
    """Sample abscissae are not uniformly spaced."""


class OutOfRange(KheError):
    """Evaluation point outside the covered interval."""


class HierarchyMismatch(KheError):
    """Field level does not belong to the given mesh hierarchy."""


class UnsupportedWeight(KheError):
    """Quadrature weight other than the uniform density."""


class MissingLevel(KheError):
    """A mesh level required for averaging is absent."""


class InterfaceCross(KheError):
    """Perturbed interfaces would overlap for the requested amplitude."""


class EmptyWindow(KheError):
    """Spatial window contains no grid nodes."""


class DegenerateData(KheError):
    """All samples identical; histogram collapses to a single bin."""


class Blowup(NonPhysicalState):
    """Run aborted after positivity failure; carries the failure time."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class MaxStepsExceeded(KheError):
    """Time loop guard tripped."""


class PartialCampaign(KheError):
    """Campaign finished with failed runs; lists the failed (xi, m) pairs."""

    def __init__(self, failed: list[tuple[int, int]]):
        super().__init__(f"campaign incomplete; failed (xi_index, level) pairs: {failed}")
        self.failed = failed


class ConvergenceFailure(KheError):
    """Numerical kernel (SVD) failed to converge."""


class MissingArtifact(KheError):
    """A referenced output file does not exist."""


class HashMismatch(KheError):
    """Artifact was produced under a different configuration."""
