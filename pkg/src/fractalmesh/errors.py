"""Exception hierarchy shared by every stage of the pipeline."""


class FractalMeshError(Exception):
    """Base class for all toolkit errors."""

    stage = "unknown"


class InputError(FractalMeshError, ValueError):
    """Malformed or out-of-contract input."""


class MeshLookupError(FractalMeshError, KeyError):
    """Unknown mesh ID (including the failure sentinel)."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown mesh id"


class MeshValidationError(FractalMeshError):
    """A mesh violates closure or arity; ``entry_id`` names the offender."""

    def __init__(self, message, entry_id=None):
        super().__init__(message)
        self.entry_id = entry_id


class DivergenceError(FractalMeshError, RuntimeError):
    """The integrator hit its step cap before the next section event."""

    stage = "simulate"

    def __init__(self, message, state=None, disturbance=None):
        super().__init__(message)
        self.state = state
        self.disturbance = disturbance


class EmptySeedError(FractalMeshError):
    """Every seed initial condition failed while settling into its gait."""

    stage = "seed"


class PartialMeshError(FractalMeshError):
    """The state cap tripped; ``report`` holds the partial build."""

    stage = "mesh"

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class ConvergenceError(FractalMeshError, RuntimeError):
    """Power iteration did not reach tolerance."""

    stage = "spectral"

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class UnsupportedSpectrumError(ConvergenceError):
    """Several eigenvalues share the dominant modulus (oscillating iterate)."""


class DomainError(FractalMeshError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class RecurrentClassError(FractalMeshError):
    """Some transient states can never reach failure, so (I - Q) is singular."""

    stage = "mfpt"

    def __init__(self, message, states):
        super().__init__(message)
        self.states = list(states)
