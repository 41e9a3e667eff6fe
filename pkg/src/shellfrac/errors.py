"""Exception types shared across the solver."""


class ShellFracError(Exception):
    """Base class for all solver errors."""


class MeshLineError(ShellFracError):
    """A mesh line insertion violated a precondition."""


class DomainError(ShellFracError):
    """A parametric point lies outside the element it was evaluated on."""


class TransferShapeError(ShellFracError):
    """Control values passed to a transfer map have the wrong length."""


class SingularGeometryError(ShellFracError):
    """The surface metric is degenerate at a quadrature point."""

    def __init__(self, message: str, element_id: int | None = None):
        super().__init__(message)
        self.element_id = element_id


class SingularLayerError(ShellFracError):
    """A shell layer metric is degenerate (|xi| * curvature >= 1)."""


class ConstraintConflictError(ShellFracError):
    """Two boundary conditions disagree on the same dof."""

    def __init__(self, message: str, dof: int | None = None):
        super().__init__(message)
        self.dof = dof


class StepRejected(ShellFracError):
    """A time step failed to converge and should be retried with smaller dt."""


class RunAborted(ShellFracError):
    """The transient driver hit an unrecoverable condition (dt underflow etc.)."""
