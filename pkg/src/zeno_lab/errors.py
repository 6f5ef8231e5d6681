"""Exception hierarchy shared by all zeno_lab modules."""


class ZenoLabError(Exception):
    """Base class for every error raised deliberately by zeno_lab."""


class ShapeError(ZenoLabError, ValueError):
    """Operand shapes are inconsistent (non-square, dimension mismatch)."""


class HermiticityError(ZenoLabError, ValueError):
    """A matrix required to be Hermitian is not, within tolerance."""


class NearDefectiveError(ZenoLabError, ArithmeticError):
    """Eigenvector basis is too ill-conditioned to be trusted."""


class ConvergenceError(ZenoLabError, ArithmeticError):
    """An iterative routine failed to converge."""


class HigherOrderDegeneracyError(ZenoLabError, ArithmeticError):
    """First-order perturbation theory does not lift a degeneracy."""


class StationaryStateError(ZenoLabError, ArithmeticError):
    """The state has zero energy variance, so the Zeno time is infinite."""


class SectorTrackingError(ZenoLabError, ArithmeticError):
    """A Zeno sector cannot be followed unambiguously across a schedule."""


class InvalidStateError(ZenoLabError, ValueError):
    """A state vector or density matrix violates its preconditions."""


class ModelError(ZenoLabError, ValueError):
    """Unknown model name or invalid model parameters."""
