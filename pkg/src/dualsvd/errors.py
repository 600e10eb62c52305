"""Exception types raised by dualsvd."""


class DualSvdError(Exception):
    """Base class for all library errors."""


class InfinitesimalDivisionError(DualSvdError, ZeroDivisionError):
    """Division by a dual number whose standard part is zero."""


class DimensionError(DualSvdError, ValueError):
    pass


class SingularStandardPartError(DualSvdError, ValueError):
    """The standard part of a square dual matrix is (numerically) singular."""


class InfeasibleError(DualSvdError):
    """The existence condition for the compact dual SVD fails.

    ``residual`` is the Frobenius norm of the doubly projected infinitesimal
    part and ``threshold`` the cut it was compared against.
    """

    def __init__(self, residual: float, threshold: float, what: str = "compact dual SVD"):
        self.residual = residual
        self.threshold = threshold
        super().__init__(
            f"{what} does not exist: existence residual {residual:.6g} exceeds threshold {threshold:.3g}"
        )


class DegenerateGapError(DualSvdError):
    """Two distinct singular-value blocks are too close to separate safely."""


class MultiplicityError(DualSvdError):
    """An operation that needs simple singular values met a repeated one."""


class ContainerFormatError(DualSvdError, ValueError):
    """Malformed matrix CSV or inconsistent container."""
