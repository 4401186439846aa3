"""Exception types shared across the package."""


class IsacAllocError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(IsacAllocError):
    """Vector/matrix dimensions inconsistent with the declared layout."""


class AsymmetricInput(IsacAllocError):
    """Matrix expected to be symmetric/Hermitian is not, beyond tolerance."""


class IndexOutOfRange(IsacAllocError):
    """Antenna or block index outside its valid range."""


class NumericalBreakdown(IsacAllocError):
    """Linear algebra failed (non-finite data, factorization failure)."""


class SolverFailure(IsacAllocError):
    """A conic subproblem did not return a usable solution."""


class DegenerateRegion(IsacAllocError):
    """Uncertainty region degenerates to a point; ratio undefined."""


class DegenerateNullSpace(IsacAllocError):
    """Stacked user channels are rank deficient; ZF directions undefined."""


class RankViolation(IsacAllocError):
    """Beamforming matrix is not numerically rank one."""

    def __init__(self, ratio, k=None, m=None):
        self.ratio = ratio
        self.k = k
        self.m = m
        where = "" if k is None else f" for user {k}, snapshot {m}"
        super().__init__(
            f"eigenvalue ratio {ratio:.3e} exceeds rank tolerance{where}"
        )


class MaxInnerIterations(IsacAllocError):
    """Inner approximation loop hit its iteration cap without settling."""


class ConfigError(IsacAllocError):
    """Invalid or inconsistent system configuration."""
