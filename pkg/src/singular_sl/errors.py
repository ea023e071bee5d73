"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`SingularSLError`, so callers can catch the whole family at once.
"""


class SingularSLError(Exception):
    """Base class for library errors."""


class SpecError(SingularSLError, ValueError):
    """Malformed coefficient description (unknown primitive, bad keys...)."""


class DomainError(SingularSLError, ValueError):
    """Interval or point outside the admissible domain."""


class PositivityError(SingularSLError, ValueError):
    """The weight rho is not bounded away from zero."""


class IntegrabilityError(SingularSLError, ValueError):
    """A grid surrogate of an L1/L2 norm overflowed."""


class GridError(SingularSLError, ValueError):
    """Grid too coarse for the requested computation."""


class HalfPlaneError(SingularSLError, ValueError):
    """Spectral parameter outside the admissible half-plane or below mu_min."""


class NoConvergence(SingularSLError, RuntimeError):
    """Picard iteration hit its cap without meeting the tolerance."""


class NormalizationError(SingularSLError, FloatingPointError):
    """Leading WKB term underflowed, remainders cannot be formed."""


class StiffnessError(SingularSLError, RuntimeError):
    """The reference integrator's step size collapsed."""
