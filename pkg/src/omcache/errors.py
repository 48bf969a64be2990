"""Exception and warning types shared across the package."""


class OmcacheError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(OmcacheError):
    """Operator or state does not match the mode registry dimensions."""


class InvalidState(OmcacheError):
    """State fails validation (trace, hermiticity, positivity, norm)."""


class NonUnitary(OmcacheError):
    """A matrix that must be unitary is not, beyond tolerance."""


class TruncationError(OmcacheError):
    """Population has leaked into the top Fock level beyond tolerance."""


class IntegratorStall(OmcacheError):
    """The ODE integrator failed to reach the requested time."""


class InvalidP1(OmcacheError):
    """Single-pair probability outside the invertible branch (p1 > 0.25)."""


class Unreachable(OmcacheError):
    """Requested target cannot be reached by any pulse duration."""


class StrongCouplingRegime(OmcacheError):
    """Drive exceeds the weak-coupling condition g0*alpha < kappa/4."""


class NoCrossing(OmcacheError):
    """Bisection bracket does not contain a feasibility crossing."""


class Infeasible(OmcacheError):
    """No point in the search domain satisfies the constraints."""


class ComplexityLimit(OmcacheError):
    """Requested exact enumeration exceeds the configured outcome budget."""


class WeakCouplingViolation(UserWarning):
    """Warning: a closed form was evaluated outside its weak-coupling regime."""


class DarkCountRegime(UserWarning):
    """Warning: dark-count probability is large enough to distort heralding."""
