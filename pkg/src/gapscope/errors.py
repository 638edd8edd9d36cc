"""Exception types shared across the toolkit."""


class GapscopeError(Exception):
    """Base class for all toolkit errors."""


# --- linear algebra kernels ---

class SingularBlock(GapscopeError):
    """Trailing block of a Schur complement is not positive definite."""


class IllConditioned(GapscopeError):
    """Congruence transform rejected: condition estimate too large."""


# --- SDP data model ---

class NegativeParameter(GapscopeError):
    """Perturbation parameters must be nonnegative."""


class NoFeasiblePoint(GapscopeError):
    """The affine constraint system A_i . X = b_i is inconsistent."""


class InconsistentConstraints(GapscopeError):
    """Linearly dependent constraint matrices with incompatible rhs."""


class DimensionMismatch(GapscopeError):
    """Structurally inconsistent problem data."""


class ParseError(GapscopeError):
    """Malformed SDPA file. Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# --- interior-point solver ---

class SolverError(GapscopeError):
    """A solve that was required to succeed did not."""


class ValueDisagreement(SolverError):
    """Primal and dual values differ beyond tolerance.

    Signals numerical trouble at the boundary of the domain of the
    regularized value function.
    """

    def __init__(self, primal_value, dual_value, result=None):
        self.primal_value = primal_value
        self.dual_value = dual_value
        self.result = result
        super().__init__(
            f"primal/dual values disagree: {primal_value!r} vs {dual_value!r}")


# --- facial reduction ---

class AuxiliarySolveFailed(SolverError):
    """The reducing-direction subproblem did not solve cleanly."""


class InfeasibleDetected(GapscopeError):
    """Facial reduction certified infeasibility of the requested side."""


class WitnessNotFound(GapscopeError):
    """No interior point of the reduced problem located at tolerance."""


class NotInPerturbationSpace(GapscopeError):
    """Perturbation matrix lies outside the admissible space.

    Carries the least-squares residual of the membership system.
    """

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


# --- proof harness ---

class NotRankComplement(GapscopeError):
    """Direction's trailing block is not positive definite at tolerance."""


class ThresholdNotMet(GapscopeError):
    """The operational smallness test on t failed for this (alpha, t)."""


class PreconditionViolated(GapscopeError):
    """A check was invoked outside its guaranteed regime."""


# --- tracer ---

class InsufficientData(GapscopeError):
    """Fewer samples than the extrapolation model needs."""


class TooFewConvergedPoints(GapscopeError):
    """A ray produced fewer than three usable solves."""

    def __init__(self, theta, count):
        self.theta = theta
        self.count = count
        super().__init__(
            f"theta={theta!r}: only {count} converged t-samples (need >= 3)")


class DomainError(GapscopeError):
    """Argument outside the documented domain."""


class NotYetFeasible(GapscopeError):
    """Closed-form feasible point requires a smaller t at these parameters."""
