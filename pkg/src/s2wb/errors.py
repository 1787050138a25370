"""Exception hierarchy shared by all s2wb modules."""


class S2Error(Exception):
    """Base class for all workbench errors."""


class DomainError(S2Error, ValueError):
    """An argument is outside the operation's domain (bad index, bad shape,
    out-of-range order, empty input)."""


class PreconditionError(S2Error, ValueError):
    """A stated precondition of the operation does not hold."""


class SingularityError(S2Error, ZeroDivisionError):
    """A denominator vanished.  Carries the offending value."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class NumericalError(S2Error, ArithmeticError):
    """An internal numerical contract failed (non-convergence of an
    iteration, broken algebraic identity).  Treated as a bug sentinel."""


class BranchError(S2Error, ValueError):
    """The operator point is on the negative-trace branch where the
    requested operation is undefined; reflect u -> -u or abort."""


class BranchLossError(S2Error, ArithmeticError):
    """A solver iterate left the positive-trace branch (some linearization
    eigenvalue became non-positive)."""


class EllipticityError(S2Error, ValueError):
    """An ellipticity coefficient f_i = sigma_1 - lambda_i is non-positive,
    signalling off-branch input."""


class TransformDomainError(S2Error, ValueError):
    """Some eigenvalue violates lambda_i > -Kbar, so the Legendre-Lewy
    image is undefined."""


class TransformConsistencyError(S2Error, ArithmeticError):
    """A transformed Hessian eigenvalue left (0, 1) beyond tolerance."""


class ConvexityError(S2Error, ValueError):
    """Discrete convexity of the shifted potential failed.  Carries the
    offending node's multi-index."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SamplerStarvationError(S2Error, RuntimeError):
    """The rejection sampler's acceptance rate collapsed.  Carries draw
    diagnostics."""

    def __init__(self, message, drawn=0, accepted=0):
        super().__init__(message)
        self.drawn = drawn
        self.accepted = accepted


class NonConvergenceError(S2Error, RuntimeError):
    """Newton iteration exhausted its budget.  Carries the residual
    history."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)


class ConfigError(S2Error, ValueError):
    """Invalid run configuration (CLI exit code 3)."""
