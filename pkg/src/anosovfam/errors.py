"""Exception hierarchy shared by all modules."""


class AnosovFamilyError(Exception):
    """Base class for every error raised by the package."""


class WindowExceededError(AnosovFamilyError):
    def __init__(self, index, window):
        self.index = index
        self.window = window
        super().__init__(f"index {index} outside materialized window [-{window}, {window}]")


class DomainError(AnosovFamilyError, ValueError):
    """Arguments live on incompatible components or violate a type invariant."""


class InversionError(AnosovFamilyError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Newton inversion did not converge after {iterations} iterations "
            f"(residual {residual:.3e}); perturbation too large for invertibility"
        )


class InsufficientDepthError(AnosovFamilyError):
    def __init__(self, residual, tolerance, depth):
        self.residual = residual
        self.tolerance = tolerance
        self.depth = depth
        super().__init__(
            f"splitting depth {depth} insufficient: residual {residual:.3e} > tolerance {tolerance:.3e}"
        )


class TruncationError(AnosovFamilyError):
    def __init__(self, tail, tolerance, depth):
        self.tail = tail
        self.tolerance = tolerance
        self.depth = depth
        super().__init__(
            f"adapted-metric truncation depth {depth} insufficient: tail {tail:.3e} > {tolerance:.3e}"
        )


class HyperbolicityMarginError(AnosovFamilyError):
    def __init__(self, index, value, which="omega"):
        self.index = index
        self.value = value
        super().__init__(f"{which}_{index} = {value:.6g} <= 0: family too weakly hyperbolic for chosen gamma/lambda_tilde")


class CapViolationError(AnosovFamilyError):
    def __init__(self, index, norm, radius):
        self.index = index
        super().__init__(f"chart overflow at n={index}: image norm {norm:.6g} >= target radius {radius:.6g}")


class ScheduleInfeasibleError(AnosovFamilyError):
    def __init__(self, index, reason=""):
        self.index = index
        msg = f"delta schedule infeasible at n={index}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class CoverageError(AnosovFamilyError):
    def __init__(self, index, needed, reached):
        self.index = index
        super().__init__(
            f"coverage failure at n={index}: B^u(delta_{index + 1})=[-{needed:.6g},{needed:.6g}] "
            f"not inside r_n(B^u(delta_n)) (reach {reached:.6g})"
        )


class ContractViolationError(AnosovFamilyError):
    def __init__(self, index, what, measured, bound):
        self.index = index
        super().__init__(f"contract violation at n={index}: {what} measured {measured:.6g} vs bound {bound:.6g}")


class NonConvergenceError(AnosovFamilyError):
    def __init__(self, trace):
        self.trace = list(trace)
        last = self.trace[-1] if self.trace else float("nan")
        super().__init__(f"graph transform did not converge in {len(self.trace)} sweeps (last step distance {last:.3e})")


class NotUniformlyEquivalentError(AnosovFamilyError):
    def __init__(self, index, ratio, k, K):
        self.index = index
        super().__init__(
            f"metrics not uniformly equivalent with k={k}, K={K}: norm ratio {ratio:.6g} at component {index}"
        )


class ValidationError(AnosovFamilyError, ValueError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)
