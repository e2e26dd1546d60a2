"""Exception hierarchy.

Everything numerical derives from :class:`NumericalFailure` so the CLI can
map it to a single exit code.
"""


class NumericalFailure(ArithmeticError):
    pass


class EigenSolverError(NumericalFailure):
    pass


class NotPositiveDefiniteError(NumericalFailure, ValueError):
    def __init__(self, eigenvalue, msg=None):
        self.eigenvalue = float(eigenvalue)
        super().__init__(msg or f"matrix is not positive definite (eigenvalue {self.eigenvalue:.3e})")


class IllConditionedError(NumericalFailure):
    def __init__(self, jitter, msg=None):
        self.jitter = float(jitter)
        super().__init__(msg or f"Cholesky factorization failed (last jitter tried: {self.jitter:.3e})")


class SingularConfigurationError(NumericalFailure):
    """Query point sits on (or within the guard of) an anchor's cut locus."""

    def __init__(self, index, msg=None):
        self.index = int(index)
        super().__init__(msg or f"anchor {self.index} is on the cut locus of the current point")


class DegenerateStepError(NumericalFailure):
    pass
