"""Exception and warning types raised across the package."""


class OrthoFairError(Exception):
    """Base class for all package errors."""


class ZeroVarianceColumn(OrthoFairError):
    def __init__(self, name):
        super().__init__(f"column {name!r} has (near) zero variance; drop it before standardizing")
        self.name = name


class RankOutOfRange(OrthoFairError):
    pass


class ConvergenceFailure(OrthoFairError):
    def __init__(self, iterations=None, msg="SVD did not converge"):
        super().__init__(msg if iterations is None else f"{msg} after {iterations} iterations")
        self.iterations = iterations


class SingularDesign(OrthoFairError):
    pass


class SingularSensitiveGram(SingularDesign):
    """B^T B is (numerically) singular, e.g. duplicated sensitive columns."""


class NotStandardized(OrthoFairError):
    def __init__(self, column, mean):
        super().__init__(f"column {column!r} is not centered (mean={mean:.3g}); standardize first")
        self.column = column
        self.mean = mean


class ShapeMismatch(OrthoFairError):
    pass


class UnivariateOnly(OrthoFairError):
    pass


class DegenerateComponent(OrthoFairError):
    def __init__(self, component):
        super().__init__(f"component {component}: residual score vector vanished, cannot normalize")
        self.component = component


class FeatureMismatch(OrthoFairError):
    pass


class SingleClass(OrthoFairError):
    pass


class RequiresGroups(OrthoFairError):
    pass


class InvalidParams(OrthoFairError):
    pass


class MissingNoise(OrthoFairError):
    pass


class NoConvergence(UserWarning):
    """Iterative fit hit its iteration cap; the result is returned but flagged."""


class SeparationDetected(UserWarning):
    """Logistic likelihood has no finite maximizer (perfectly separable labels)."""
