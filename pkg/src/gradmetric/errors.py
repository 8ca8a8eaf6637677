"""Exception hierarchy.

Failures that certify a violated existence condition carry the offending
data so callers (and the CLI) can emit a machine-readable certificate.
"""


class GradMetricError(Exception):
    """Base class for all package errors."""


# tensor layer
class InvalidIndexGroup(GradMetricError):
    pass


class InvalidContraction(GradMetricError):
    pass


class DegenerateForm(GradMetricError):
    """A bilinear form that must be invertible is (numerically) singular."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class InvalidOrder(GradMetricError):
    pass


class ProblemTooLarge(GradMetricError):
    pass


# jets and field specs
class SpecParseError(GradMetricError):
    pass


class SpecDimensionError(SpecParseError):
    pass


class OrderExceeded(GradMetricError):
    pass


class BaseMismatch(GradMetricError):
    pass


# metric construction
class ConditionViolated(GradMetricError):
    """One of the three existence conditions fails.

    ``condition`` is ``"i"``, ``"ii"`` or ``"iii"``.
    """

    condition = "?"

    def certificate(self):
        return {"condition": self.condition, "error": type(self).__name__,
                "message": str(self)}


class NonPositivePairing(ConditionViolated):
    condition = "i"

    def __init__(self, message, point=None, pairing=None):
        super().__init__(message)
        self.point = point
        self.pairing = pairing

    def certificate(self):
        cert = super().certificate()
        if self.point is not None:
            cert["point"] = [float(v) for v in self.point]
        if self.pairing is not None:
            cert["pairing"] = float(self.pairing)
        return cert


class NotCritical(ConditionViolated):
    condition = "ii"

    def __init__(self, message, x_norm=None, y_norm=None):
        super().__init__(message)
        self.x_norm = x_norm
        self.y_norm = y_norm


class ConditionThreeViolated(ConditionViolated):
    condition = "iii"

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result

    def certificate(self):
        cert = super().certificate()
        if self.result is not None:
            cert["asym_defect"] = float(self.result.asym_defect)
            cert["min_eigenvalue"] = float(self.result.min_eigenvalue)
        return cert


class ZeroCovector(GradMetricError):
    pass


class CoverageGap(GradMetricError):
    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points if points is not None else []


# quantum Markov semigroups
class InvalidHamiltonian(GradMetricError):
    pass


class NotErgodic(GradMetricError):
    pass


class SingularState(GradMetricError):
    pass


class NotTangent(GradMetricError):
    pass


class StepTooLarge(GradMetricError):
    pass
