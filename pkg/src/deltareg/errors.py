"""Exception hierarchy.

Validation problems (bad parameters, violated preconditions) derive from
``ValidationError``; failures that happen while computing (a solver
blowing up, an oracle that cannot reach its tolerance) derive from
``RuntimeFailure``.  The CLI maps the two families to exit codes 1 and 2.
"""


class DeltaRegError(Exception):
    pass


class ValidationError(DeltaRegError, ValueError):
    pass


class InvalidScalingError(ValidationError):
    pass


class UnsupportedRuleError(ValidationError):
    pass


class InvalidDomainError(ValidationError):
    pass


class EmptyRegionError(ValidationError):
    pass


class RuntimeFailure(DeltaRegError, RuntimeError):
    pass


class SolverBlowUp(RuntimeFailure):
    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"non-finite solution values at t = {t:.6g}")


class OracleFailure(RuntimeFailure):
    pass
