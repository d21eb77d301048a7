from typing import Optional


class DscmError(Exception):
    """Base class for every error raised by the services package."""


class ModelConstructionError(DscmError, ValueError):
    """Inconsistent parameters when building a system."""


class UnknownVariableError(DscmError, LookupError):
    def __init__(self, label, context: str = ""):
        self.label = label
        where = f" in {context}" if context else ""
        super().__init__(f"unknown variable X{label}{where}")


class MissingParentError(DscmError, LookupError):
    def __init__(self, owner: int, parent: int):
        self.owner = owner
        self.parent = parent
        super().__init__(f"structural equation of X{owner} needs parent X{parent}")


class DegenerateFitError(DscmError):
    """Least-squares design matrix is rank deficient (e.g. aliased grid)."""


class DivergenceError(DscmError):
    def __init__(self, time: float, step: Optional[int] = None):
        self.time = time
        self.step = step
        super().__init__(f"state left the finite region at t={time:.6g}")


class UnderdeterminedDcError(DscmError):
    """Zero self-stiffness leaves the constant part of the response undetermined."""


class StabilityPreconditionError(DscmError):
    """The mechanism cannot be structurally dynamically stable."""


class NoUniqueSolutionError(DscmError):
    def __init__(self, omega: float, condition: float):
        self.omega = omega
        self.condition = condition
        super().__init__(
            f"no unique solution at omega={omega:.6g} (condition estimate {condition:.3g})"
        )


class ScenarioError(DscmError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SignalSyntaxError(ScenarioError):
    pass


class InconsistentSolutionError(DscmError):
    """A solved bundle does not reproduce itself through the structural equations."""
