"""
Error hierarchy shared by the numerical core, the CLI and the HTTP service
"""

from typing import Any, Dict


class GPError(Exception):
    """Base error. Carries a CLI exit code, an HTTP status and call context."""

    exit_code: int = 1
    status_code: int = 500
    label: str = "Internal error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context)

    def with_context(self, **context: Any) -> "GPError":
        """Attach context (step, split, config...) without losing the original type"""
        for key, value in context.items():
            self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} [{details}]"


class InvalidInputError(GPError, ValueError):
    """Bad arguments, shape mismatches, non-finite inputs"""

    exit_code = 2
    status_code = 400
    label = "Invalid input"


class NumericalError(GPError):
    """Numerical failure while solving or optimizing"""

    exit_code = 3
    status_code = 422
    label = "Numerical failure"


class NotPositiveDefiniteError(NumericalError):
    """Matrix expected to be SPD failed a factorization or curvature test"""

    label = "Matrix is not positive definite"


class DivergenceError(NumericalError):
    """Iterates blew up"""

    label = "Solver diverged"


class NonFiniteError(NumericalError):
    """NaN or inf appeared in iterates or gradients"""

    label = "Non-finite value"

    def __init__(self, message: str, iteration: int | None = None, **context: Any):
        super().__init__(message, **context)
        self.iteration = iteration
        if iteration is not None:
            self.context.setdefault("iteration", iteration)


class DataError(GPError):
    """Dataset loading and splitting problems"""

    exit_code = 4
    status_code = 400
    label = "Data error"

    def __init__(self, message: str, line: int | None = None, **context: Any):
        super().__init__(message, **context)
        self.line = line
        if line is not None:
            self.context.setdefault("line", line)
