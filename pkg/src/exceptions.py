from typing import Any


class DetailedError(Exception):
    EXIT_CODE = 1
    DETAIL = "Internal error"

    def __init__(self, detail: str | None = None, **context: Any) -> None:
        self.detail = detail or self.DETAIL
        self.context = context
        super().__init__(self.__str__())

    def __str__(self) -> str:
        if not self.context:
            return self.detail
        extras = ", ".join(f"{key}={value!r}" for key, value in self.context.items())
        return f"{self.detail} ({extras})"


class DomainError(DetailedError):
    EXIT_CODE = 2
    DETAIL = "Argument outside the admissible domain"


class ConfigError(DetailedError):
    EXIT_CODE = 3
    DETAIL = "Invalid configuration"


class ResourceError(DetailedError):
    EXIT_CODE = 4
    DETAIL = "Problem size exceeds the configured resource limits"


class NumericalError(DetailedError):
    EXIT_CODE = 5
    DETAIL = "Numerical breakdown"


class SolverError(DetailedError):
    EXIT_CODE = 6
    DETAIL = "Linear solver failed"


class UnsupportedFeature(DetailedError):
    EXIT_CODE = 7
    DETAIL = "Feature not supported"
