from src.exceptions import DomainError


class SingularKernel(DomainError):
    DETAIL = "Kernel evaluated at zero separation; route through singular quadrature"


class NonPositiveFrequency(DomainError):
    DETAIL = "Laplace frequency must satisfy Re s > 0"
