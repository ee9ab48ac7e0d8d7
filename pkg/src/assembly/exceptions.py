from src.exceptions import DomainError


class UnknownImpedanceKind(DomainError):
    DETAIL = "Unknown impedance kind"


class InvalidQuadrature(DomainError):
    DETAIL = "Quadrature parameters out of range"
