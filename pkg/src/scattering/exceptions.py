from src.exceptions import DomainError


class PointOnBoundary(DomainError):
    DETAIL = "Evaluation point too close to the scatterer surface"


class PointInsideScatterer(DomainError):
    DETAIL = "Evaluation point lies inside the scatterer"


class InvalidPolarization(DomainError):
    DETAIL = "Polarization must be a nonzero vector orthogonal to the propagation direction"
