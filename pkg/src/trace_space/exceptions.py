from src.exceptions import DomainError, UnsupportedFeature


class TriangleIndexOutOfRange(DomainError):
    DETAIL = "Triangle index out of range"


class PointOutsideTriangle(DomainError):
    DETAIL = "Barycentric point lies outside the reference triangle"


class UnsupportedOrder(UnsupportedFeature):
    DETAIL = "Only lowest-order Raviart–Thomas elements are implemented"
