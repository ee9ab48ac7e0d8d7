from src.exceptions import DomainError, NumericalError, UnsupportedFeature


class UnsupportedStages(UnsupportedFeature):
    DETAIL = "Radau IIA tableaus are available for 1, 2 or 3 stages"


class ContourOutsideDisk(DomainError):
    DETAIL = "Differentiation symbol requires |zeta| < 1"


class InvalidTimeGrid(DomainError):
    DETAIL = "Time grid requires N >= 1 and T > 0"


class DefectiveDelta(NumericalError):
    DETAIL = "Eigenvector matrix of the differentiation symbol is ill-conditioned"


class SeriesShapeMismatch(DomainError):
    DETAIL = "Time series does not match the context's (N + 1, m) layout"
