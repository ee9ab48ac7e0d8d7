from src.exceptions import DomainError, ResourceError, SolverError


class GMRESNotConverged(SolverError):
    DETAIL = "GMRES did not reach the requested tolerance"


class InvalidTolerance(DomainError):
    DETAIL = "Solver tolerance must lie in (0, 1e-2]"


class DenseSizeExceeded(ResourceError):
    DETAIL = "System too large for dense singular values; use a coarser mesh"
