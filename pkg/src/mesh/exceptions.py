from src.exceptions import DomainError, ResourceError


class InvalidMesh(DomainError):
    DETAIL = "Invalid surface mesh"


class MeshLevelTooLarge(ResourceError):
    DETAIL = "Requested refinement level exceeds the memory guard"


class InvalidTorusRadii(DomainError):
    DETAIL = "Torus requires 0 < minor_radius < major_radius"


class InvalidResolution(DomainError):
    DETAIL = "Mesh resolution parameter out of range"


class MalformedMeshFile(DomainError):
    DETAIL = "Could not parse mesh file"
