try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse


class OperatorTag(StrEnum):
    SINGLE_LAYER = "V"
    DOUBLE_LAYER = "K"
    PAIRING = "PAIRING"
    MASS = "MASS"
    DIVMASS = "DIVMASS"
    IMPEDANCE = "Z"


class ImpedanceKind(StrEnum):
    THIN_LAYER = "thin_layer"
    ABSORBING = "absorbing"


class QuadratureConfig(BaseModel):
    regular_order: int = Field(default=4, ge=1)
    singular_order: int = Field(default=4, ge=1)
    near_threshold: float = Field(default=2.0, ge=0)
    near_order: int = Field(default=6, ge=1)

    model_config = ConfigDict(frozen=True, extra="forbid")


class ImpedanceModel(BaseModel):
    """Impedance form Z(s); ``mu_ratio``/``eps_ratio`` are the layer-to-exterior material ratios."""

    kind: ImpedanceKind = ImpedanceKind.ABSORBING
    delta: float = Field(default=0.1, ge=0)
    mu_ratio: float = Field(default=1.0, gt=0)
    eps_ratio: float = Field(default=1.0, gt=0)

    model_config = ConfigDict(frozen=True, extra="forbid")


class GalerkinMatrix(BaseModel):
    matrix: np.ndarray
    tag: OperatorTag
    frequency: complex | None = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


class PanelPairs(BaseModel):
    """Triangle pairs that need special treatment, each stored once with test < trial.

    ``special`` is a sparse boolean ``(F, F)`` pattern covering every listed
    pair in both orders; the regular rule skips exactly these entries.
    """

    identical: np.ndarray
    edge: np.ndarray
    vertex: np.ndarray
    near: np.ndarray
    special: sparse.csr_matrix

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
