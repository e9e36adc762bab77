import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class BlockadeParams(BaseModel):
    """Couplings of the blocked two-level system.

    Omega, DeltaU and Gamma share one unit (angular frequency). Dimensionless
    use takes Omega = 1, so times are then Omega*t.
    """
    model_config = ConfigDict(frozen=True)

    Omega: float = Field(..., gt=0)
    DeltaU: float = 0.0
    Gamma: float = Field(0.0, ge=0)

    @classmethod
    def from_ratios(cls, gamma_over_omega: float, delta_over_omega: float = 0.0, omega: float = 1.0) -> "BlockadeParams":
        return cls(Omega=omega, DeltaU=delta_over_omega * omega, Gamma=gamma_over_omega * omega)

    @classmethod
    def from_physical(cls, omega_hz: float, delta_u_hz: float = 0.0, gamma_hz: float = 20e3) -> "BlockadeParams":
        """Ordinary frequencies in Hz -> angular units (rad/s); Gamma defaults to 2pi x 20 kHz"""
        return cls(Omega=2 * math.pi * omega_hz, DeltaU=2 * math.pi * delta_u_hz, Gamma=2 * math.pi * gamma_hz)


class TwoLevelAmplitudes(BaseModel):
    """Amplitudes on |g> = |0x,1> and |e> = |0x,1x>"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    c_g: complex = 1.0 + 0.0j
    c_e: complex = 0.0 + 0.0j

    @model_validator(mode="before")
    @classmethod
    def coerce_complex(cls, data):
        if isinstance(data, dict):
            return {key: complex(*value) if isinstance(value, (list, tuple)) else complex(value)
                    for key, value in data.items()}
        return data

    @property
    def norm_squared(self) -> float:
        return abs(self.c_g) ** 2 + abs(self.c_e) ** 2

    def to_dict(self) -> Dict[str, List[float]]:
        return {
            "c_g": [self.c_g.real, self.c_g.imag],
            "c_e": [self.c_e.real, self.c_e.imag],
        }


class LossCurve(BaseModel):
    label: Optional[str] = None
    gamma_over_omega: Optional[float] = None
    delta_over_omega: Optional[float] = None
    times: List[float]  # Omega * t
    loss: List[float]


class BranchReport(BaseModel):
    phase_01: float
    loss_01: float
    residual_phase: float
    fidelity_limit: Optional[float] = None


class BlockedBranch(BaseModel):
    """Blocked-branch amplitudes after a pulse of area Omega*t"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    amplitudes: TwoLevelAmplitudes
    loss: float


# Request schemas for the HTTP surface

class EvolveRequest(BaseModel):
    gamma_over_omega: float = Field(0.0, ge=0)
    delta_over_omega: float = 0.0
    omega_t: float = Field(..., ge=0)
    psi0: Tuple[Tuple[float, float], Tuple[float, float]] = ((1.0, 0.0), (0.0, 0.0))
    method: str = Field("analytic", pattern="^(analytic|rk4)$")


class EvolveResponse(BaseModel):
    c_g: Tuple[float, float]
    c_e: Tuple[float, float]
    norm_squared: float
    loss: float


class CurvesRequest(BaseModel):
    gamma_over_omega: List[float] = Field(..., min_length=1)
    delta_over_omega: List[float] = [0.0]
    t_max: float = Field(2 * math.pi, gt=0)
    n_points: int = Field(201, ge=2)


class GateRequest(BaseModel):
    gamma_over_omega: float = Field(0.0, ge=0)
    delta_over_omega: float = 0.0
