from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class PolarizabilitySample(BaseModel):
    model_config = ConfigDict(frozen=True)

    wavelength: float = Field(..., gt=0)  # nm
    alpha: float  # a.u.


class LatticeSpec(BaseModel):
    """An optical lattice acting on one level"""
    wavelength: float = Field(..., gt=0)  # nm
    intensity: float = Field(1.0, ge=0)  # relative to I0
    level: str
    depth: Optional[float] = None  # derived, a.u. * I0 times the configured conversion
    trap_frequency: Optional[float] = Field(None, gt=0)  # Hz


# Request / response schemas for the HTTP surface

class AlphaRequest(BaseModel):
    level: str
    wavelengths_nm: List[float] = Field(..., min_length=1)

    @field_validator("wavelengths_nm")
    @classmethod
    def validate_wavelengths(cls, v):
        if any(w <= 0 for w in v):
            raise ValueError("Wavelengths must be positive")
        return v


class AlphaResponse(BaseModel):
    level: str
    samples: List[PolarizabilitySample]


class ZeroCrossingRequest(BaseModel):
    level: str
    range_nm: Tuple[float, float]
    step_nm: float = Field(0.5, gt=0)
    compare_level: Optional[str] = None  # when set, scan alpha(level) - alpha(compare_level)


class ZeroCrossingResponse(BaseModel):
    level: str
    compare_level: Optional[str] = None
    crossings_nm: List[float]


class DepthMatchRequest(BaseModel):
    storage: LatticeSpec
    transport: LatticeSpec


class DepthMatchResponse(BaseModel):
    intensity_ratio: float
    storage_depth: float
    transport_depth: float
    readout_depths: Dict[str, float]
