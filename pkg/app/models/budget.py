from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class NoiseModel(BaseModel):
    delta_B: float = Field(1e-3, ge=0)  # G
    relative_intensity_stability: float = Field(1e-6, ge=0)
    lifetimes: Dict[str, float]  # level -> s in the combined lattice
    collisional_stability_time: float = Field(0.1, gt=0)  # s, 3P0 two-atom window
    trap_frequency_hz: float = Field(25e3, gt=0)

    @field_validator("lifetimes")
    @classmethod
    def validate_lifetimes(cls, v):
        for level, lifetime in v.items():
            if lifetime <= 0:
                raise ValueError(f"Lifetime of {level} must be positive")
        return v


class BudgetItem(BaseModel):
    source: str
    infidelity: float = Field(..., ge=0, le=1)


class FidelityBudget(BaseModel):
    items: List[BudgetItem] = []
    total_fidelity: float = Field(1.0, ge=0, le=1)

    def item(self, source: str) -> Optional[BudgetItem]:
        return next((item for item in self.items if item.source == source), None)
