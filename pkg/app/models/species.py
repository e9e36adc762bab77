"""
Pydantic schemas for atomic structure data
"""
import math
from fractions import Fraction
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import SpeciesValidationError

HalfIntegerInput = Union[str, float, int]


def parse_half_integer(value: HalfIntegerInput) -> float:
    """Accept "9/2", "4.5", 4.5 or 4 and return the float value if it is a multiple of 1/2"""
    try:
        fraction = Fraction(value) if isinstance(value, str) else Fraction(value).limit_denominator(1000)
    except (TypeError, ValueError, OverflowError, ZeroDivisionError) as e:
        raise SpeciesValidationError(f"Not a half-integer: {value!r}") from e
    if (2 * fraction).denominator != 1:
        raise SpeciesValidationError(f"Not a half-integer: {value!r}")
    return float(fraction)


class LevelModel(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str = Field(..., min_length=1)
    J: float = Field(..., ge=0)
    zeeman_coefficient: Optional[float] = Field(None, alias="zeeman_hz_per_gauss_per_m")  # Hz/(G*m)
    g_J: Optional[float] = None
    lifetime_in_lattice: Optional[float] = Field(None, alias="lifetime_s", gt=0)

    @field_validator("J", mode="before")
    @classmethod
    def validate_j(cls, v):
        return parse_half_integer(v)

    @field_validator("zeeman_coefficient", "g_J")
    @classmethod
    def validate_finite(cls, v):
        if v is not None and not math.isfinite(v):
            raise SpeciesValidationError("Magnetic coefficients must be finite")
        return v

    @property
    def degeneracy(self) -> float:
        return 2 * self.J + 1


class TransitionLine(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lower: str
    upper: str
    wavelength: float = Field(..., alias="wavelength_nm")
    oscillator_strength: float
    source: Optional[str] = None

    @field_validator("wavelength", "oscillator_strength")
    @classmethod
    def validate_positive(cls, v, info):
        if not (v > 0 and math.isfinite(v)):
            raise SpeciesValidationError(f"{info.field_name} must be positive and finite, got {v}")
        return v


class SpeciesModel(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str
    nuclear_spin: float = Field(..., ge=0)
    levels: List[LevelModel]
    lines: List[TransitionLine] = []

    @field_validator("nuclear_spin", mode="before")
    @classmethod
    def validate_nuclear_spin(cls, v):
        return parse_half_integer(v)

    @model_validator(mode="after")
    def validate_references(self):
        names = [level.name for level in self.levels]
        duplicates = {name for name in names if names.count(name) > 1}
        if duplicates:
            raise SpeciesValidationError(f"Duplicate level names: {sorted(duplicates)}")

        known = set(names)
        for line in self.lines:
            for ref in (line.lower, line.upper):
                if ref not in known:
                    raise SpeciesValidationError(
                        f"Line {line.lower}->{line.upper} references unknown level {ref}"
                    )
        return self

    @property
    def I(self) -> float:
        return self.nuclear_spin

    @property
    def level_map(self) -> Dict[str, LevelModel]:
        return {level.name: level for level in self.levels}

    def lines_of(self, level: str) -> List[TransitionLine]:
        return [line for line in self.lines if level in (line.lower, line.upper)]


class AtomicState(BaseModel):
    """Internal state of one atom: level, optional hyperfine F, magnetic quantum number m"""
    model_config = ConfigDict(frozen=True)

    level: str
    F: Optional[float] = None
    m: float

    @field_validator("F", mode="before")
    @classmethod
    def validate_f(cls, v):
        return None if v is None else parse_half_integer(v)

    @field_validator("m", mode="before")
    @classmethod
    def validate_m(cls, v):
        return parse_half_integer(v)

    def label(self) -> str:
        m = Fraction(self.m).limit_denominator(2)
        if self.F is None:
            return f"{self.level}(m={m})"
        return f"{self.level}(F={Fraction(self.F).limit_denominator(2)},m={m})"
