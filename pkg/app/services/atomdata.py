"""
Atomic structure data: species ingestion and magnetic response
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError
from scipy.constants import physical_constants

from app.core.config import settings
from app.core.errors import (
    AeqsimError,
    MissingCoefficientError,
    SpeciesDocumentError,
    SpeciesValidationError,
    UnknownLevelError,
)
from app.models.species import AtomicState, LevelModel, SpeciesModel

logger = logging.getLogger(__name__)

# Bohr magneton as an ordinary frequency per gauss (1.399624 MHz/G)
MU_B_HZ_PER_GAUSS = physical_constants["Bohr magneton in Hz/T"][0] * 1e-4
NM_PER_CM = 1e7

SpeciesDocument = Union[str, bytes, Dict[str, Any]]


class AtomdataService:
    def __init__(self):
        self.species_cache: Dict[str, SpeciesModel] = {}

    def load_species(self, document: SpeciesDocument) -> SpeciesModel:
        """Parse and validate a species document (JSON text or already-decoded dict)"""
        if isinstance(document, (str, bytes)):
            try:
                document = json.loads(document)
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise SpeciesDocumentError(f"Malformed species document: {e}") from e

        if not isinstance(document, dict):
            raise SpeciesDocumentError("Species document must be a JSON object")

        missing = [key for key in ("name", "nuclear_spin", "levels") if key not in document]
        if missing:
            raise SpeciesDocumentError(f"Species document missing keys: {missing}")

        try:
            species = SpeciesModel.model_validate(document)
        except ValidationError as e:
            raise SpeciesValidationError(self._first_error(e)) from e

        logger.info(
            f"Loaded species {species.name}: {len(species.levels)} levels, {len(species.lines)} lines"
        )
        return species

    def load_species_file(self, path: Union[str, Path]) -> SpeciesModel:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise SpeciesDocumentError(f"Cannot read species document {path}: {e}") from e
        return self.load_species(text)

    def get_species(self, path: Optional[Union[str, Path]] = None) -> SpeciesModel:
        """Cached species lookup; defaults to the configured species document"""
        key = str(path or settings.AEQSIM_SPECIES_PATH)
        if key not in self.species_cache:
            self.species_cache[key] = self.load_species_file(key)
        return self.species_cache[key]

    def get_level(self, species: SpeciesModel, name: str) -> LevelModel:
        level = species.level_map.get(name)
        if level is None:
            raise UnknownLevelError(name)
        return level

    def validate_state(self, species: SpeciesModel, state: AtomicState) -> LevelModel:
        level = self.get_level(species, state.level)
        I = species.I

        if state.F is not None:
            if not abs(level.J - I) <= state.F <= level.J + I:
                raise SpeciesValidationError(
                    f"F={state.F} outside |J-I|..J+I for {level.name} (J={level.J}, I={I})"
                )
            bound = state.F
        elif level.J == 0:
            bound = I
        else:
            raise SpeciesValidationError(f"State in {level.name} (J={level.J}) needs a hyperfine F")

        if abs(state.m) > bound or not float(state.m + bound).is_integer():
            raise SpeciesValidationError(f"m={state.m} not allowed for {state.label()}")
        return level

    def lande_g_f(self, J: float, I: float, F: float, g_J: float) -> float:
        """Hyperfine Landé factor with the nuclear term neglected"""
        if F == 0:
            return 0.0
        return g_J * (F * (F + 1) + J * (J + 1) - I * (I + 1)) / (2 * F * (F + 1))

    def zeeman_shift(self, species: SpeciesModel, state: AtomicState, B: float) -> float:
        """Linear Zeeman shift in Hz at field B (gauss)"""
        level = self.validate_state(species, state)

        if level.J == 0:
            if level.zeeman_coefficient is None:
                raise MissingCoefficientError(f"Level {level.name} has no Zeeman coefficient")
            return level.zeeman_coefficient * state.m * B

        if level.g_J is None:
            raise MissingCoefficientError(f"Level {level.name} has no g_J")
        g_f = self.lande_g_f(level.J, species.I, state.F, level.g_J)
        return state.m * g_f * MU_B_HZ_PER_GAUSS * B

    def gradient_site_splitting(
        self, species: SpeciesModel, state: AtomicState, gradient: float, spacing: float
    ) -> float:
        """Energy difference (Hz) between neighbouring sites for gradient in G/cm and spacing in nm"""
        if gradient < 0:
            raise AeqsimError(f"Gradient must be non-negative, got {gradient}")
        if spacing <= 0:
            raise AeqsimError(f"Site spacing must be positive, got {spacing}")
        per_gauss = abs(self.zeeman_shift(species, state, 1.0))
        return per_gauss * gradient * spacing / NM_PER_CM

    def level_lifetimes(self, species: SpeciesModel) -> Dict[str, float]:
        return {
            level.name: level.lifetime_in_lattice
            for level in species.levels
            if level.lifetime_in_lattice is not None
        }

    @staticmethod
    def _first_error(error: ValidationError) -> str:
        details = error.errors()
        if not details:
            return str(error)
        first = details[0]
        location = ".".join(str(part) for part in first.get("loc", ()))
        message = first.get("msg", "invalid value")
        return f"{location}: {message}" if location else message


atomdata_service = AtomdataService()
