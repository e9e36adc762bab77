"""
Decoherence and infidelity budgets.

Every item is computed per schedule layer and combined across layers in
product form, item = 1 - prod(1 - x_layer). The total fidelity is
prod(1 - item), so a concatenated schedule prices as the product of its
parts.
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Tuple

from app.core.errors import MissingCoefficientError
from app.models.budget import BudgetItem, FidelityBudget, NoiseModel
from app.models.register import QubitEncoding
from app.models.schedule import Schedule
from app.models.species import AtomicState, SpeciesModel
from app.services.atomdata import atomdata_service

logger = logging.getLogger(__name__)

ITEM_SOURCES = ("scattering", "collisional", "magnetic_dephasing", "intensity_dephasing", "blockade_loss")


class BudgetService:
    def default_noise_model(self, species: Optional[SpeciesModel] = None) -> NoiseModel:
        """Reference noise: 1 mG field noise, 1e-6 intensity stability, 100 ms collisional window"""
        species = species or atomdata_service.get_species()
        return NoiseModel(
            delta_B=1e-3,
            relative_intensity_stability=1e-6,
            lifetimes=atomdata_service.level_lifetimes(species),
            collisional_stability_time=0.1,
            trap_frequency_hz=25e3,
        )

    def magnetic_noise_shift(
        self, species: SpeciesModel, qubit_encoding: Tuple[AtomicState, AtomicState], delta_B: float
    ) -> float:
        state0, state1 = qubit_encoding
        return abs(
            atomdata_service.zeeman_shift(species, state0, delta_B)
            - atomdata_service.zeeman_shift(species, state1, delta_B)
        )

    def intensity_noise_shift(self, trap_frequency_hz: float, relative_stability: float) -> float:
        """Zero-point energy omega_t/2 scales as sqrt(I), so dE = (omega_t/4) dI/I"""
        if trap_frequency_hz < 0:
            raise ValueError(f"Trap frequency must be non-negative, got {trap_frequency_hz}")
        return 2 * math.pi * trap_frequency_hz / 4 * relative_stability

    def scattering_infidelity(self, occupation_timeline: Iterable[Tuple[str, float]], lifetimes: Dict[str, float]) -> float:
        exponent = 0.0
        for level, duration in occupation_timeline:
            if duration < 0:
                raise ValueError(f"Negative duration {duration} for {level}")
            if duration == 0:
                continue
            if level not in lifetimes:
                raise MissingCoefficientError(f"No lifetime for level {level}")
            exponent += duration / lifetimes[level]
        return -math.expm1(-exponent)

    def dephasing_infidelity(self, shift_hz: float, duration: float) -> float:
        """Small-angle phase error phi^2/2 with phi = 2pi * shift * duration"""
        phi = 2 * math.pi * shift_hz * duration
        return min(phi ** 2 / 2, 1.0)

    def collisional_infidelity(self, exposure: float, stability_time: float) -> float:
        return -math.expm1(-exposure / stability_time)

    def gate_fidelity_estimate(
        self,
        schedule: Schedule,
        noise_model: NoiseModel,
        blockade_loss: Optional[float] = None,
        species: Optional[SpeciesModel] = None,
        encoding: Optional[QubitEncoding] = None,
    ) -> FidelityBudget:
        species = species or atomdata_service.get_species()
        encoding = encoding or schedule.device.encoding

        magnetic_shift = self.magnetic_noise_shift(species, (encoding.zero, encoding.one), noise_model.delta_B)
        intensity_shift = self.intensity_noise_shift(noise_model.trap_frequency_hz, noise_model.relative_intensity_stability)

        survival = {source: 1.0 for source in ITEM_SOURCES}
        for layer in schedule.layers:
            per_layer = {
                "scattering": self.scattering_infidelity(layer.occupation, noise_model.lifetimes),
                "collisional": self.collisional_infidelity(
                    layer.collisional_exposure_s, noise_model.collisional_stability_time
                ),
                "magnetic_dephasing": self.dephasing_infidelity(magnetic_shift, layer.duration_s),
                "intensity_dephasing": self.dephasing_infidelity(intensity_shift, layer.duration_s),
                "blockade_loss": layer.blockade_loss,
            }
            for source, infidelity in per_layer.items():
                survival[source] *= 1 - infidelity

        if blockade_loss is not None:
            survival["blockade_loss"] *= 1 - blockade_loss

        budget = self._combine(survival)
        logger.info(
            f"Priced schedule of {len(schedule.layers)} layers: total fidelity {budget.total_fidelity:.6f}"
        )
        return budget

    def storage_budget(
        self,
        species: SpeciesModel,
        noise_model: NoiseModel,
        encoding: Optional[QubitEncoding] = None,
        duration: float = 1.0,
    ) -> FidelityBudget:
        """Idle qubit in the storage lattice: scattering of the encoding level plus field-noise dephasing"""
        encoding = encoding or QubitEncoding()
        shift = self.magnetic_noise_shift(species, (encoding.zero, encoding.one), noise_model.delta_B)
        survival = {
            "scattering": 1 - self.scattering_infidelity([(encoding.zero.level, duration)], noise_model.lifetimes),
            "magnetic_dephasing": 1 - self.dephasing_infidelity(shift, duration),
        }
        return self._combine(survival)

    @staticmethod
    def _combine(survival: Dict[str, float]) -> FidelityBudget:
        items: List[BudgetItem] = [
            BudgetItem(source=source, infidelity=min(max(1 - kept, 0.0), 1.0)) for source, kept in survival.items()
        ]
        total = math.prod(survival.values())
        return FidelityBudget(items=items, total_fidelity=min(max(total, 0.0), 1.0))


budget_service = BudgetService()
