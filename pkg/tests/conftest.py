import math

import pytest

from app.models.budget import NoiseModel
from app.models.schedule import Device
from app.services.atomdata import atomdata_service
from app.services.budget import budget_service
from app.services.polarizability import au_to_nm


def phase_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle"""
    return abs(math.remainder(a - b, 2 * math.pi))


def synthetic_species(lines):
    """Ground level 'g' coupled upward to one level per (omega_au, f) pair"""
    levels = [{"name": "g", "J": 0}]
    documents = []
    for index, (omega, f) in enumerate(lines):
        name = f"u{index}"
        levels.append({"name": name, "J": 1})
        documents.append(
            {"lower": "g", "upper": name, "wavelength_nm": au_to_nm(omega), "oscillator_strength": f}
        )
    return atomdata_service.load_species(
        {"name": "synthetic", "nuclear_spin": 0, "levels": levels, "lines": documents}
    )


@pytest.fixture(scope="session")
def sr87():
    return atomdata_service.get_species()


@pytest.fixture(scope="session")
def one_line_species():
    return synthetic_species([(0.2, 1.0)])


@pytest.fixture(scope="session")
def two_line_species():
    return synthetic_species([(0.1, 1.0), (0.2, 0.5)])


@pytest.fixture
def reference_device():
    return Device(n_sites=12, trap_frequency_hz=25e3, gradient_g_per_cm=100.0, margin=10.0)


@pytest.fixture
def reference_noise(sr87) -> NoiseModel:
    return budget_service.default_noise_model(sr87)
