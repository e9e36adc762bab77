"""
Scalar AC polarizability by sum over transition lines.

Wavelengths cross the module boundary in nm; everything inside runs in atomic
units. nm_to_au / au_to_nm own the conversion.
"""
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.constants as sc
from scipy.optimize import bisect

from app.core.config import settings
from app.core.errors import ResonanceWindowError, ScanRangeError, ZeroPolarizabilityError
from app.models.optics import LatticeSpec, PolarizabilitySample
from app.models.species import SpeciesModel
from app.services.atomdata import atomdata_service

logger = logging.getLogger(__name__)

HARTREE_J = sc.physical_constants["Hartree energy"][0]
# photon energy h*c/lambda in hartree, with lambda in nm
_HC_OVER_HARTREE_NM = sc.h * sc.c / HARTREE_J * 1e9

Range = Tuple[float, float]


def nm_to_au(wavelength_nm: float) -> float:
    """Angular frequency in atomic units for a vacuum wavelength in nm (inf -> 0)"""
    if math.isinf(wavelength_nm):
        return 0.0
    return _HC_OVER_HARTREE_NM / wavelength_nm


def au_to_nm(omega_au: float) -> float:
    return math.inf if omega_au == 0 else _HC_OVER_HARTREE_NM / omega_au


class PolarizabilityService:
    def _line_terms(self, species: SpeciesModel, level: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(line wavelengths nm, omega_k au, signed oscillator strengths) attached to a level"""
        atomdata_service.get_level(species, level)
        levels = species.level_map
        wavelengths, strengths = [], []

        for line in species.lines_of(level):
            f = line.oscillator_strength
            if line.upper == level:
                # emission oscillator strength for a downward line
                f = -levels[line.lower].degeneracy / levels[line.upper].degeneracy * f
            wavelengths.append(line.wavelength)
            strengths.append(f)

        wavelengths = np.array(wavelengths, dtype=float)
        omega_k = _HC_OVER_HARTREE_NM / wavelengths if wavelengths.size else wavelengths
        return wavelengths, omega_k, np.array(strengths, dtype=float)

    def alpha(
        self,
        species: SpeciesModel,
        level: str,
        wavelength: float,
        window_nm: Optional[float] = None,
    ) -> float:
        """Polarizability in a.u.; wavelength=inf gives the static value"""
        window = settings.RESONANCE_WINDOW_NM if window_nm is None else window_nm
        line_nm, omega_k, strengths = self._line_terms(species, level)

        if not math.isinf(wavelength):
            close = np.abs(line_nm - wavelength) < window
            if close.any():
                raise ResonanceWindowError(level, wavelength, float(line_nm[close][0]))

        omega = nm_to_au(wavelength)
        return float(np.sum(strengths / (omega_k ** 2 - omega ** 2)))

    def alpha_array(
        self,
        species: SpeciesModel,
        level: str,
        wavelengths: Sequence[float],
        window_nm: Optional[float] = None,
    ) -> np.ndarray:
        """Vectorized alpha; samples inside a resonance window come back as NaN"""
        window = settings.RESONANCE_WINDOW_NM if window_nm is None else window_nm
        line_nm, omega_k, strengths = self._line_terms(species, level)
        grid = np.asarray(wavelengths, dtype=float)
        omega = _HC_OVER_HARTREE_NM / grid

        values = np.sum(strengths[None, :] / (omega_k[None, :] ** 2 - omega[:, None] ** 2), axis=1)
        if line_nm.size:
            excluded = (np.abs(grid[:, None] - line_nm[None, :]) < window).any(axis=1)
            values[excluded] = np.nan
        return values

    def scan(
        self,
        species: SpeciesModel,
        level: str,
        wavelength_range: Range,
        step: float,
        window_nm: Optional[float] = None,
    ) -> List[PolarizabilitySample]:
        grid = self._grid(wavelength_range, step)
        values = self.alpha_array(species, level, grid, window_nm)
        return [
            PolarizabilitySample(wavelength=float(w), alpha=float(a))
            for w, a in zip(grid, values)
            if np.isfinite(a)
        ]

    def find_zero_crossings(
        self,
        species: SpeciesModel,
        level: str,
        wavelength_range: Range,
        step: float,
        window_nm: Optional[float] = None,
    ) -> List[float]:
        line_nm, _, _ = self._line_terms(species, level)

        def f(w):
            return self.alpha(species, level, w, window_nm=0.0)

        crossings = self._crossings(
            self._grid(wavelength_range, step),
            lambda grid: self.alpha_array(species, level, grid, window_nm),
            f,
            line_nm,
        )
        logger.info(f"Found {len(crossings)} zero crossings of alpha({level}) in {wavelength_range} nm")
        return crossings

    def find_magic_wavelengths(
        self,
        species: SpeciesModel,
        level_a: str,
        level_b: str,
        wavelength_range: Range,
        step: float,
        window_nm: Optional[float] = None,
    ) -> List[float]:
        """Sign changes of alpha(level_a) - alpha(level_b)"""
        lines_a, _, _ = self._line_terms(species, level_a)
        lines_b, _, _ = self._line_terms(species, level_b)

        def f(w):
            return self.alpha(species, level_a, w, window_nm=0.0) - self.alpha(species, level_b, w, window_nm=0.0)

        crossings = self._crossings(
            self._grid(wavelength_range, step),
            lambda grid: self.alpha_array(species, level_a, grid, window_nm)
            - self.alpha_array(species, level_b, grid, window_nm),
            f,
            np.concatenate([lines_a, lines_b]),
        )
        logger.info(f"Found {len(crossings)} magic wavelengths for {level_a}/{level_b} in {wavelength_range} nm")
        return crossings

    def lattice_depth(self, spec: LatticeSpec, species: SpeciesModel) -> float:
        return self.alpha(species, spec.level, spec.wavelength) * spec.intensity * settings.DEPTH_HZ_PER_AU

    def match_depths(self, storage: LatticeSpec, transport: LatticeSpec, species: SpeciesModel) -> float:
        """Transport intensity, relative to storage, that equalizes the two depths"""
        alpha_storage = self.alpha(species, storage.level, storage.wavelength)
        alpha_transport = self.alpha(species, transport.level, transport.wavelength)
        if alpha_transport == 0 or alpha_storage == 0:
            raise ZeroPolarizabilityError(
                f"Cannot match depths: alpha_storage={alpha_storage}, alpha_transport={alpha_transport}"
            )
        return alpha_storage / alpha_transport

    def readout_trap_depths(self, storage_depth: float) -> Dict[str, float]:
        zero_x, one_x = settings.readout_depth_fractions
        return {"0x": zero_x * storage_depth, "1x": one_x * storage_depth}

    @staticmethod
    def _grid(wavelength_range: Range, step: float) -> np.ndarray:
        start, stop = (float(x) for x in wavelength_range)
        if not (step > 0 and math.isfinite(step)):
            raise ScanRangeError(f"Step must be positive, got {step}")
        if not (0 < start < stop):
            raise ScanRangeError(f"Empty or inverted wavelength range {wavelength_range}")
        n = int(math.floor((stop - start) / step + 1e-9))
        grid = start + step * np.arange(n + 1)
        if grid[-1] < stop:
            grid = np.append(grid, stop)
        return grid

    def _crossings(
        self,
        grid: np.ndarray,
        sample: Callable[[np.ndarray], np.ndarray],
        f: Callable[[float], float],
        line_nm: np.ndarray,
    ) -> List[float]:
        values = sample(grid)
        roots = []
        for i in range(len(grid) - 1):
            w1, w2 = grid[i], grid[i + 1]
            a, b = values[i], values[i + 1]
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            if a == 0:
                roots.append(float(w1))
                continue
            if a * b > 0 or b == 0:
                continue
            if line_nm.size and ((line_nm >= w1) & (line_nm <= w2)).any():
                # sign flip across a pole, not a zero
                continue
            root = bisect(f, w1, w2, xtol=1e-14, rtol=settings.ZERO_CROSSING_RTOL)
            logger.debug(f"Refined crossing in [{w1}, {w2}] nm to {root}")
            roots.append(float(root))

        if len(grid) and np.isfinite(values[-1]) and values[-1] == 0:
            roots.append(float(grid[-1]))
        return sorted(roots)


polarizability_service = PolarizabilityService()
