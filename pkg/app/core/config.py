from pathlib import Path
from typing import Tuple

from pydantic_settings import BaseSettings

BUNDLED_SPECIES_PATH = Path(__file__).resolve().parent.parent / "data" / "sr87.json"


class Settings(BaseSettings):
    # Species data
    AEQSIM_SPECIES_PATH: str = str(BUNDLED_SPECIES_PATH)

    # Polarizability
    RESONANCE_WINDOW_NM: float = 0.01
    ZERO_CROSSING_RTOL: float = 1e-10
    DEPTH_HZ_PER_AU: float = 1.0  # identity by default: depths stay in a.u.*I0
    READOUT_DEPTH_FRACTIONS: str = "0.6667,0.3333"  # |0x>, |1x> relative to storage

    # Blockade dynamics
    EXCEPTIONAL_POINT_TOL: float = 1e-12

    # Register / compiler timing
    TIMING_MARGIN: float = 10.0
    TRANSPORT_TIME_PER_SITE_S: float = 50e-6

    # Application
    LOG_LEVEL: str = "INFO"
    DEBUG: bool = False
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    class Config:
        env_file = ".env"
        case_sensitive = True

    @property
    def readout_depth_fractions(self) -> Tuple[float, float]:
        zero_x, one_x = (float(part) for part in self.READOUT_DEPTH_FRACTIONS.split(","))
        return zero_x, one_x


settings = Settings()
