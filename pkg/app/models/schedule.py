"""
Circuit, device and schedule schemas
"""
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

from app.models.budget import NoiseModel
from app.models.register import ProtocolOp, QubitEncoding


class Gate(BaseModel):
    kind: Literal["RX", "RZ", "CZ", "CZ_layer"]
    targets: List[int] = []
    angle: Optional[float] = None  # radians; CZ phase, default pi
    pairs: Optional[List[Tuple[int, int]]] = None  # CZ_layer only
    parity: Literal["even", "odd"] = "even"  # CZ_layer pairing when pairs is omitted
    offset: int = Field(1, ge=1)

    @model_validator(mode="after")
    def validate_shape(self):
        if self.kind in ("RX", "RZ"):
            if len(self.targets) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
            if self.angle is None:
                raise ValueError(f"{self.kind} needs an angle")
        elif self.kind == "CZ":
            if len(self.targets) != 2 or self.targets[0] == self.targets[1]:
                raise ValueError("CZ needs two distinct targets")
        return self


class Circuit(BaseModel):
    n_qubits: int = Field(..., ge=1)
    gates: List[Gate] = []

    @model_validator(mode="after")
    def validate_targets(self):
        for index, gate in enumerate(self.gates):
            qubits = list(gate.targets)
            for pair in gate.pairs or []:
                if pair[0] == pair[1]:
                    raise ValueError(f"Gate {index}: CZ pair {pair} is not distinct")
                qubits.extend(pair)
            bad = [q for q in qubits if not 0 <= q < self.n_qubits]
            if bad:
                raise ValueError(f"Gate {index} targets qubits {bad} outside 0..{self.n_qubits - 1}")
        return self


class Device(BaseModel):
    n_sites: int = Field(..., ge=1)
    qubit_sites: Optional[List[int]] = None  # default: qubit q at site q
    spacing_nm: float = Field(344.6, gt=0)
    trap_frequency_hz: float = Field(25e3, gt=0)
    gradient_g_per_cm: float = Field(100.0, ge=0)
    gradient_echo: bool = True  # compiled schedules refocus the static gradient
    margin: Optional[float] = Field(None, ge=1)
    transport_time_per_site_s: Optional[float] = Field(None, gt=0)
    encoding: QubitEncoding = QubitEncoding()

    gate_mechanism: Literal["collisional", "blockade"] = "collisional"
    collision_shift_hz: float = Field(1e3, gt=0)  # U
    hold_time_s: Optional[float] = Field(None, ge=0)
    park_partner: bool = False

    blockade_gamma_over_omega: float = Field(100.0, ge=0)
    blockade_delta_over_omega: float = 0.0
    rabi_hz: float = Field(200.0, gt=0)


class Layer(BaseModel):
    label: str
    ops: List[ProtocolOp]
    duration_s: float = Field(..., ge=0)
    sites: List[int] = []
    occupation: List[Tuple[str, float]] = []  # (level, seconds) per involved atom
    collisional_exposure_s: float = 0.0
    blockade_loss: float = Field(0.0, ge=0, le=1)


class Schedule(BaseModel):
    layers: List[Layer] = []
    total_duration_s: float = 0.0
    device: Device

    @property
    def ops(self) -> List[ProtocolOp]:
        return [op for layer in self.layers for op in layer.ops]


# Request schemas for the HTTP surface

class CompileRequest(BaseModel):
    circuit: Circuit
    device: Device


class PriceRequest(BaseModel):
    schedule: Schedule
    noise_model: Optional[NoiseModel] = None
