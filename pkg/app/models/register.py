"""
Schemas for the dual-lattice register and its protocol ops
"""
import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.blockade import BlockadeParams
from app.models.species import AtomicState

Lattice = Literal["storage", "transport", "both"]

# |0> = |1S0, m_I=-9/2>, |1> = |1S0, m_I=-7/2>
DEFAULT_ZERO = AtomicState(level="1S0", m=-4.5)
DEFAULT_ONE = AtomicState(level="1S0", m=-3.5)
# readout / addressing levels |0x>, |1x> in 3P2 F=13/2
ZERO_X = AtomicState(level="3P2", F=6.5, m=-6.5)
ONE_X = AtomicState(level="3P2", F=6.5, m=-5.5)


class QubitEncoding(BaseModel):
    model_config = ConfigDict(frozen=True)

    zero: AtomicState = DEFAULT_ZERO
    one: AtomicState = DEFAULT_ONE

    def state(self, bit: int) -> AtomicState:
        return self.one if bit else self.zero


class FieldConfig(BaseModel):
    B: float = 0.0  # G
    gradient: float = Field(0.0, ge=0)  # G/cm
    # each op runs as halves under +gradient and -gradient; the static gradient then leaves no phase
    gradient_echo: bool = False


class AtomRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    qubit: int = Field(..., ge=0)
    site: int = Field(..., ge=0)
    lattice: Lattice = "storage"
    internal: AtomicState
    phase: float = 0.0  # radians, mod 2pi
    lost: bool = False

    def key(self) -> Tuple:
        return (self.qubit, self.site, self.lattice, self.internal.level, self.internal.F, self.internal.m, self.lost)

    def occupies(self, lattice: str) -> bool:
        return self.lattice == lattice or self.lattice == "both"


class Branch(BaseModel):
    """One definite atom configuration; amplitude = weight * exp(i*(phase + sum of atom phases))"""
    atoms: List[AtomRecord]
    weight: float = Field(1.0, ge=0)
    phase: float = 0.0
    # set on configurations that left through a loss channel; they are outside the coherent sum
    loss_channel: Optional[str] = None

    @property
    def probability(self) -> float:
        return self.weight ** 2

    @property
    def total_phase(self) -> float:
        return (self.phase + sum(atom.phase for atom in self.atoms)) % (2 * math.pi)

    @property
    def amplitude(self) -> complex:
        return self.weight * complex(math.cos(self.total_phase), math.sin(self.total_phase))

    def key(self) -> Tuple:
        return tuple(sorted(atom.key() for atom in self.atoms))


class LossRecord(BaseModel):
    """Incoherent record of probability leaving the coherent register"""
    op_index: Optional[int] = None
    kind: str
    sites: List[int] = []
    probability: float = Field(..., ge=0)


class EventRecord(BaseModel):
    index: int
    kind: str
    t_start_s: float
    t_end_s: float
    warnings: List[str] = []
    result: Optional[Dict[str, Any]] = None


class Register(BaseModel):
    n_sites: int = Field(..., ge=1)
    spacing_nm: float = Field(344.6, gt=0)
    field_config: FieldConfig = FieldConfig()
    trap_frequency_hz: float = Field(25e3, gt=0)
    encoding: QubitEncoding = QubitEncoding()
    branches: List[Branch]
    losses: List[LossRecord] = []
    event_log: List[EventRecord] = []
    clock_s: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def validate_sites(self):
        for branch in self.branches:
            slots = set()
            for atom in branch.atoms:
                if atom.site >= self.n_sites:
                    raise ValueError(f"Atom of qubit {atom.qubit} at site {atom.site} outside 0..{self.n_sites - 1}")
                if atom.lost:
                    continue
                for lattice in ("storage", "transport"):
                    if atom.occupies(lattice):
                        if (atom.site, lattice) in slots:
                            raise ValueError(f"Two atoms in the {lattice} slot of site {atom.site}")
                        slots.add((atom.site, lattice))
        return self

    @property
    def live_branches(self) -> List[Branch]:
        return [branch for branch in self.branches if branch.loss_channel is None]

    @property
    def lost_branches(self) -> List[Branch]:
        return [branch for branch in self.branches if branch.loss_channel is not None]

    @property
    def survival_probability(self) -> float:
        return sum(branch.probability for branch in self.live_branches)

    @property
    def loss_probability(self) -> float:
        return sum(record.probability for record in self.losses)


# Protocol ops, discriminated on `kind`

class PulseOp(BaseModel):
    kind: Literal["pulse"] = "pulse"
    state_from: AtomicState
    state_to: AtomicState
    area: float = Field(..., ge=0)  # radians
    phase: float = 0.0  # laser phase
    target: Union[Literal["global"], int, List[int]] = "global"
    detuning_hz: float = 0.0
    rabi_hz: Optional[float] = Field(None, gt=0)
    duration_s: Optional[float] = Field(None, ge=0)
    blockade: Optional[BlockadeParams] = None

    @property
    def site_selective(self) -> bool:
        return self.target != "global"

    def target_sites(self) -> Optional[List[int]]:
        if self.target == "global":
            return None
        return [self.target] if isinstance(self.target, int) else list(self.target)


class TransferOp(BaseModel):
    kind: Literal["transfer"] = "transfer"
    direction: Literal["to_transport", "to_storage"] = "to_transport"
    qubit_selector: Literal[0, 1] = 0
    site_selective: bool = False
    sites: Optional[List[int]] = None
    duration_s: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def validate_sites(self):
        if self.site_selective and not self.sites:
            raise ValueError("Site-selective transfer needs a list of sites")
        if not self.site_selective and self.sites:
            raise ValueError("Sites given for a global transfer")
        return self


class ShiftOp(BaseModel):
    kind: Literal["shift"] = "shift"
    delta_sites: int
    duration_s: Optional[float] = Field(None, ge=0)


class Collision(BaseModel):
    U_hz: float
    enabled: bool = True
    loss_rate_hz: Optional[float] = Field(None, ge=0)


class HoldOp(BaseModel):
    kind: Literal["hold"] = "hold"
    duration_s: float = Field(..., ge=0)
    collision: Optional[Collision] = None
    gradient_g_per_cm: Optional[float] = None


class MeasureOp(BaseModel):
    kind: Literal["measure"] = "measure"
    site: int = Field(..., ge=0)
    observable: Literal["3P2"] = "3P2"
    postselect: Optional[bool] = None
    duration_s: Optional[float] = Field(None, ge=0)


ProtocolOp = Annotated[
    Union[PulseOp, TransferOp, ShiftOp, HoldOp, MeasureOp],
    Field(discriminator="kind"),
]


class TimingConstraint(BaseModel):
    omega_t: float = Field(..., gt=0)  # Hz
    omega_e: Optional[float] = Field(None, gt=0)  # Hz
    margin: float = Field(10.0, ge=1)


class TimingCheck(BaseModel):
    ok: bool
    tau_s: float
    required_s: float
    message: Optional[str] = None


class ProtocolResult(BaseModel):
    register: Register
    event_log: List[EventRecord]


class TruthTable(BaseModel):
    """Phases, populations and losses on (|0,0>, |0,1>, |1,0>, |1,1>)"""
    phases: List[Optional[float]]
    populations: List[float]
    losses: List[float]
    residual_phase: Optional[float] = None

    @field_validator("phases")
    @classmethod
    def validate_length(cls, v):
        if len(v) != 4:
            raise ValueError("Truth tables have four entries")
        return v


class LossSample(BaseModel):
    shots: int
    seed: int
    survived: int
    lost: Dict[str, int]


# Request schemas for the HTTP surface

class RegisterRunRequest(BaseModel):
    register: Register
    ops: List[ProtocolOp] = []


class PhaseGateRequest(BaseModel):
    U_hz: float = Field(..., ge=0)
    T_s: float = Field(..., ge=0)
