"""
Lower circuits to timed dual-lattice protocol schedules
"""
import logging
import math
from typing import List, Optional, Sequence, Set, Tuple

from app.core.config import settings
from app.core.errors import AeqsimError, ParallelConflictError, UnschedulableError
from app.models.blockade import BlockadeParams
from app.models.budget import FidelityBudget, NoiseModel
from app.models.register import ZERO_X, ProtocolOp, PulseOp, Register
from app.models.schedule import Circuit, Device, Gate, Layer, Schedule
from app.models.species import SpeciesModel
from app.services.atomdata import atomdata_service
from app.services.blockade import blockade_service
from app.services.budget import budget_service
from app.services.register import register_service

logger = logging.getLogger(__name__)


class CompilerService:
    def margin(self, device: Device) -> float:
        return device.margin if device.margin is not None else settings.TIMING_MARGIN

    def shift_time(self, device: Device, delta_sites: int) -> float:
        per_site = device.transport_time_per_site_s or settings.TRANSPORT_TIME_PER_SITE_S
        return abs(delta_sites) * per_site

    def selective_time(self, device: Device, species: Optional[SpeciesModel] = None) -> float:
        """margin * max(1/f_t, 1/f_e) with f_e the neighbour splitting of |0x>"""
        species = species or atomdata_service.get_species()
        splitting = atomdata_service.gradient_site_splitting(
            species, ZERO_X, device.gradient_g_per_cm, device.spacing_nm
        )
        if splitting <= 0:
            raise UnschedulableError("Site-selective operations need a nonzero gradient")
        return self.margin(device) * max(1 / device.trap_frequency_hz, 1 / splitting)

    def sites_of(self, device: Device, n_qubits: int) -> List[int]:
        sites = device.qubit_sites if device.qubit_sites is not None else list(range(n_qubits))
        if len(sites) < n_qubits:
            raise UnschedulableError(f"Device places {len(sites)} qubits, circuit needs {n_qubits}")
        sites = sites[:n_qubits]
        if len(set(sites)) != len(sites) or any(not 0 <= s < device.n_sites for s in sites):
            raise UnschedulableError(f"Invalid qubit placement {sites} on {device.n_sites} sites")
        return sites

    def compile_circuit(self, circuit: Circuit, device: Device, species: Optional[SpeciesModel] = None) -> Schedule:
        if circuit.n_qubits > device.n_sites:
            raise UnschedulableError(f"{circuit.n_qubits} qubits do not fit on {device.n_sites} sites")
        sites = self.sites_of(device, circuit.n_qubits)

        layers: List[Layer] = []
        for gate in circuit.gates:
            if gate.kind == "RX":
                layers.append(self._lower_rx(gate, device, sites, species))
            elif gate.kind == "RZ":
                layers.append(self._lower_rz(gate, device, sites, species))
            elif gate.kind == "CZ":
                layers.append(self._lower_cz(gate, device, sites, species))
            else:
                layers.append(self._lower_cz_layer(gate, device, sites, circuit.n_qubits, species))

        schedule = Schedule(layers=layers, total_duration_s=sum(layer.duration_s for layer in layers), device=device)
        logger.info(
            f"Compiled {len(circuit.gates)} gates into {len(layers)} layers, "
            f"total {schedule.total_duration_s * 1e3:.3f} ms"
        )
        return schedule

    def schedule_duration(self, schedule: Schedule) -> float:
        return sum(layer.duration_s for layer in schedule.layers)

    def price(
        self, schedule: Schedule, noise_model: Optional[NoiseModel] = None, species: Optional[SpeciesModel] = None
    ) -> FidelityBudget:
        noise_model = noise_model or budget_service.default_noise_model(species)
        return budget_service.gate_fidelity_estimate(schedule, noise_model, species=species)

    def template_register(self, schedule: Schedule, n_qubits: int) -> Register:
        device = schedule.device
        return register_service.create_register(
            n_sites=device.n_sites,
            qubit_sites=self.sites_of(device, n_qubits),
            spacing_nm=device.spacing_nm,
            gradient=device.gradient_g_per_cm,
            trap_frequency_hz=device.trap_frequency_hz,
            encoding=device.encoding,
            gradient_echo=device.gradient_echo,
        )

    def execute(self, schedule: Schedule, basis: Sequence[int], species: Optional[SpeciesModel] = None) -> Register:
        """Run the compiled ops on a register prepared in a computational basis state"""
        start = register_service.basis_register(self.template_register(schedule, len(basis)), basis)
        return register_service.run_protocol(start, schedule.ops, species).register

    # ------------------------------------------------------------------
    # lowering
    # ------------------------------------------------------------------
    def _raman(self, device: Device, site: int, area: float, phase: float, duration: float) -> PulseOp:
        encoding = device.encoding
        return PulseOp(state_from=encoding.zero, state_to=encoding.one, area=area, phase=phase % (2 * math.pi),
                       target=site, duration_s=duration)

    def _lower_rx(self, gate: Gate, device: Device, sites: List[int], species) -> Layer:
        site = sites[gate.targets[0]]
        tau = self.selective_time(device, species)
        phase = 0.0 if gate.angle >= 0 else math.pi
        ops = [self._raman(device, site, abs(gate.angle), phase, tau)]
        return Layer(label=f"RX({gate.angle:g}) q{gate.targets[0]}", ops=ops, duration_s=tau, sites=[site],
                     occupation=[(device.encoding.zero.level, tau)])

    def _lower_rz(self, gate: Gate, device: Device, sites: List[int], species) -> Layer:
        # RZ(theta) = RX(-pi/2) RY(-theta) RX(pi/2)
        site = sites[gate.targets[0]]
        tau = self.selective_time(device, species)
        theta = gate.angle
        ops = [
            self._raman(device, site, math.pi / 2, 0.0, tau),
            self._raman(device, site, abs(theta), 3 * math.pi / 2 if theta >= 0 else math.pi / 2, tau),
            self._raman(device, site, math.pi / 2, math.pi, tau),
        ]
        return Layer(label=f"RZ({theta:g}) q{gate.targets[0]}", ops=ops, duration_s=3 * tau, sites=[site],
                     occupation=[(device.encoding.zero.level, 3 * tau)])

    def _hold_time(self, device: Device, angle: Optional[float]) -> float:
        if device.hold_time_s is not None:
            return device.hold_time_s
        phi = math.pi if angle is None else angle % (2 * math.pi)
        return phi / (2 * math.pi * device.collision_shift_hz)

    def _check_touched(self, device: Device, touched: Set[int], label: str):
        bad = sorted(s for s in touched if not 0 <= s < device.n_sites)
        if bad:
            raise UnschedulableError(f"{label} needs sites {bad} outside 0..{device.n_sites - 1}")

    def _lower_cz(self, gate: Gate, device: Device, sites: List[int], species) -> Layer:
        i, j = sites[gate.targets[0]], sites[gate.targets[1]]
        label = f"CZ q{gate.targets[0]},q{gate.targets[1]}"
        if device.gate_mechanism == "blockade":
            return self._lower_blockade_cz(label, i, j, device, species)

        # the moved partner |0> lands on 2j - i, which must be an empty site of the device
        landing = 2 * j - i
        park = device.park_partner
        if not park and not 0 <= landing < device.n_sites:
            logger.info(f"{label}: site {landing} is off the lattice, parking the partner instead")
            park = True
        elif not park and landing in sites:
            logger.info(f"{label}: site {landing} holds a qubit, parking the partner instead")
            park = True
        touched = {i, j} if park else {i, j, 2 * j - i}
        self._check_touched(device, touched, label)

        tau = self.selective_time(device, species)
        shift = self.shift_time(device, j - i)
        T = self._hold_time(device, gate.angle)
        ops = register_service.phase_gate_protocol(
            i, j, device.collision_shift_hz, T, park_partner=park, encoding=device.encoding,
            selective_duration_s=tau, shift_duration_s=shift,
        )
        duration = self._ops_duration(ops)
        partner_level = ZERO_X.level if park else "3P0"
        return Layer(label=label, ops=ops, duration_s=duration, sites=sorted(touched),
                     occupation=[("3P0", duration), (partner_level, duration)], collisional_exposure_s=T)

    def _lower_blockade_cz(self, label: str, i: int, j: int, device: Device, species) -> Layer:
        if device.park_partner:
            raise UnschedulableError("The parked-partner variant applies to the collisional gate only")
        touched = {i, j, 2 * j - i}
        self._check_touched(device, touched, label)

        params = self.blockade_params(device)
        tau = self.selective_time(device, species)
        ops = register_service.blockade_gate_protocol(
            i, j, params, encoding=device.encoding, rabi_hz=device.rabi_hz,
            selective_duration_s=tau, shift_duration_s=self.shift_time(device, j - i),
        )
        duration = self._ops_duration(ops)
        pulse_time = sum(op.area / (2 * math.pi * device.rabi_hz) for op in ops if isinstance(op, PulseOp))
        loss = blockade_service.blockade_gate_outcome(params).loss_01
        occupation = [("3P0", duration - pulse_time), ("3P2", pulse_time)] * 2
        return Layer(label=label, ops=ops, duration_s=duration, sites=sorted(touched), occupation=occupation,
                     blockade_loss=loss)

    def blockade_params(self, device: Device) -> BlockadeParams:
        return BlockadeParams.from_physical(
            omega_hz=device.rabi_hz,
            delta_u_hz=device.blockade_delta_over_omega * device.rabi_hz,
            gamma_hz=device.blockade_gamma_over_omega * device.rabi_hz,
        )

    def layer_pairs(self, gate: Gate, n_qubits: int) -> List[Tuple[int, int]]:
        if gate.pairs is not None:
            return [tuple(pair) for pair in gate.pairs]
        start = 0 if gate.parity == "even" else 1
        return [(q, q + gate.offset) for q in range(start, n_qubits - gate.offset, 2 * gate.offset)]

    def _lower_cz_layer(self, gate: Gate, device: Device, sites: List[int], n_qubits: int, species) -> Layer:
        if device.gate_mechanism == "blockade":
            raise UnschedulableError("CZ_layer is compiled for the collisional mechanism only")
        pairs = self.layer_pairs(gate, n_qubits)
        if not pairs:
            raise UnschedulableError("CZ_layer has no pairs")

        used: Set[int] = set()
        for a, b in pairs:
            if a in used or b in used:
                raise ParallelConflictError(f"CZ_layer pairs overlap at qubit {a if a in used else b}")
            used.update((a, b))

        site_pairs = [(sites[a], sites[b]) for a, b in pairs]
        deltas = {j - i for i, j in site_pairs}
        if len(deltas) != 1:
            raise UnschedulableError(f"CZ_layer pairs need one common shift, got {sorted(deltas)}")
        delta = deltas.pop()

        movers = sorted(i for i, _ in site_pairs)
        partners = sorted(j for _, j in site_pairs)
        if set(movers) & set(partners):
            raise ParallelConflictError("A site is both moved and parked in the same CZ_layer")
        self._check_touched(device, set(movers) | set(partners), "CZ_layer")

        tau = self.selective_time(device, species)
        shift = self.shift_time(device, delta)
        T = self._hold_time(device, gate.angle)
        # parked partners keep every moved |0> from meeting a third qubit
        template = register_service.phase_gate_protocol(
            0, delta, device.collision_shift_hz, T, park_partner=True, encoding=device.encoding,
            selective_duration_s=tau, shift_duration_s=shift,
        )
        ops: List[ProtocolOp] = []
        for op in template:
            if isinstance(op, PulseOp):
                ops.append(op.model_copy(update={"target": partners}))
            elif op.kind == "transfer":
                ops.append(op.model_copy(update={"sites": movers}))
            else:
                ops.append(op)

        duration = self._ops_duration(ops)
        occupation = [("3P0", duration) for _ in movers] + [(ZERO_X.level, duration) for _ in partners]
        label = "CZ_layer " + " ".join(f"q{a},q{b}" for a, b in pairs)
        return Layer(label=label, ops=ops, duration_s=duration, sites=sorted(movers + partners),
                     occupation=occupation, collisional_exposure_s=T * len(pairs))

    def _ops_duration(self, ops: List[ProtocolOp]) -> float:
        total = 0.0
        for op in ops:
            if op.duration_s is not None:
                total += op.duration_s
            elif isinstance(op, PulseOp) and op.rabi_hz:
                total += op.area / (2 * math.pi * op.rabi_hz)
            else:
                raise AeqsimError(f"Compiled {op.kind} op has no duration")
        return total


compiler_service = CompilerService()
