"""
Dual-lattice register state machine.

A register is a coherent sum of branches, each a definite configuration of
atoms (site, lattice, internal state). Ops map branches to branches; after
every op branches with identical configurations are merged coherently.
Probability that leaves through loss channels is kept as incoherent
LossRecords, and the configuration it left in stays in the branch list with
its atoms flagged lost and a loss_channel set. Those branches take no part in
later ops. Unless the register refocuses it, the static gradient adds a
site-dependent phase to clock-level atoms while every op runs.
"""
import cmath
import itertools
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import AeqsimError, MissingCoefficientError, ProtocolError
from app.models.blockade import BlockadeParams
from app.models.register import (
    ONE_X,
    ZERO_X,
    AtomRecord,
    Branch,
    Collision,
    EventRecord,
    FieldConfig,
    HoldOp,
    LossRecord,
    LossSample,
    MeasureOp,
    ProtocolOp,
    ProtocolResult,
    PulseOp,
    QubitEncoding,
    Register,
    ShiftOp,
    TimingCheck,
    TimingConstraint,
    TransferOp,
    TruthTable,
)
from app.models.species import AtomicState, SpeciesModel
from app.services.atomdata import NM_PER_CM, atomdata_service
from app.services.blockade import blockade_service, wrap_phase

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi
CLOCK_LEVELS = ("1S0", "3P0")
# amplitudes below this are dropped from the branch list
PRUNE_AMPLITUDE = 1e-12

BASIS = [(0, 0), (0, 1), (1, 0), (1, 1)]

# (atoms, weight, phase) before merging
_Child = Tuple[List[AtomRecord], float, float]


class RegisterService:
    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    def create_register(
        self,
        n_sites: int,
        qubit_sites: Sequence[int],
        bits: Optional[Sequence[int]] = None,
        spacing_nm: float = 344.6,
        gradient: float = 0.0,
        B: float = 0.0,
        trap_frequency_hz: float = 25e3,
        encoding: Optional[QubitEncoding] = None,
        gradient_echo: bool = False,
    ) -> Register:
        encoding = encoding or QubitEncoding()
        bits = bits if bits is not None else [0] * len(qubit_sites)
        if len(bits) != len(qubit_sites):
            raise AeqsimError("One bit per qubit site is required")
        if len(set(qubit_sites)) != len(qubit_sites):
            raise AeqsimError(f"Qubit sites must be distinct: {list(qubit_sites)}")

        atoms = [
            AtomRecord(qubit=q, site=site, lattice="storage", internal=encoding.state(bit))
            for q, (site, bit) in enumerate(zip(qubit_sites, bits))
        ]
        return Register(
            n_sites=n_sites,
            spacing_nm=spacing_nm,
            field_config=FieldConfig(B=B, gradient=gradient, gradient_echo=gradient_echo),
            trap_frequency_hz=trap_frequency_hz,
            encoding=encoding,
            branches=[Branch(atoms=atoms)],
        )

    def basis_register(self, template: Register, bits: Sequence[int]) -> Register:
        """Same layout as template, every qubit back in storage in the given basis state"""
        atoms = sorted(template.branches[0].atoms, key=lambda atom: atom.qubit)
        if len(bits) != len(atoms):
            raise AeqsimError(f"Expected {len(atoms)} bits, got {len(bits)}")
        home = [
            AtomRecord(qubit=atom.qubit, site=atom.site, lattice="storage", internal=template.encoding.state(bit))
            for atom, bit in zip(atoms, bits)
        ]
        return template.model_copy(
            update={"branches": [Branch(atoms=home)], "losses": [], "event_log": [], "clock_s": 0.0}
        )

    # ------------------------------------------------------------------
    # timing
    # ------------------------------------------------------------------
    def validate_transfer_timing(self, constraint: TimingConstraint, tau_transfer: float) -> TimingCheck:
        periods = [1 / constraint.omega_t]
        if constraint.omega_e is not None:
            periods.append(1 / constraint.omega_e)
        required = constraint.margin * max(periods)
        ok = tau_transfer >= required * (1 - 1e-12)
        message = None if ok else f"transfer time {tau_transfer:.3e} s below required {required:.3e} s"
        return TimingCheck(ok=ok, tau_s=tau_transfer, required_s=required, message=message)

    def addressing_splitting(self, register: Register, species: Optional[SpeciesModel] = None) -> float:
        """Neighbour-site splitting (Hz) of the field-sensitive addressing level"""
        species = species or atomdata_service.get_species()
        return atomdata_service.gradient_site_splitting(
            species, ZERO_X, register.field_config.gradient, register.spacing_nm
        )

    def timing_constraint(
        self, register: Register, site_selective: bool, species: Optional[SpeciesModel] = None
    ) -> TimingConstraint:
        omega_e = None
        if site_selective:
            splitting = self.addressing_splitting(register, species)
            omega_e = splitting if splitting > 0 else None
        return TimingConstraint(omega_t=register.trap_frequency_hz, omega_e=omega_e, margin=settings.TIMING_MARGIN)

    def site_selective_resolved(
        self, species: SpeciesModel, state: AtomicState, gradient: float, spacing: float, duration: float
    ) -> bool:
        """True iff the pulse's spectral width 1/duration is below the neighbour splitting"""
        if duration <= 0:
            return False
        splitting = atomdata_service.gradient_site_splitting(species, state, gradient, spacing)
        return 1 / duration < splitting

    def op_duration(self, register: Register, op: ProtocolOp, species: Optional[SpeciesModel] = None) -> float:
        if isinstance(op, PulseOp):
            if op.duration_s is not None:
                return op.duration_s
            return op.area / (TWO_PI * op.rabi_hz) if op.rabi_hz else 0.0
        if isinstance(op, TransferOp):
            if op.duration_s is not None:
                return op.duration_s
            constraint = self.timing_constraint(register, op.site_selective, species)
            return self.validate_transfer_timing(constraint, 0.0).required_s
        if isinstance(op, ShiftOp):
            if op.duration_s is not None:
                return op.duration_s
            return abs(op.delta_sites) * settings.TRANSPORT_TIME_PER_SITE_S
        if isinstance(op, HoldOp):
            return op.duration_s
        return op.duration_s or 0.0

    def _timing_warnings(
        self, register: Register, op: ProtocolOp, duration: float, species: Optional[SpeciesModel]
    ) -> List[str]:
        warnings = []
        if isinstance(op, TransferOp):
            constraint = self.timing_constraint(register, op.site_selective, species)
            check = self.validate_transfer_timing(constraint, duration)
            if not check.ok:
                warnings.append(check.message)
        elif isinstance(op, PulseOp) and op.site_selective:
            species = species or atomdata_service.get_species()
            resolved = False
            for state in (op.state_from, op.state_to):
                try:
                    resolved = resolved or self.site_selective_resolved(
                        species, state, register.field_config.gradient, register.spacing_nm, duration
                    )
                except MissingCoefficientError:
                    continue
            if not resolved:
                warnings.append(f"site-selective pulse of {duration:.3e} s does not resolve neighbouring sites")
        return warnings

    # ------------------------------------------------------------------
    # ops
    # ------------------------------------------------------------------
    def apply_op(self, register: Register, op: ProtocolOp, species: Optional[SpeciesModel] = None) -> Register:
        register, _ = self._apply(register, op, species, op_index=None)
        return register

    def _apply(
        self,
        register: Register,
        op: ProtocolOp,
        species: Optional[SpeciesModel],
        op_index: Optional[int],
        duration: Optional[float] = None,
    ) -> Tuple[Register, Optional[Dict]]:
        """Apply one op to the live branches; branches that already left through a loss channel pass through"""
        if duration is None:
            duration = self.op_duration(register, op, species)
        targets = op.target_sites() if isinstance(op, PulseOp) else (op.sites if isinstance(op, TransferOp) else None)
        if targets:
            self._check_not_lost(register, targets)

        live = register.model_copy(update={"branches": register.live_branches})
        gradient = self._gradient_during(register, op)
        if gradient and duration > 0:
            live = live.model_copy(
                update={"branches": self._accrue_gradient(live, gradient, duration, species)}
            )

        losses: List[LossRecord] = []
        dropped: List[Branch] = []
        result = None

        if isinstance(op, PulseOp):
            children = self._apply_pulse(live, op, losses, dropped, op_index)
        elif isinstance(op, TransferOp):
            children = self._apply_transfer(live, op)
        elif isinstance(op, ShiftOp):
            children = self._apply_shift(live, op)
        elif isinstance(op, HoldOp):
            children = self._apply_hold(live, op, losses, dropped, op_index)
        elif isinstance(op, MeasureOp):
            children, result = self._apply_measure(live, op)
        else:
            raise ProtocolError(f"Unknown op: {op!r}")

        dropped = [branch for branch in dropped if branch.weight >= PRUNE_AMPLITUDE]
        branches = self._merge(children) + register.lost_branches + dropped
        return (
            register.model_copy(update={"branches": branches, "losses": register.losses + losses}),
            result,
        )

    @staticmethod
    def _gradient_during(register: Register, op: ProtocolOp) -> float:
        """Gradient (G/cm) the clock-level atoms feel while the op runs"""
        if isinstance(op, HoldOp) and op.gradient_g_per_cm is not None:
            return op.gradient_g_per_cm
        if register.field_config.gradient_echo:
            return 0.0
        return register.field_config.gradient

    def _accrue_gradient(
        self, register: Register, gradient: float, duration: float, species: Optional[SpeciesModel]
    ) -> List[Branch]:
        """Site-dependent Zeeman phase -2pi * kappa * m * G * x * t on every clock-level atom"""
        species = species or atomdata_service.get_species()
        branches = []
        for branch in register.branches:
            atoms = []
            for atom in branch.atoms:
                if atom.lost or atom.internal.level not in CLOCK_LEVELS:
                    atoms.append(atom)
                    continue
                level = atomdata_service.get_level(species, atom.internal.level)
                if level.zeeman_coefficient is None:
                    raise MissingCoefficientError(f"Level {level.name} has no Zeeman coefficient")
                x_cm = atom.site * register.spacing_nm / NM_PER_CM
                shift_hz = level.zeeman_coefficient * atom.internal.m * gradient * x_cm
                phase = (atom.phase - TWO_PI * shift_hz * duration) % TWO_PI
                atoms.append(atom.model_copy(update={"phase": phase}))
            branches.append(branch.model_copy(update={"atoms": atoms}))
        return branches

    @staticmethod
    def _flag_lost(atoms: List[AtomRecord], site: int) -> List[AtomRecord]:
        return [
            atom.model_copy(update={"lost": True}) if atom.site == site and not atom.lost else atom for atom in atoms
        ]

    def _apply_pulse(
        self,
        register: Register,
        op: PulseOp,
        losses: List[LossRecord],
        dropped: List[Branch],
        op_index: Optional[int],
    ) -> List[_Child]:
        sites = op.target_sites()
        if sites is not None:
            self._require_gradient(register, "pulse")
            self._check_sites(register, sites)

        free = self._rotation(op)
        lost_probability = 0.0
        children: List[_Child] = []

        for branch in register.branches:
            partial: List[_Child] = [(list(branch.atoms), branch.weight, branch.phase)]

            for k, atom in enumerate(branch.atoms):
                if atom.lost or (sites is not None and atom.site not in sites):
                    continue
                if atom.internal == op.state_from:
                    column = 0
                elif atom.internal == op.state_to:
                    column = 1
                else:
                    continue

                matrix = free
                if op.blockade is not None and self._has_3p2_partner(branch, atom):
                    matrix = self._blocked_rotation(op, op.blockade)

                expanded: List[_Child] = []
                for atoms, weight, phase in partial:
                    kept = 0.0
                    for row, state in ((0, op.state_from), (1, op.state_to)):
                        u = matrix[row, column]
                        kept += abs(u) ** 2
                        if weight * abs(u) < PRUNE_AMPLITUDE:
                            continue
                        new_atoms = list(atoms)
                        new_atoms[k] = atoms[k].model_copy(
                            update={"internal": state, "phase": atoms[k].phase + cmath.phase(u)}
                        )
                        expanded.append((new_atoms, weight * abs(u), phase))
                    lost = weight ** 2 * max(0.0, 1 - kept)
                    if lost > 0:
                        # the blocked atom leaves together with its 3P2 partner
                        lost_probability += lost
                        dropped.append(
                            Branch(atoms=self._flag_lost(atoms, atom.site), weight=math.sqrt(lost),
                                   phase=phase % TWO_PI, loss_channel="blockade")
                        )
                partial = expanded
            children.extend(partial)

        if lost_probability > 0:
            losses.append(
                LossRecord(op_index=op_index, kind="blockade", sites=sites or [], probability=lost_probability)
            )
        return children

    def _rotation(self, op: PulseOp) -> np.ndarray:
        """R_phi(area) on (state_from, state_to); columns are inputs"""
        theta, phi = op.area, op.phase
        coupling = np.array([[0, cmath.exp(-1j * phi)], [cmath.exp(1j * phi), 0]], dtype=complex)

        if op.detuning_hz == 0:
            c, s = math.cos(theta / 2), math.sin(theta / 2)
            return c * np.eye(2, dtype=complex) - 1j * s * coupling

        if not op.rabi_hz:
            raise ProtocolError("A detuned pulse needs rabi_hz")
        omega = TWO_PI * op.rabi_hz
        delta = TWO_PI * op.detuning_hz
        generalized = math.hypot(omega, delta)
        t = theta / omega
        generator = (omega * coupling - delta * np.diag([1.0, -1.0])) / generalized
        return math.cos(generalized * t / 2) * np.eye(2, dtype=complex) - 1j * math.sin(generalized * t / 2) * generator

    def _blocked_rotation(self, op: PulseOp, params: BlockadeParams) -> np.ndarray:
        """Non-unitary evolution of an atom whose site already holds a 3P2 atom"""
        propagator = blockade_service.propagator(params, op.area / params.Omega)
        frame = np.diag([1.0, cmath.exp(1j * op.phase)])
        return frame @ propagator @ frame.conj()

    @staticmethod
    def _has_3p2_partner(branch: Branch, atom: AtomRecord) -> bool:
        return any(
            other is not atom and not other.lost and other.site == atom.site and other.internal.level == "3P2"
            for other in branch.atoms
        )

    def _apply_transfer(self, register: Register, op: TransferOp) -> List[_Child]:
        if op.site_selective:
            self._require_gradient(register, "transfer")
            self._check_sites(register, op.sites)

        selected = register.encoding.state(op.qubit_selector)
        clock_state = AtomicState(level="3P0", m=selected.m)
        if op.direction == "to_transport":
            source, target = ("storage", selected), ("transport", clock_state)
            phase_shift = -math.pi / 2
        else:
            source, target = ("transport", clock_state), ("storage", selected)
            phase_shift = math.pi / 2

        children: List[_Child] = []
        for branch in register.branches:
            atoms = list(branch.atoms)
            for k, atom in enumerate(branch.atoms):
                if atom.lost or atom.lattice != source[0] or atom.internal != source[1]:
                    continue
                if op.site_selective and atom.site not in op.sites:
                    continue
                occupied = any(
                    other is not atom and not other.lost and other.site == atom.site and other.occupies(target[0])
                    for other in branch.atoms
                )
                if occupied:
                    raise ProtocolError(f"Transfer into occupied {target[0]} slot at site {atom.site}")
                atoms[k] = atom.model_copy(
                    update={"lattice": target[0], "internal": target[1], "phase": atom.phase + phase_shift}
                )
            children.append((atoms, branch.weight, branch.phase))
        return children

    def _apply_shift(self, register: Register, op: ShiftOp) -> List[_Child]:
        children: List[_Child] = []
        for branch in register.branches:
            atoms = []
            for atom in branch.atoms:
                if atom.lost or atom.lattice != "transport":
                    atoms.append(atom)
                    continue
                site = atom.site + op.delta_sites
                if not 0 <= site < register.n_sites:
                    raise ProtocolError(
                        f"Shift by {op.delta_sites} moves qubit {atom.qubit} to site {site} "
                        f"outside 0..{register.n_sites - 1}"
                    )
                atoms.append(atom.model_copy(update={"site": site}))
            children.append((atoms, branch.weight, branch.phase))
        return children

    def _apply_hold(
        self,
        register: Register,
        op: HoldOp,
        losses: List[LossRecord],
        dropped: List[Branch],
        op_index: Optional[int],
    ) -> List[_Child]:
        """Collision phase and loss; the gradient phase of the hold is accrued in _apply"""
        collision: Optional[Collision] = op.collision if op.collision and op.collision.enabled else None
        children: List[_Child] = []
        lost_probability = 0.0
        collision_sites = set()

        for branch in register.branches:
            atoms = list(branch.atoms)
            weight, phase = branch.weight, branch.phase

            if collision is not None:
                clock_sites: Dict[int, int] = {}
                for atom in atoms:
                    if not atom.lost and atom.internal.level in CLOCK_LEVELS:
                        clock_sites[atom.site] = clock_sites.get(atom.site, 0) + 1
                pairs = [site for site, count in clock_sites.items() if count >= 2]
                for site in pairs:
                    phase += TWO_PI * collision.U_hz * op.duration_s
                    collision_sites.add(site)
                    if collision.loss_rate_hz:
                        survival = math.exp(-collision.loss_rate_hz * op.duration_s)
                        lost = weight ** 2 * (1 - survival)
                        if lost > 0:
                            lost_probability += lost
                            dropped.append(
                                Branch(atoms=self._flag_lost(atoms, site), weight=math.sqrt(lost),
                                       phase=phase % TWO_PI, loss_channel="collision")
                            )
                        weight *= math.sqrt(survival)

            children.append((atoms, weight, phase))

        if lost_probability > 0:
            losses.append(
                LossRecord(op_index=op_index, kind="collision", sites=sorted(collision_sites), probability=lost_probability)
            )
        return children

    def _apply_measure(self, register: Register, op: MeasureOp) -> Tuple[List[_Child], Dict]:
        if op.site >= register.n_sites:
            raise ProtocolError(f"Measured site {op.site} outside 0..{register.n_sites - 1}")

        def occupied(branch: Branch) -> bool:
            return any(
                not atom.lost and atom.site == op.site and atom.internal.level == "3P2" for atom in branch.atoms
            )

        probability = sum(branch.probability for branch in register.branches if occupied(branch))
        survival = register.survival_probability
        result = {"site": op.site, "observable": op.observable, "probability": probability, "survival": survival}
        logger.info(f"Measured 3P2 occupancy {probability:.6f} at site {op.site}")

        branches = register.branches
        if op.postselect is not None:
            kept = [branch for branch in branches if occupied(branch) == op.postselect]
            kept_probability = sum(branch.probability for branch in kept)
            if kept_probability <= 0:
                raise ProtocolError(f"Postselection on an outcome of zero probability at site {op.site}")
            scale = 1 / math.sqrt(kept_probability)
            branches = [branch.model_copy(update={"weight": branch.weight * scale}) for branch in kept]
            result["postselect"] = op.postselect

        return [(list(b.atoms), b.weight, b.phase) for b in branches], result

    # ------------------------------------------------------------------
    # sequencing
    # ------------------------------------------------------------------
    def run_protocol(
        self, register: Register, ops: Iterable[ProtocolOp], species: Optional[SpeciesModel] = None
    ) -> ProtocolResult:
        log: List[EventRecord] = []
        clock = register.clock_s

        for index, op in enumerate(ops):
            try:
                duration = self.op_duration(register, op, species)
                warnings = self._timing_warnings(register, op, duration, species)
                register, result = self._apply(register, op, species, op_index=index, duration=duration)
            except AeqsimError as e:
                logger.error(f"Protocol aborted at op {index} ({op.kind}): {e}")
                raise ProtocolError(str(e), op_index=index, partial_log=log) from e

            for warning in warnings:
                logger.warning(f"Op {index} ({op.kind}): {warning}")
            event = EventRecord(
                index=index, kind=op.kind, t_start_s=clock, t_end_s=clock + duration, warnings=warnings, result=result
            )
            log.append(event)
            clock += duration
            logger.debug(f"Applied op {index} ({op.kind}): {len(register.branches)} branches")

        register = register.model_copy(update={"event_log": register.event_log + log, "clock_s": clock})
        return ProtocolResult(register=register, event_log=log)

    # ------------------------------------------------------------------
    # protocol builders
    # ------------------------------------------------------------------
    def phase_gate_protocol(
        self,
        i: int,
        j: int,
        U_hz: float,
        T_s: float,
        park_partner: bool = False,
        encoding: Optional[QubitEncoding] = None,
        selective_duration_s: Optional[float] = None,
        shift_duration_s: Optional[float] = None,
        loss_rate_hz: Optional[float] = None,
    ) -> List[ProtocolOp]:
        """Collisional phase gate: |0,1> picks up exp(i 2pi U T)"""
        encoding = encoding or QubitEncoding()
        moved = [i] if park_partner else sorted({i, j})
        ops: List[ProtocolOp] = []
        if park_partner:
            ops.append(self._shelve(encoding, j, 0.0, selective_duration_s))
        ops += [
            TransferOp(direction="to_transport", qubit_selector=0, site_selective=True, sites=moved,
                       duration_s=selective_duration_s),
            ShiftOp(delta_sites=j - i, duration_s=shift_duration_s),
            HoldOp(duration_s=T_s, collision=Collision(U_hz=U_hz, loss_rate_hz=loss_rate_hz)),
            ShiftOp(delta_sites=i - j, duration_s=shift_duration_s),
            TransferOp(direction="to_storage", qubit_selector=0, site_selective=True, sites=moved,
                       duration_s=selective_duration_s),
        ]
        if park_partner:
            ops.append(self._shelve(encoding, j, math.pi, selective_duration_s))
        return ops

    def blockade_gate_protocol(
        self,
        i: int,
        j: int,
        params: BlockadeParams,
        area_scale: float = 1.0,
        encoding: Optional[QubitEncoding] = None,
        rabi_hz: Optional[float] = None,
        selective_duration_s: Optional[float] = None,
        shift_duration_s: Optional[float] = None,
    ) -> List[ProtocolOp]:
        """pi / 2pi / pi blockade sequence; the 2pi pulse on |1> is blocked by a 3P2 partner"""
        encoding = encoding or QubitEncoding()
        transported_zero = AtomicState(level="3P0", m=encoding.zero.m)
        sites = sorted({i, j})
        return [
            TransferOp(direction="to_transport", qubit_selector=0, site_selective=True, sites=sites,
                       duration_s=selective_duration_s),
            ShiftOp(delta_sites=j - i, duration_s=shift_duration_s),
            PulseOp(state_from=transported_zero, state_to=ZERO_X, area=math.pi * area_scale, rabi_hz=rabi_hz),
            PulseOp(state_from=encoding.one, state_to=ONE_X, area=TWO_PI * area_scale, target=sites,
                    rabi_hz=rabi_hz, blockade=params),
            PulseOp(state_from=transported_zero, state_to=ZERO_X, area=math.pi * area_scale, rabi_hz=rabi_hz),
            ShiftOp(delta_sites=i - j, duration_s=shift_duration_s),
            TransferOp(direction="to_storage", qubit_selector=0, site_selective=True, sites=sites,
                       duration_s=selective_duration_s),
        ]

    def _shelve(self, encoding: QubitEncoding, site: int, phase: float, duration_s: Optional[float]) -> PulseOp:
        """Site-selective pi pulse parking |0> in |0x> on its own site (phase pi undoes it)"""
        return PulseOp(state_from=encoding.zero, state_to=ZERO_X, area=math.pi, phase=phase, target=site,
                       duration_s=duration_s)

    def readout_protocol(self, site: int, encoding: Optional[QubitEncoding] = None,
                         duration_s: Optional[float] = None) -> List[ProtocolOp]:
        """Shelve |0> at the site into |0x>, then image 3P2"""
        encoding = encoding or QubitEncoding()
        return [self._shelve(encoding, site, 0.0, duration_s), MeasureOp(site=site)]

    def gradient_echo(self, T_s: float, gradient: float) -> List[ProtocolOp]:
        return [HoldOp(duration_s=T_s, gradient_g_per_cm=gradient), HoldOp(duration_s=T_s, gradient_g_per_cm=-gradient)]

    # ------------------------------------------------------------------
    # truth tables
    # ------------------------------------------------------------------
    def truth_table(self, template: Register, ops: List[ProtocolOp], species: Optional[SpeciesModel] = None) -> TruthTable:
        phases: List[Optional[float]] = []
        populations, losses = [], []
        for bits in BASIS:
            start = self.basis_register(template, bits)
            final = self.run_protocol(start, ops, species).register
            home = start.branches[0].key()
            match = next((branch for branch in final.branches if branch.key() == home), None)
            phases.append(match.total_phase if match else None)
            populations.append(match.probability if match else 0.0)
            losses.append(final.loss_probability)

        residual = wrap_phase(phases[1] - math.pi) if phases[1] is not None else None
        return TruthTable(phases=phases, populations=populations, losses=losses, residual_phase=residual)

    def _two_qubit_template(self, park_partner: bool = False) -> Register:
        # partner |0> lands at 2j - i unless parked
        n_sites = 2 if park_partner else 3
        return self.create_register(n_sites=n_sites, qubit_sites=[0, 1], gradient=100.0, gradient_echo=True)

    def phase_gate_truth_table(self, U_hz: float, T_s: float, park_partner: bool = False) -> TruthTable:
        if U_hz < 0 or T_s < 0:
            raise AeqsimError("U and T must be non-negative")
        ops = self.phase_gate_protocol(0, 1, U_hz, T_s, park_partner=park_partner)
        table = self.truth_table(self._two_qubit_template(park_partner), ops)
        logger.info(f"Phase-gate truth table for U*T={U_hz * T_s}: {table.phases}")
        return table

    def blockade_gate_truth_table(self, params: BlockadeParams, area_scale: float = 1.0) -> TruthTable:
        ops = self.blockade_gate_protocol(0, 1, params, area_scale=area_scale)
        table = self.truth_table(self._two_qubit_template(), ops)
        logger.info(f"Blockade truth table: phases={table.phases} losses={table.losses}")
        return table

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------
    def unitary_of(self, template: Register, ops: List[ProtocolOp], species: Optional[SpeciesModel] = None) -> np.ndarray:
        """Matrix of the protocol on the computational basis, qubit 0 most significant"""
        n = len(template.branches[0].atoms)
        basis = list(itertools.product((0, 1), repeat=n))
        keys = {self.basis_register(template, bits).branches[0].key(): index for index, bits in enumerate(basis)}
        matrix = np.zeros((len(basis), len(basis)), dtype=complex)
        for column, bits in enumerate(basis):
            final = self.run_protocol(self.basis_register(template, bits), ops, species).register
            for branch in final.branches:
                row = keys.get(branch.key())
                if row is not None:
                    matrix[row, column] = branch.amplitude
        return matrix

    def sample_losses(
        self,
        register: Register,
        ops: List[ProtocolOp],
        shots: int,
        seed: int,
        species: Optional[SpeciesModel] = None,
    ) -> LossSample:
        """Seeded Monte Carlo draw of which loss channel (if any) each shot ends in"""
        final = self.run_protocol(register, ops, species).register
        labels = [f"{record.kind}@op{record.op_index}" for record in final.losses]
        p_lost = [record.probability for record in final.losses]
        p_survive = max(0.0, 1.0 - sum(p_lost))
        pvals = np.array(p_lost + [p_survive])
        counts = np.random.default_rng(seed).multinomial(shots, pvals / pvals.sum())

        lost: Dict[str, int] = {}
        for label, count in zip(labels, counts[:-1]):
            lost[label] = lost.get(label, 0) + int(count)
        return LossSample(shots=shots, seed=seed, survived=int(counts[-1]), lost=lost)

    def positions(self, register: Register) -> List[Dict[int, Tuple[int, str]]]:
        return [{atom.qubit: (atom.site, atom.lattice) for atom in branch.atoms} for branch in register.live_branches]

    @staticmethod
    def _merge(children: List[_Child]) -> List[Branch]:
        groups: Dict[Tuple, List[_Child]] = {}
        for child in children:
            key = tuple(sorted(atom.key() for atom in child[0]))
            groups.setdefault(key, []).append(child)

        branches = []
        for group in groups.values():
            if len(group) == 1:
                atoms, weight, phase = group[0]
                if weight >= PRUNE_AMPLITUDE:
                    atoms = [
                        atom if 0 <= atom.phase < TWO_PI else atom.model_copy(update={"phase": atom.phase % TWO_PI})
                        for atom in atoms
                    ]
                    branches.append(Branch(atoms=atoms, weight=weight, phase=phase % TWO_PI))
                continue
            amplitude = sum(
                weight * cmath.exp(1j * (phase + sum(atom.phase for atom in atoms))) for atoms, weight, phase in group
            )
            if abs(amplitude) < PRUNE_AMPLITUDE:
                continue
            atoms = [atom.model_copy(update={"phase": 0.0}) for atom in group[0][0]]
            branches.append(Branch(atoms=atoms, weight=abs(amplitude), phase=cmath.phase(amplitude) % TWO_PI))
        return branches

    @staticmethod
    def _require_gradient(register: Register, what: str):
        if register.field_config.gradient <= 0:
            raise ProtocolError(f"Site-selective {what} needs a magnetic field gradient > 0")

    @staticmethod
    def _check_sites(register: Register, sites: Sequence[int]):
        bad = [site for site in sites if not 0 <= site < register.n_sites]
        if bad:
            raise ProtocolError(f"Target sites {bad} outside 0..{register.n_sites - 1}")

    @staticmethod
    def _check_not_lost(register: Register, sites: Sequence[int]):
        """Raise if every atom the op could reach at a site is lost"""
        for site in sites:
            live = [[atom for atom in branch.atoms if atom.site == site] for branch in register.live_branches]
            if any(here and all(atom.lost for atom in here) for here in live):
                raise ProtocolError(f"Op targets a lost atom at site {site}")
            present = any(not atom.lost for here in live for atom in here)
            flagged = any(
                atom.lost and atom.site == site for branch in register.lost_branches for atom in branch.atoms
            )
            if flagged and not present:
                raise ProtocolError(f"Op targets site {site}, whose atoms were lost at an earlier op")


register_service = RegisterService()
