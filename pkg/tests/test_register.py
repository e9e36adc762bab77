"""
Register state machine: ops, merging, timing and the gate protocols
"""
import math

import numpy as np
import pytest

from app.core.errors import AeqsimError, ProtocolError
from app.models.blockade import BlockadeParams
from app.models.register import (
    DEFAULT_ONE,
    DEFAULT_ZERO,
    ONE_X,
    ZERO_X,
    Collision,
    FieldConfig,
    HoldOp,
    MeasureOp,
    PulseOp,
    Register,
    ShiftOp,
    TimingConstraint,
    TransferOp,
)
from app.models.species import AtomicState
from app.services.register import register_service
from tests.conftest import phase_distance

TWO_PI = 2 * math.pi
CLOCK_ZERO = AtomicState(level="3P0", m=-4.5)


def single_atom(bit=0, gradient=100.0, n_sites=4, site=1, gradient_echo=False):
    return register_service.create_register(
        n_sites=n_sites, qubit_sites=[site], bits=[bit], gradient=gradient, gradient_echo=gradient_echo
    )


def only_branch(register: Register):
    assert len(register.branches) == 1
    return register.branches[0]


class TestConstruction:
    def test_create_register(self):
        register = register_service.create_register(n_sites=5, qubit_sites=[0, 2], bits=[0, 1])
        atoms = only_branch(register).atoms
        assert [atom.internal for atom in atoms] == [DEFAULT_ZERO, DEFAULT_ONE]
        assert all(atom.lattice == "storage" for atom in atoms)
        assert register.survival_probability == pytest.approx(1.0)

    def test_rejects_shared_sites(self):
        with pytest.raises(AeqsimError):
            register_service.create_register(n_sites=5, qubit_sites=[1, 1])

    def test_rejects_sites_outside_register(self):
        with pytest.raises(ValueError):
            register_service.create_register(n_sites=2, qubit_sites=[0, 3])


class TestPulses:
    def test_pi_pulse(self):
        register = register_service.apply_op(
            single_atom(), PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi)
        )
        branch = only_branch(register)
        assert branch.atoms[0].internal == DEFAULT_ONE
        assert branch.amplitude == pytest.approx(-1j)

    def test_pi_pulse_with_laser_phase(self):
        phi = 0.7
        register = register_service.apply_op(
            single_atom(), PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi, phase=phi)
        )
        assert only_branch(register).amplitude == pytest.approx(-1j * np.exp(1j * phi))

    def test_half_pi_pulses_interfere(self):
        half = PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi / 2)
        register = register_service.apply_op(single_atom(), half)
        assert len(register.branches) == 2
        register = register_service.apply_op(register, half)
        branch = only_branch(register)
        assert branch.atoms[0].internal == DEFAULT_ONE
        assert branch.probability == pytest.approx(1.0)

    def test_2pi_pulse_flips_sign(self):
        register = register_service.apply_op(
            single_atom(), PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=TWO_PI)
        )
        assert only_branch(register).amplitude == pytest.approx(-1.0)

    def test_detuned_pulse_needs_rabi(self):
        with pytest.raises(ProtocolError):
            register_service.apply_op(
                single_atom(), PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi, detuning_hz=10.0)
            )

    def test_far_detuned_pulse_barely_transfers(self):
        op = PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi, detuning_hz=1e4, rabi_hz=10.0)
        register = register_service.apply_op(single_atom(), op)
        kept = [b for b in register.branches if b.atoms[0].internal == DEFAULT_ZERO]
        assert kept[0].probability > 0.999

    def test_site_selective_pulse_needs_gradient(self):
        op = PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi, target=1)
        with pytest.raises(ProtocolError):
            register_service.apply_op(single_atom(gradient=0.0), op)

    def test_site_selective_pulse_leaves_other_sites(self):
        register = register_service.create_register(n_sites=4, qubit_sites=[0, 1], gradient=100.0)
        register = register_service.apply_op(
            register, PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi, target=[1])
        )
        atoms = only_branch(register).atoms
        assert atoms[0].internal == DEFAULT_ZERO
        assert atoms[1].internal == DEFAULT_ONE

    def test_pulse_on_unrelated_states_is_identity(self):
        register = register_service.apply_op(
            single_atom(), PulseOp(state_from=CLOCK_ZERO, state_to=ZERO_X, area=math.pi)
        )
        assert only_branch(register).atoms[0].internal == DEFAULT_ZERO
        assert only_branch(register).amplitude == pytest.approx(1.0)


class TestTransport:
    def test_transfer_moves_selected_state(self):
        register = register_service.create_register(n_sites=4, qubit_sites=[0, 1], bits=[0, 1])
        register = register_service.apply_op(register, TransferOp(direction="to_transport", qubit_selector=0))
        moved, stayed = only_branch(register).atoms
        assert moved.lattice == "transport" and moved.internal == CLOCK_ZERO
        assert stayed.lattice == "storage" and stayed.internal == DEFAULT_ONE

    def test_transfer_round_trip_is_phase_free(self):
        register = single_atom(gradient=0.0)
        for direction in ("to_transport", "to_storage"):
            register = register_service.apply_op(register, TransferOp(direction=direction))
        branch = only_branch(register)
        assert branch.atoms[0].lattice == "storage"
        assert phase_distance(branch.total_phase, 0.0) < 1e-12

    def test_site_selective_transfer_needs_gradient(self):
        with pytest.raises(ProtocolError):
            register_service.apply_op(
                single_atom(gradient=0.0), TransferOp(site_selective=True, sites=[1])
            )

    def test_transfer_op_validates_sites(self):
        with pytest.raises(ValueError):
            TransferOp(site_selective=True)
        with pytest.raises(ValueError):
            TransferOp(site_selective=False, sites=[0])

    def test_transfer_into_occupied_slot(self):
        register = register_service.create_register(n_sites=4, qubit_sites=[0, 1], bits=[0, 0], gradient=100.0)
        register = register_service.apply_op(register, TransferOp(site_selective=True, sites=[0]))
        register = register_service.apply_op(register, ShiftOp(delta_sites=1))
        with pytest.raises(ProtocolError):
            register_service.apply_op(register, TransferOp(site_selective=True, sites=[1]))

    def test_shift_only_moves_transport_atoms(self):
        register = register_service.create_register(n_sites=4, qubit_sites=[0, 1], bits=[0, 1])
        register = register_service.apply_op(register, TransferOp())
        register = register_service.apply_op(register, ShiftOp(delta_sites=2))
        assert register_service.positions(register) == [{0: (2, "transport"), 1: (1, "storage")}]

    def test_shift_out_of_bounds(self):
        register = register_service.apply_op(single_atom(n_sites=3, site=2), TransferOp())
        with pytest.raises(ProtocolError):
            register_service.apply_op(register, ShiftOp(delta_sites=1))

    def test_shift_round_trip_property(self):
        rng = np.random.default_rng(1234)
        for _ in range(1000):
            n_sites = int(rng.integers(3, 12))
            n_qubits = int(rng.integers(1, min(n_sites, 4) + 1))
            sites = sorted(rng.choice(n_sites, size=n_qubits, replace=False).tolist())
            bits = rng.integers(0, 2, size=n_qubits).tolist()
            delta = int(rng.integers(-n_sites + 1, n_sites))
            register = register_service.create_register(n_sites=n_sites, qubit_sites=sites, bits=bits)
            register = register_service.apply_op(register, TransferOp())
            before = register_service.positions(register)

            moved = [s + delta for s, b in zip(sites, bits) if b == 0]
            if any(not 0 <= s < n_sites for s in moved):
                with pytest.raises(ProtocolError):
                    register_service.apply_op(register, ShiftOp(delta_sites=delta))
                continue
            register = register_service.apply_op(register, ShiftOp(delta_sites=delta))
            register = register_service.apply_op(register, ShiftOp(delta_sites=-delta))
            assert register_service.positions(register) == before


class TestHold:
    def test_collision_phase_needs_clock_pair(self):
        register = register_service.create_register(n_sites=3, qubit_sites=[0, 1], bits=[0, 1])
        register = register_service.apply_op(register, TransferOp(site_selective=False))
        register = register_service.apply_op(register, ShiftOp(delta_sites=1))
        register = register_service.apply_op(
            register, HoldOp(duration_s=0.25e-3, collision=Collision(U_hz=1e3))
        )
        # -pi/2 from the transfer plus 2 pi U T
        assert phase_distance(only_branch(register).total_phase, -math.pi / 2 + TWO_PI * 0.25) < 1e-12

    def test_disabled_collision(self):
        register = register_service.create_register(n_sites=3, qubit_sites=[0, 1], bits=[0, 1])
        register = register_service.apply_op(register, TransferOp())
        register = register_service.apply_op(register, ShiftOp(delta_sites=1))
        register = register_service.apply_op(
            register, HoldOp(duration_s=0.25e-3, collision=Collision(U_hz=1e3, enabled=False))
        )
        assert phase_distance(only_branch(register).total_phase, -math.pi / 2) < 1e-12

    def test_collision_loss_is_incoherent(self):
        register = register_service.create_register(n_sites=3, qubit_sites=[0, 1], bits=[0, 1])
        register = register_service.apply_op(register, TransferOp())
        register = register_service.apply_op(register, ShiftOp(delta_sites=1))
        register = register_service.apply_op(
            register, HoldOp(duration_s=1e-3, collision=Collision(U_hz=0.0, loss_rate_hz=100.0))
        )
        expected = -math.expm1(-0.1)
        assert register.loss_probability == pytest.approx(expected)
        assert register.survival_probability + register.loss_probability == pytest.approx(1.0)

    def test_gradient_hold_phase(self, sr87):
        register = single_atom(site=2, gradient_echo=True)
        register = register_service.apply_op(register, TransferOp())
        register = register_service.apply_op(register, HoldOp(duration_s=1e-3, gradient_g_per_cm=100.0))
        x_cm = 2 * 344.6e-7
        expected = -TWO_PI * (-295.0) * (-4.5) * 100.0 * x_cm * 1e-3
        assert phase_distance(only_branch(register).total_phase, -math.pi / 2 + expected) < 1e-12

    def test_gradient_echo_cancels(self):
        register = register_service.apply_op(single_atom(site=3), TransferOp())
        start = only_branch(register).total_phase
        register = register_service.run_protocol(register, register_service.gradient_echo(2e-3, 100.0)).register
        assert phase_distance(only_branch(register).total_phase, start) < 1e-12

    def collided_pair(self, loss_rate_hz):
        register = register_service.create_register(n_sites=3, qubit_sites=[0, 1], bits=[0, 1], gradient=100.0)
        ops = [
            TransferOp(),
            ShiftOp(delta_sites=1),
            HoldOp(duration_s=1e-3, collision=Collision(U_hz=0.0, loss_rate_hz=loss_rate_hz)),
        ]
        return register_service.run_protocol(register, ops).register

    def test_total_loss_flags_atoms(self):
        register = self.collided_pair(1e5)
        assert register.live_branches == []
        assert register.survival_probability == pytest.approx(0.0, abs=1e-12)
        assert register.loss_probability == pytest.approx(1.0)
        (lost,) = register.lost_branches
        assert lost.loss_channel == "collision"
        assert all(atom.lost for atom in lost.atoms if atom.site == 1)
        assert {atom.qubit for atom in lost.atoms} == {0, 1}

    @pytest.mark.parametrize(
        "op",
        [
            PulseOp(state_from=DEFAULT_ONE, state_to=ONE_X, area=math.pi, target=1),
            TransferOp(direction="to_storage", site_selective=True, sites=[1]),
        ],
    )
    def test_op_on_lost_site_raises(self, op):
        register = self.collided_pair(1e5)
        with pytest.raises(ProtocolError) as excinfo:
            register_service.run_protocol(register, [op])
        assert excinfo.value.op_index == 0

    def test_partial_loss_leaves_survivors_addressable(self):
        register = self.collided_pair(100.0)
        (lost,) = register.lost_branches
        assert lost.probability == pytest.approx(-math.expm1(-0.1))
        assert register.survival_probability + lost.probability == pytest.approx(1.0)

        op = PulseOp(state_from=DEFAULT_ONE, state_to=ONE_X, area=math.pi, target=1)
        after = register_service.apply_op(register, op)
        assert after.lost_branches == [lost]
        assert after.live_branches[0].atoms[1].internal == ONE_X


class TestStaticGradient:
    # 1S0 |0> at site 2 under 100 G/cm
    SHIFT_HZ = -185.0 * -4.5 * 100.0 * 2 * 344.6e-7

    def test_hold_accrues_register_gradient(self):
        register = single_atom(site=2)
        register = register_service.apply_op(register, HoldOp(duration_s=1e-3))
        expected = -TWO_PI * self.SHIFT_HZ * 1e-3
        assert phase_distance(only_branch(register).total_phase, expected) < 1e-12

    def test_every_op_accrues(self):
        # a pulse with a finite rabi frequency lasts area / (2 pi rabi)
        op = PulseOp(state_from=CLOCK_ZERO, state_to=ZERO_X, area=math.pi, rabi_hz=500.0)
        register = register_service.apply_op(single_atom(site=2), op)
        expected = -TWO_PI * self.SHIFT_HZ * 1e-3
        assert phase_distance(only_branch(register).total_phase, expected) < 1e-12

    def test_reversed_gradient_hold_refocuses(self):
        ops = [HoldOp(duration_s=1e-3), HoldOp(duration_s=1e-3, gradient_g_per_cm=-100.0)]
        register = register_service.run_protocol(single_atom(site=2), ops).register
        assert phase_distance(only_branch(register).total_phase, 0.0) < 1e-12

    def test_echoed_register_accrues_nothing(self):
        register = register_service.apply_op(single_atom(site=2, gradient_echo=True), HoldOp(duration_s=1e-3))
        assert phase_distance(only_branch(register).total_phase, 0.0) < 1e-12

    def test_phase_gate_on_unrefocused_register(self):
        register = register_service.create_register(n_sites=4, qubit_sites=[1, 3], bits=[1, 1], gradient=100.0)
        ops = register_service.phase_gate_protocol(1, 3, 1e3, 0.5e-3)
        final = register_service.run_protocol(register, ops).register
        # both |1> atoms sit in 1S0 for the whole gate
        shift_hz = -185.0 * -3.5 * 100.0 * (1 + 3) * 344.6e-7
        expected = -TWO_PI * shift_hz * final.clock_s
        assert phase_distance(only_branch(final).total_phase, expected) < 1e-9
        assert phase_distance(expected, 0.0) > 0.05

        echoed = register.model_copy(update={"field_config": FieldConfig(gradient=100.0, gradient_echo=True)})
        final = register_service.run_protocol(echoed, ops).register
        assert phase_distance(only_branch(final).total_phase, 0.0) < 1e-9


class TestMeasure:
    def test_readout_of_zero_and_one(self):
        for bit, expected in ((0, 1.0), (1, 0.0)):
            result = register_service.run_protocol(single_atom(bit=bit), register_service.readout_protocol(1))
            assert result.event_log[-1].result["probability"] == pytest.approx(expected)

    def test_postselection_renormalises(self):
        half = PulseOp(state_from=DEFAULT_ZERO, state_to=DEFAULT_ONE, area=math.pi / 2)
        ops = [half, *register_service.readout_protocol(1)[:1], MeasureOp(site=1, postselect=False)]
        register = register_service.run_protocol(single_atom(), ops).register
        branch = only_branch(register)
        assert branch.atoms[0].internal == DEFAULT_ONE
        assert branch.probability == pytest.approx(1.0)

    def test_postselect_on_impossible_outcome(self):
        with pytest.raises(ProtocolError):
            register_service.run_protocol(single_atom(bit=1), [MeasureOp(site=1, postselect=True)])


class TestTiming:
    def test_validate_transfer_timing(self):
        constraint = TimingConstraint(omega_t=25e3, omega_e=14.47e3, margin=10)
        check = register_service.validate_transfer_timing(constraint, 1e-3)
        assert check.ok
        assert check.required_s == pytest.approx(10 / 14.47e3)
        assert not register_service.validate_transfer_timing(constraint, 1e-4).ok

    @pytest.mark.parametrize("duration,resolved", [(1e-3, True), (1e-5, False), (0.0, False)])
    def test_site_selective_resolved(self, sr87, duration, resolved):
        # |0x> neighbours split by 14.47 kHz at 100 G/cm
        assert register_service.site_selective_resolved(sr87, ZERO_X, 100.0, 344.6, duration) is resolved

    def test_qubit_states_are_not_resolved(self, sr87):
        assert not register_service.site_selective_resolved(sr87, DEFAULT_ZERO, 100.0, 344.6, 1e-3)

    def test_short_transfer_is_logged_not_fatal(self):
        register = single_atom()
        result = register_service.run_protocol(
            register, [TransferOp(site_selective=True, sites=[1], duration_s=1e-6)]
        )
        assert result.event_log[0].warnings
        assert result.register.branches[0].atoms[0].lattice == "transport"

    def test_event_log_is_contiguous(self):
        ops = register_service.phase_gate_protocol(0, 1, 1e3, 0.5e-3)
        template = register_service.create_register(n_sites=3, qubit_sites=[0, 1], gradient=100.0)
        log = register_service.run_protocol(template, ops).event_log
        assert [event.index for event in log] == list(range(len(ops)))
        for previous, event in zip(log, log[1:]):
            assert event.t_start_s == pytest.approx(previous.t_end_s)
        assert log[2].t_end_s - log[2].t_start_s == pytest.approx(0.5e-3)

    def test_failure_reports_index_and_partial_log(self):
        ops = [TransferOp(), ShiftOp(delta_sites=10)]
        with pytest.raises(ProtocolError) as excinfo:
            register_service.run_protocol(single_atom(), ops)
        assert excinfo.value.op_index == 1
        assert len(excinfo.value.partial_log) == 1


class TestPhaseGate:
    @pytest.mark.parametrize("U,T", [(1e3, 0.5e-3), (2e3, 0.1e-3), (500.0, 0.3e-3), (1e3, 1e-3), (1e3, 0.0)])
    def test_truth_table(self, U, T):
        table = register_service.phase_gate_truth_table(U, T)
        expected = [0.0, TWO_PI * U * T, 0.0, 0.0]
        for phase, target in zip(table.phases, expected):
            assert phase_distance(phase, target) < 1e-9
        assert table.populations == pytest.approx([1.0] * 4)
        assert table.losses == pytest.approx([0.0] * 4)

    def test_parked_partner_truth_table(self):
        table = register_service.phase_gate_truth_table(1e3, 0.5e-3, park_partner=True)
        for phase, target in zip(table.phases, [0.0, math.pi, 0.0, 0.0]):
            assert phase_distance(phase, target) < 1e-9

    def test_cz_unitary(self):
        template = register_service.create_register(n_sites=3, qubit_sites=[0, 1], gradient=100.0, gradient_echo=True)
        unitary = register_service.unitary_of(template, register_service.phase_gate_protocol(0, 1, 1e3, 0.5e-3))
        assert np.allclose(unitary, np.diag([1, -1, 1, 1]), atol=1e-9)

    def test_two_pi_gates_compose_to_identity(self):
        template = register_service.create_register(n_sites=3, qubit_sites=[0, 1], gradient=100.0, gradient_echo=True)
        ops = register_service.phase_gate_protocol(0, 1, 1e3, 0.5e-3)
        assert np.allclose(register_service.unitary_of(template, ops + ops), np.eye(4), atol=1e-9)

    def test_positions_restored(self):
        template = register_service.create_register(n_sites=3, qubit_sites=[0, 1], gradient=100.0)
        ops = register_service.phase_gate_protocol(0, 1, 1e3, 0.5e-3)
        for bits in ((0, 0), (0, 1), (1, 0), (1, 1)):
            start = register_service.basis_register(template, bits)
            final = register_service.run_protocol(start, ops).register
            assert register_service.positions(final) == register_service.positions(start)

    def test_negative_inputs(self):
        with pytest.raises(AeqsimError):
            register_service.phase_gate_truth_table(-1.0, 1e-3)


class TestBlockadeGate:
    def test_coherent_blockade_truth_table(self):
        table = register_service.blockade_gate_truth_table(BlockadeParams.from_ratios(0, 1000))
        for phase, target in zip(table.phases, [0.0, math.pi, 0.0, 0.0]):
            assert phase_distance(phase, target) < 2e-3
        assert abs(table.residual_phase) <= 2 / 1000
        assert table.losses == pytest.approx([0.0] * 4, abs=1e-12)

    def test_residual_phase_bound(self):
        table = register_service.blockade_gate_truth_table(BlockadeParams.from_ratios(0, 100))
        assert abs(table.residual_phase) <= 2 / 100

    def test_lossy_blockade_truth_table(self):
        table = register_service.blockade_gate_truth_table(BlockadeParams.from_ratios(100, 0))
        assert table.losses[1] == pytest.approx(-math.expm1(-TWO_PI / 100), rel=0.10)
        assert [table.losses[k] for k in (0, 2, 3)] == pytest.approx([0.0] * 3, abs=1e-12)
        assert phase_distance(table.phases[1], math.pi) < 0.05

    def test_miscalibrated_areas_break_the_gate(self):
        table = register_service.blockade_gate_truth_table(BlockadeParams.from_ratios(0, 1000), area_scale=0.5)
        # halved pulses leave every basis state outside its home configuration
        assert [table.populations[k] for k in (0, 2, 3)] == pytest.approx([0.0] * 3, abs=1e-9)
        assert table.populations[1] < 0.5


class TestLossSampling:
    def test_seeded_sampling_is_reproducible(self):
        register = register_service.create_register(n_sites=3, qubit_sites=[0, 1], bits=[0, 1])
        ops = [TransferOp(), ShiftOp(delta_sites=1), HoldOp(duration_s=1e-3, collision=Collision(U_hz=0, loss_rate_hz=500))]
        first = register_service.sample_losses(register, ops, shots=2000, seed=42)
        second = register_service.sample_losses(register, ops, shots=2000, seed=42)
        assert first == second
        assert first.survived + sum(first.lost.values()) == 2000
        lost_fraction = sum(first.lost.values()) / 2000
        assert lost_fraction == pytest.approx(-math.expm1(-0.5), abs=0.05)
