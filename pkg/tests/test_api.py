"""
HTTP routes, called directly as coroutines
"""
import math

import pytest
from fastapi import HTTPException

from app.api.routes import blockade, budget, compiler, polarizability, register
from app.main import VERSION, app, health_check
from app.models.blockade import CurvesRequest, EvolveRequest, GateRequest
from app.models.optics import AlphaRequest, DepthMatchRequest, LatticeSpec, ZeroCrossingRequest
from app.models.register import PhaseGateRequest, RegisterRunRequest, ShiftOp, TransferOp
from app.models.schedule import Circuit, CompileRequest, Device, Gate, PriceRequest
from app.services.register import register_service


@pytest.mark.asyncio
async def test_health_check():
    assert await health_check() == {"status": "healthy", "version": VERSION}


def test_routers_are_mounted():
    paths = {route.path for route in app.routes}
    for path in (
        "/polarizability/alpha",
        "/polarizability/zeros",
        "/polarizability/depths",
        "/blockade/evolve",
        "/blockade/curves",
        "/blockade/gate",
        "/register/run",
        "/register/truth-table/phase-gate",
        "/register/truth-table/blockade",
        "/compiler/compile",
        "/budget/price",
        "/health",
    ):
        assert path in paths


class TestPolarizabilityRoutes:
    @pytest.mark.asyncio
    async def test_alpha(self):
        response = await polarizability.compute_alpha(AlphaRequest(level="1S0", wavelengths_nm=[627.0, 689.2]))
        assert [sample.wavelength for sample in response.samples] == [627.0, 689.2]
        assert response.samples[0].alpha == pytest.approx(426.4, abs=1.0)

    @pytest.mark.asyncio
    async def test_alpha_unknown_level(self):
        with pytest.raises(HTTPException) as excinfo:
            await polarizability.compute_alpha(AlphaRequest(level="9Z9", wavelengths_nm=[627.0]))
        assert excinfo.value.status_code == 400

    @pytest.mark.asyncio
    async def test_zeros(self):
        response = await polarizability.find_zeros(ZeroCrossingRequest(level="3P0", range_nm=(600.0, 650.0)))
        assert response.crossings_nm == [pytest.approx(625.97, abs=0.05)]

    @pytest.mark.asyncio
    async def test_zeros_bad_range(self):
        with pytest.raises(HTTPException) as excinfo:
            await polarizability.find_zeros(ZeroCrossingRequest(level="3P0", range_nm=(650.0, 600.0)))
        assert excinfo.value.status_code == 400

    @pytest.mark.asyncio
    async def test_depths(self):
        request = DepthMatchRequest(
            storage=LatticeSpec(wavelength=627.0, level="1S0"),
            transport=LatticeSpec(wavelength=689.2, level="3P0"),
        )
        response = await polarizability.match_depths(request)
        assert response.intensity_ratio == pytest.approx(0.278, abs=0.002)
        assert response.transport_depth == pytest.approx(response.storage_depth, rel=1e-12)
        assert set(response.readout_depths) == {"0x", "1x"}


class TestBlockadeRoutes:
    @pytest.mark.asyncio
    async def test_evolve_methods_agree(self):
        analytic = await blockade.evolve(EvolveRequest(gamma_over_omega=1.0, delta_over_omega=1.0, omega_t=3.0))
        numeric = await blockade.evolve(
            EvolveRequest(gamma_over_omega=1.0, delta_over_omega=1.0, omega_t=3.0, method="rk4")
        )
        assert numeric.loss == pytest.approx(analytic.loss, abs=1e-8)
        assert 0 < analytic.norm_squared < 1

    @pytest.mark.asyncio
    async def test_curves(self):
        curves = await blockade.loss_curves(CurvesRequest(gamma_over_omega=[10.0, 100.0], n_points=11))
        assert len(curves) == 2
        assert curves[0].loss[-1] > curves[1].loss[-1]

    @pytest.mark.asyncio
    async def test_gate(self):
        report = await blockade.gate_outcome(GateRequest(gamma_over_omega=100.0))
        assert report.loss_01 == pytest.approx(-math.expm1(-2 * math.pi / 100), rel=0.10)


class TestRegisterRoutes:
    @pytest.mark.asyncio
    async def test_run(self):
        reg = register_service.create_register(n_sites=3, qubit_sites=[0])
        request = RegisterRunRequest(register=reg, ops=[TransferOp(), ShiftOp(delta_sites=2), ShiftOp(delta_sites=-2)])
        result = await register.run_protocol(request)
        assert len(result.event_log) == 3
        assert register_service.positions(result.register) == register_service.positions(reg)

    @pytest.mark.asyncio
    async def test_run_failure_reports_op(self):
        reg = register_service.create_register(n_sites=2, qubit_sites=[0])
        request = RegisterRunRequest(register=reg, ops=[TransferOp(), ShiftOp(delta_sites=5)])
        with pytest.raises(HTTPException) as excinfo:
            await register.run_protocol(request)
        assert excinfo.value.status_code == 400
        assert excinfo.value.detail["op_index"] == 1
        assert len(excinfo.value.detail["partial_log"]) == 1

    @pytest.mark.asyncio
    async def test_phase_gate_truth_table(self):
        table = await register.phase_gate_truth_table(PhaseGateRequest(U_hz=1e3, T_s=0.5e-3))
        assert table.phases[1] == pytest.approx(math.pi, abs=1e-9)
        assert all(p == pytest.approx(1.0) for p in table.populations)

    @pytest.mark.asyncio
    async def test_blockade_truth_table(self):
        table = await register.blockade_truth_table(GateRequest(gamma_over_omega=100.0))
        assert table.losses[1] == pytest.approx(-math.expm1(-2 * math.pi / 100), rel=0.10)


class TestCompilerRoutes:
    @pytest.mark.asyncio
    async def test_compile_and_price(self):
        circuit = Circuit(n_qubits=6, gates=[Gate(kind="CZ", targets=[0, 5])])
        schedule = await compiler.compile_circuit(CompileRequest(circuit=circuit, device=Device(n_sites=12)))
        assert schedule.total_duration_s == pytest.approx(2.38e-3, abs=0.01e-3)

        priced = await budget.price_schedule(PriceRequest(schedule=schedule))
        assert priced.total_fidelity > 0.99

    @pytest.mark.asyncio
    async def test_unschedulable_is_400(self):
        circuit = Circuit(n_qubits=3, gates=[Gate(kind="CZ", targets=[0, 1])])
        with pytest.raises(HTTPException) as excinfo:
            await compiler.compile_circuit(CompileRequest(circuit=circuit, device=Device(n_sites=2)))
        assert excinfo.value.status_code == 400
