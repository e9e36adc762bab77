"""
Lossy-blockade dynamics of the blocked branch.

    H = Omega/2 (|e><g| + |g><e|) + (-DeltaU - i Gamma/2) |e><e|

on the amplitudes (c_g, c_e). The norm only decays; 1 - |psi|^2 is the
probability that a two-body loss event has occurred.
"""
import cmath
import logging
import math
from typing import Iterable, List, Optional

import numpy as np

from app.core.config import settings
from app.core.errors import AeqsimError, StepSizeError
from app.models.blockade import BlockadeParams, BlockedBranch, BranchReport, LossCurve, TwoLevelAmplitudes

logger = logging.getLogger(__name__)

GATE_AREA = 2 * math.pi


def wrap_phase(phase: float) -> float:
    """Map to (-pi, pi]"""
    wrapped = math.remainder(phase, 2 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


class BlockadeService:
    def hamiltonian(self, params: BlockadeParams) -> np.ndarray:
        d = -params.DeltaU - 0.5j * params.Gamma
        return np.array([[0.0, params.Omega / 2], [params.Omega / 2, d]], dtype=complex)

    def propagator(self, params: BlockadeParams, t: float) -> np.ndarray:
        """exp(-iHt) from the 2x2 eigenstructure.

        H = (d/2) 1 + M with M^2 = s^2 1, s = sqrt(d^2 + Omega^2)/2.
        """
        if t < 0:
            raise AeqsimError(f"Evolution time must be non-negative, got {t}")

        omega = params.Omega
        d = -params.DeltaU - 0.5j * params.Gamma
        s = cmath.sqrt(d * d + omega * omega) / 2
        lam = d / 2
        identity = np.eye(2, dtype=complex)
        m = np.array([[-d / 2, omega / 2], [omega / 2, d / 2]], dtype=complex)

        if abs(s) < settings.EXCEPTIONAL_POINT_TOL * omega:
            # exceptional point: M is nilpotent
            logger.debug(f"Exceptional point at Gamma={params.Gamma}, DeltaU={params.DeltaU}; Jordan propagator")
            return cmath.exp(-1j * lam * t) * (identity - 1j * t * m)

        x = s * t
        if abs(x) < 1.0:
            sinc = cmath.sin(x) / x if x != 0 else 1.0
            return cmath.exp(-1j * lam * t) * (cmath.cos(x) * identity - 1j * t * sinc * m)

        # separate exponentials keep |e_plus|, |e_minus| <= 1 for large Gamma*t
        e_plus = cmath.exp(-1j * (lam + s) * t)
        e_minus = cmath.exp(-1j * (lam - s) * t)
        cos_term = (e_plus + e_minus) / 2
        sin_term = (e_minus - e_plus) / (2j * s)
        return cos_term * identity - 1j * sin_term * m

    def evolve(self, params: BlockadeParams, psi0: TwoLevelAmplitudes, t: float) -> TwoLevelAmplitudes:
        c_g, c_e = self.propagator(params, t) @ np.array([psi0.c_g, psi0.c_e], dtype=complex)
        return TwoLevelAmplitudes(c_g=complex(c_g), c_e=complex(c_e))

    def max_rk4_step(self, params: BlockadeParams) -> float:
        scales = [2 * math.pi / params.Omega]
        if params.Gamma > 0:
            scales.append(1 / params.Gamma)
        if params.DeltaU != 0:
            scales.append(2 * math.pi / abs(params.DeltaU))
        return 0.01 * min(scales)

    def evolve_rk4(self, params: BlockadeParams, psi0: TwoLevelAmplitudes, t: float, dt: float) -> TwoLevelAmplitudes:
        """Fixed-step classical RK4 on d(psi)/dt = -iH psi"""
        bound = self.max_rk4_step(params)
        if not 0 < dt <= bound * (1 + 1e-12):
            raise StepSizeError(f"Step {dt} outside (0, {bound}]")
        if t < 0:
            raise AeqsimError(f"Evolution time must be non-negative, got {t}")

        if t == 0:
            return psi0

        y = np.array([psi0.c_g, psi0.c_e], dtype=complex)
        generator = -1j * self.hamiltonian(params)
        n_steps = math.ceil(t / dt - 1e-9)
        h = t / n_steps

        for _ in range(n_steps):
            k1 = generator @ y
            k2 = generator @ (y + 0.5 * h * k1)
            k3 = generator @ (y + 0.5 * h * k2)
            k4 = generator @ (y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        return TwoLevelAmplitudes(c_g=complex(y[0]), c_e=complex(y[1]))

    def gamma_eff(self, params: BlockadeParams) -> float:
        if params.Gamma == 0:
            return 0.0
        return params.Omega ** 2 * params.Gamma / (4 * (params.DeltaU ** 2 + params.Gamma ** 2 / 4))

    def loss_probability(self, params: BlockadeParams, t: float, method: str = "analytic") -> float:
        if t < 0:
            raise AeqsimError(f"Evolution time must be non-negative, got {t}")
        if method == "analytic":
            loss = 1 - self.evolve(params, TwoLevelAmplitudes(), t).norm_squared
        elif method == "perturbative":
            loss = -math.expm1(-self.gamma_eff(params) * t)
        else:
            raise AeqsimError(f"Unknown loss method: {method}")
        return min(max(loss, 0.0), 1.0)

    def loss_curve(self, params: BlockadeParams, t_max: float, n_points: int, label: Optional[str] = None) -> LossCurve:
        """Analytic loss on a uniform grid of Omega*t in [0, t_max]"""
        if n_points < 2:
            raise AeqsimError(f"A loss curve needs at least 2 points, got {n_points}")
        times = np.linspace(0.0, t_max, n_points)
        loss = [self.loss_probability(params, omega_t / params.Omega) for omega_t in times]
        # norm decay is monotone; clamp rounding noise
        loss = np.maximum.accumulate(loss)
        return LossCurve(label=label, times=times.tolist(), loss=loss.tolist())

    def loss_curves(
        self,
        gammas_over_omega: Iterable[float],
        deltas_over_omega: Iterable[float],
        t_max: float,
        n_points: int,
    ) -> List[LossCurve]:
        curves = []
        for gamma in gammas_over_omega:
            for delta in deltas_over_omega:
                params = BlockadeParams.from_ratios(gamma, delta)
                label = f"gamma_over_omega={gamma:g},delta_over_omega={delta:g}"
                curve = self.loss_curve(params, t_max, n_points, label=label)
                curves.append(curve.model_copy(update={"gamma_over_omega": gamma, "delta_over_omega": delta}))
        logger.info(f"Computed {len(curves)} loss curves up to Omega*t={t_max}")
        return curves

    def blocked_branch(self, params: BlockadeParams, omega_t: float) -> BlockedBranch:
        amplitudes = self.evolve(params, TwoLevelAmplitudes(), omega_t / params.Omega)
        return BlockedBranch(amplitudes=amplitudes, loss=min(max(1 - amplitudes.norm_squared, 0.0), 1.0))

    def fidelity_limit(self, params: BlockadeParams) -> float:
        if params.Gamma == 0:
            return 1.0
        return max(0.0, 1 - params.Omega / params.Gamma)

    def blockade_gate_outcome(self, params: BlockadeParams) -> BranchReport:
        """Blocked branch after the 2pi pulse: phase of c_g, loss, deviation from zero phase"""
        branch = self.blocked_branch(params, GATE_AREA)
        c_g = branch.amplitudes.c_g
        phase = wrap_phase(cmath.phase(c_g)) if c_g != 0 else 0.0
        return BranchReport(
            phase_01=phase,
            loss_01=branch.loss,
            residual_phase=phase,
            fidelity_limit=self.fidelity_limit(params),
        )


blockade_service = BlockadeService()
