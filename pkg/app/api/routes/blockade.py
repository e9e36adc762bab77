from fastapi import APIRouter, HTTPException
from typing import List
import logging

from app.core.errors import AeqsimError
from app.models.blockade import (
    BlockadeParams,
    BranchReport,
    CurvesRequest,
    EvolveRequest,
    EvolveResponse,
    GateRequest,
    LossCurve,
    TwoLevelAmplitudes,
)
from app.services.blockade import blockade_service

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/evolve", response_model=EvolveResponse)
async def evolve(request: EvolveRequest):
    """Evolve the blocked branch for Omega*t in dimensionless units"""
    try:
        params = BlockadeParams.from_ratios(request.gamma_over_omega, request.delta_over_omega)
        psi0 = TwoLevelAmplitudes(c_g=request.psi0[0], c_e=request.psi0[1])
        if request.method == "rk4":
            dt = 0.1 * blockade_service.max_rk4_step(params)
            psi = blockade_service.evolve_rk4(params, psi0, request.omega_t, dt)
        else:
            psi = blockade_service.evolve(params, psi0, request.omega_t)

        return EvolveResponse(
            c_g=(psi.c_g.real, psi.c_g.imag),
            c_e=(psi.c_e.real, psi.c_e.imag),
            norm_squared=psi.norm_squared,
            loss=max(0.0, psi0.norm_squared - psi.norm_squared),
        )

    except AeqsimError as e:
        logger.warning(f"Rejected evolve request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error evolving blocked branch: {e}")
        raise HTTPException(status_code=500, detail=f"Error evolving blocked branch: {str(e)}")

@router.post("/curves", response_model=List[LossCurve])
async def loss_curves(request: CurvesRequest):
    """Loss-probability curves over a grid of Gamma/Omega and DeltaU/Omega"""
    try:
        return blockade_service.loss_curves(
            request.gamma_over_omega, request.delta_over_omega, request.t_max, request.n_points
        )

    except AeqsimError as e:
        logger.warning(f"Rejected curves request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing loss curves: {e}")
        raise HTTPException(status_code=500, detail=f"Error computing loss curves: {str(e)}")

@router.post("/gate", response_model=BranchReport)
async def gate_outcome(request: GateRequest):
    """Phase and loss of the blocked |0,1> branch after the 2pi pulse"""
    try:
        params = BlockadeParams.from_ratios(request.gamma_over_omega, request.delta_over_omega)
        return blockade_service.blockade_gate_outcome(params)

    except AeqsimError as e:
        logger.warning(f"Rejected gate request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing gate outcome: {e}")
        raise HTTPException(status_code=500, detail=f"Error computing gate outcome: {str(e)}")
