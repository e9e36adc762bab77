from fastapi import APIRouter, HTTPException
import logging

from app.core.errors import AeqsimError, ProtocolError
from app.models.blockade import BlockadeParams, GateRequest
from app.models.register import PhaseGateRequest, ProtocolResult, RegisterRunRequest, TruthTable
from app.services.register import register_service

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/run", response_model=ProtocolResult)
async def run_protocol(request: RegisterRunRequest):
    """Apply a protocol to a register and return the final register with its event log"""
    try:
        return register_service.run_protocol(request.register, request.ops)

    except ProtocolError as e:
        logger.warning(f"Protocol aborted at op {e.op_index}: {e}")
        raise HTTPException(
            status_code=400,
            detail={
                "message": str(e),
                "op_index": e.op_index,
                "partial_log": [event.model_dump() for event in e.partial_log],
            },
        )
    except AeqsimError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error running protocol: {e}")
        raise HTTPException(status_code=500, detail=f"Error running protocol: {str(e)}")

@router.post("/truth-table/phase-gate", response_model=TruthTable)
async def phase_gate_truth_table(request: PhaseGateRequest):
    try:
        return register_service.phase_gate_truth_table(request.U_hz, request.T_s)

    except AeqsimError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing phase-gate truth table: {e}")
        raise HTTPException(status_code=500, detail=f"Error computing truth table: {str(e)}")

@router.post("/truth-table/blockade", response_model=TruthTable)
async def blockade_truth_table(request: GateRequest):
    try:
        params = BlockadeParams.from_ratios(request.gamma_over_omega, request.delta_over_omega)
        return register_service.blockade_gate_truth_table(params)

    except AeqsimError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing blockade truth table: {e}")
        raise HTTPException(status_code=500, detail=f"Error computing truth table: {str(e)}")
