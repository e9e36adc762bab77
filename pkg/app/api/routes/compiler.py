from fastapi import APIRouter, HTTPException
import logging

from app.core.errors import AeqsimError
from app.models.schedule import CompileRequest, Schedule
from app.services.compiler import compiler_service

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/compile", response_model=Schedule)
async def compile_circuit(request: CompileRequest):
    """Lower a circuit to a timed schedule on the given device"""
    try:
        return compiler_service.compile_circuit(request.circuit, request.device)

    except AeqsimError as e:
        logger.warning(f"Circuit not schedulable: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error compiling circuit: {e}")
        raise HTTPException(status_code=500, detail=f"Error compiling circuit: {str(e)}")
