from fastapi import APIRouter, HTTPException
import logging

from app.core.errors import AeqsimError
from app.models.budget import FidelityBudget
from app.models.schedule import PriceRequest
from app.services.compiler import compiler_service

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/price", response_model=FidelityBudget)
async def price_schedule(request: PriceRequest):
    """Itemized fidelity budget of a schedule; reference noise model when none is given"""
    try:
        return compiler_service.price(request.schedule, request.noise_model)

    except AeqsimError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error pricing schedule: {e}")
        raise HTTPException(status_code=500, detail=f"Error pricing schedule: {str(e)}")
