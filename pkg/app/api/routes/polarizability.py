from fastapi import APIRouter, HTTPException
import logging

from app.core.errors import AeqsimError
from app.models.optics import (
    AlphaRequest,
    AlphaResponse,
    DepthMatchRequest,
    DepthMatchResponse,
    PolarizabilitySample,
    ZeroCrossingRequest,
    ZeroCrossingResponse,
)
from app.services.atomdata import atomdata_service
from app.services.polarizability import polarizability_service

logger = logging.getLogger(__name__)

router = APIRouter()

@router.post("/alpha", response_model=AlphaResponse)
async def compute_alpha(request: AlphaRequest):
    """Polarizability of a level at each requested wavelength"""
    try:
        species = atomdata_service.get_species()
        samples = [
            PolarizabilitySample(wavelength=w, alpha=polarizability_service.alpha(species, request.level, w))
            for w in request.wavelengths_nm
        ]
        return AlphaResponse(level=request.level, samples=samples)

    except AeqsimError as e:
        logger.warning(f"Rejected alpha request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error computing polarizability: {e}")
        raise HTTPException(status_code=500, detail=f"Error computing polarizability: {str(e)}")

@router.post("/zeros", response_model=ZeroCrossingResponse)
async def find_zeros(request: ZeroCrossingRequest):
    """Tune-out wavelengths, or magic wavelengths when compare_level is given"""
    try:
        species = atomdata_service.get_species()
        if request.compare_level:
            crossings = polarizability_service.find_magic_wavelengths(
                species, request.level, request.compare_level, request.range_nm, request.step_nm
            )
        else:
            crossings = polarizability_service.find_zero_crossings(
                species, request.level, request.range_nm, request.step_nm
            )
        return ZeroCrossingResponse(level=request.level, compare_level=request.compare_level, crossings_nm=crossings)

    except AeqsimError as e:
        logger.warning(f"Rejected zero-crossing request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error finding zero crossings: {e}")
        raise HTTPException(status_code=500, detail=f"Error finding zero crossings: {str(e)}")

@router.post("/depths", response_model=DepthMatchResponse)
async def match_depths(request: DepthMatchRequest):
    """Transport intensity that matches the storage depth"""
    try:
        species = atomdata_service.get_species()
        ratio = polarizability_service.match_depths(request.storage, request.transport, species)
        storage_depth = polarizability_service.lattice_depth(request.storage, species)
        matched = request.transport.model_copy(update={"intensity": request.storage.intensity * ratio})
        return DepthMatchResponse(
            intensity_ratio=ratio,
            storage_depth=storage_depth,
            transport_depth=polarizability_service.lattice_depth(matched, species),
            readout_depths=polarizability_service.readout_trap_depths(storage_depth),
        )

    except AeqsimError as e:
        logger.warning(f"Rejected depth-matching request: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Error matching depths: {e}")
        raise HTTPException(status_code=500, detail=f"Error matching depths: {str(e)}")
