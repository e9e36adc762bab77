from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from contextlib import asynccontextmanager
import logging
import uvicorn

from app.core.config import settings
from app.api.routes import blockade, budget, compiler, polarizability, register
from app.services.atomdata import atomdata_service

logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"

@asynccontextmanager
async def lifespan(app: FastAPI):
    # Startup: load and validate the species document once
    species = atomdata_service.get_species()
    logger.info(f"Serving species {species.name} from {settings.AEQSIM_SPECIES_PATH}")
    yield

# Create FastAPI app
app = FastAPI(
    title="aeqsim",
    description="Dual-lattice alkaline-earth quantum computing simulator",
    version=VERSION,
    lifespan=lifespan
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(polarizability.router, prefix="/polarizability", tags=["polarizability"])
app.include_router(blockade.router, prefix="/blockade", tags=["blockade"])
app.include_router(register.router, prefix="/register", tags=["register"])
app.include_router(compiler.router, prefix="/compiler", tags=["compiler"])
app.include_router(budget.router, prefix="/budget", tags=["budget"])

# Health check
@app.get("/health")
async def health_check():
    return {"status": "healthy", "version": VERSION}

if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG
    )
