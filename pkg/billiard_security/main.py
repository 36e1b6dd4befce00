from fastapi import FastAPI
from contextlib import asynccontextmanager
import logging

from billiard_security import __version__
from billiard_security.core.config import settings
from billiard_security.core.logging import configure_logging
from billiard_security.api.routes import tables, paths, witness

logger = logging.getLogger(__name__)

@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager"""
    configure_logging(settings.LOG_LEVEL, settings.LOG_FILE)
    logger.info(f"Starting Billiard Security API (tolerance profile: {settings.TOLERANCE_PROFILE})")
    yield
    logger.info("Shutting down Billiard Security API...")

# Create FastAPI app
app = FastAPI(
    title="Billiard Security",
    description="Billiard paths, conjugacy and insecurity witnesses for convex tables",
    version=__version__,
    lifespan=lifespan
)

# Include routers
app.include_router(tables.router, prefix="/api/tables", tags=["tables"])
app.include_router(paths.router, prefix="/api/paths", tags=["paths"])
app.include_router(witness.router, prefix="/api/witness", tags=["witness"])

@app.get("/")
async def root():
    """Root endpoint"""
    return {"message": "Billiard Security API", "version": __version__}

@app.get("/health")
async def health_check():
    """Health check endpoint"""
    return {"status": "healthy", "service": "billiard-security"}

if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "billiard_security.main:app",
        host="0.0.0.0",
        port=8000,
        reload=settings.DEBUG
    )
