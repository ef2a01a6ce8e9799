"""
Warm-Start GP - HTTP API
Iterative-solver marginal likelihood optimisation for Gaussian process regression
"""

from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.exceptions import RequestValidationError
from contextlib import asynccontextmanager
from pydantic import ValidationError
import time
from loguru import logger

from app.core.config import settings
from app.core.errors import GPError
from app.core.logging import configure_logging
from app.api.routes import training, experiments, bounds

configure_logging()


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan manager"""
    logger.info(f"🚀 {settings.APP_NAME} {settings.VERSION} starting ({settings.ENVIRONMENT})")
    yield
    logger.info(f"👋 {settings.APP_NAME} shutting down...")


app = FastAPI(
    title=f"{settings.APP_NAME} API",
    description="Warm-started iterative linear solvers for GP marginal likelihood optimisation",
    version=settings.VERSION,
    lifespan=lifespan,
    docs_url="/docs" if settings.DEBUG else None,
    redoc_url="/redoc" if settings.DEBUG else None,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)


# Request timing middleware
@app.middleware("http")
async def add_process_time_header(request: Request, call_next):
    start_time = time.perf_counter()
    response = await call_next(request)
    response.headers["X-Process-Time"] = str(time.perf_counter() - start_time)
    return response


@app.exception_handler(GPError)
async def gp_exception_handler(request: Request, exc: GPError):
    logger.warning(f"⚠️ {request.url.path}: {exc.label}: {exc}")
    return JSONResponse(
        status_code=exc.status_code,
        content={
            "success": False,
            "error": exc.label,
            "message": exc.message,
            "context": {key: str(value) for key, value in exc.context.items()},
        },
    )


@app.exception_handler(RequestValidationError)
async def validation_exception_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={
            "success": False,
            "error": "Validation error",
            "message": "Request body does not match the schema",
            "context": {"details": str(exc.errors())},
        },
    )


@app.exception_handler(ValidationError)
async def config_validation_handler(request: Request, exc: ValidationError):
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={
            "success": False,
            "error": "Validation error",
            "message": str(exc),
            "context": {},
        },
    )


@app.exception_handler(OSError)
async def io_exception_handler(request: Request, exc: OSError):
    return JSONResponse(
        status_code=status.HTTP_400_BAD_REQUEST,
        content={
            "success": False,
            "error": "Data error",
            "message": str(exc),
            "context": {},
        },
    )


@app.get("/")
async def root():
    return {
        "message": f"Welcome to the {settings.APP_NAME} API",
        "version": settings.VERSION,
        "status": "operational",
        "solvers": ["cg", "ap", "sgd"],
    }


@app.get("/health")
async def health_check():
    return {
        "status": "healthy",
        "version": settings.VERSION,
        "environment": settings.ENVIRONMENT,
    }


app.include_router(training.router, prefix="/api/v1/runs", tags=["Training runs"])
app.include_router(experiments.router, prefix="/api/v1/experiments", tags=["Experiments"])
app.include_router(bounds.router, prefix="/api/v1/bounds", tags=["Estimator bounds"])


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(
        "main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level="info"
    )
