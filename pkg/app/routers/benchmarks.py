from fastapi import APIRouter, Depends, HTTPException, Query
from sqlalchemy.orm import Session

from app.core.config import settings
from app.core.database import get_db
from app.core.errors import RiskMonitorError
from app.core.logging_config import get_logger
from app.schemas.results import (
    BenchmarkRequest,
    BenchmarkRunListResponse,
    BenchmarkRunResponse,
    ErrorResponse,
)
from app.services.benchmark_service import BenchmarkService, run_benchmark

logger = get_logger(__name__)

router = APIRouter(prefix="/api", tags=["benchmarks"])
benchmark_service = BenchmarkService()


@router.post(
    "/benchmarks",
    response_model=BenchmarkRunResponse,
    status_code=201,
    responses={
        400: {"model": ErrorResponse, "description": "Bad request"},
        500: {"model": ErrorResponse, "description": "Internal server error"}
    }
)
def create_benchmark(
    request: BenchmarkRequest,
    db: Session = Depends(get_db)
):
    """
    Run the detector over a scenario corpus and store the result.

    - **corpus_dir**: directory of scenario files, the configured corpus when omitted
    - **config**: monitor configuration
    - **seed**: master seed of the run
    - **detector**: "rsr" or "collision-prob", overrides config.kind
    """
    corpus_dir = request.corpus_dir or settings.corpus_dir
    logger.info(f"Received benchmark request: corpus={corpus_dir}, seed={request.seed}")
    try:
        result = run_benchmark(corpus_dir, request.config, request.seed, settings.bench_workers,
                               request.detector)
        run = benchmark_service.save_run(db, result, corpus_dir)
    except RiskMonitorError as e:
        logger.error(f"Benchmark rejected: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error running benchmark: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error running benchmark: {str(e)}")

    logger.info(f"Benchmark stored: run_id={run.run_id}, f1={result.metrics.f1:.4f}")
    return BenchmarkRunResponse.model_validate(run)


@router.get(
    "/benchmarks/{run_id}",
    response_model=BenchmarkRunResponse,
    responses={
        404: {"model": ErrorResponse, "description": "Benchmark run not found"}
    }
)
def get_benchmark(
    run_id: str,
    db: Session = Depends(get_db)
):
    """Retrieve a stored benchmark run by its ID"""
    logger.info(f"Retrieving benchmark run: {run_id}")
    run = benchmark_service.get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Benchmark run not found")
    return BenchmarkRunResponse.model_validate(run)


@router.get(
    "/benchmarks",
    response_model=BenchmarkRunListResponse
)
def list_benchmarks(
    page: int = Query(1, ge=1, description="Page number"),
    page_size: int = Query(10, ge=1, le=100, description="Items per page"),
    db: Session = Depends(get_db)
):
    """List stored benchmark runs, newest first"""
    logger.info(f"Listing benchmark runs: page={page}, page_size={page_size}")
    runs, total = benchmark_service.list_runs(db, page, page_size)
    return BenchmarkRunListResponse(
        total=total,
        page=page,
        page_size=page_size,
        runs=[BenchmarkRunResponse.model_validate(run) for run in runs]
    )
