from fastapi import APIRouter, HTTPException, Query

from app.core.errors import RiskMonitorError
from app.core.logging_config import get_logger
from app.schemas.results import (
    BoundsRequest,
    DetectRequest,
    DetectResponse,
    EpsilonResponse,
    ErrorResponse,
    RiskBounds,
)
from app.services.stats import critical, dkw_epsilon, rsr_bounds

logger = get_logger(__name__)

router = APIRouter(prefix="/api", tags=["risk"])


@router.get(
    "/epsilon",
    response_model=EpsilonResponse,
    responses={
        400: {"model": ErrorResponse, "description": "Bad request"}
    }
)
def get_epsilon(
    alpha: float = Query(..., description="One minus the confidence level, in (0, 1)"),
    n: int = Query(..., description="Number of samples")
):
    """DKW half-width sqrt(ln(2/alpha) / (2n))"""
    try:
        epsilon = dkw_epsilon(alpha, n)
    except RiskMonitorError as e:
        logger.warning(f"Rejected epsilon request: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    return EpsilonResponse(alpha=alpha, n=n, epsilon=epsilon)


@router.post(
    "/risk/bounds",
    response_model=RiskBounds,
    responses={
        400: {"model": ErrorResponse, "description": "Bad request"},
        500: {"model": ErrorResponse, "description": "Internal server error"}
    }
)
def compute_bounds(request: BoundsRequest):
    """
    PAC bounds on the p-quantile relative scenario risk.

    - **samples_a**: costs sampled from the perceived scene
    - **samples_b**: costs sampled from the plausible scene, same count
    - **p**: risk aversion
    - **alpha**: one minus the confidence level
    """
    logger.info(f"Bounds request: n={len(request.samples_a)}, p={request.p}, alpha={request.alpha}")
    try:
        return rsr_bounds(request.samples_a, request.samples_b, request.p, request.alpha,
                          request.clamp_to_support)
    except RiskMonitorError as e:
        logger.warning(f"Rejected bounds request: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error computing bounds: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error computing bounds: {str(e)}")


@router.post(
    "/risk/detect",
    response_model=DetectResponse,
    responses={
        400: {"model": ErrorResponse, "description": "Bad request"},
        500: {"model": ErrorResponse, "description": "Internal server error"}
    }
)
def detect_critical(request: DetectRequest):
    """Detection test: critical when the lower bound exceeds gamma"""
    params = request.params
    if len(request.samples_a) != params.n or len(request.samples_b) != params.n:
        raise HTTPException(
            status_code=400,
            detail=f"expected {params.n} samples per scene, got {len(request.samples_a)} and {len(request.samples_b)}"
        )
    try:
        bounds = rsr_bounds(request.samples_a, request.samples_b, params.p, params.alpha,
                            params.clamp_to_support)
        is_critical = critical(bounds, params)
    except RiskMonitorError as e:
        logger.warning(f"Rejected detect request: {str(e)}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Unexpected error in detection: {str(e)}", exc_info=True)
        raise HTTPException(status_code=500, detail=f"Error in detection: {str(e)}")

    if is_critical:
        logger.info(f"Critical scene: lower={bounds.lower:.4f} > gamma={params.gamma}")
    return DetectResponse(critical=is_critical, bounds=bounds)
