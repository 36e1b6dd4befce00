import logging

from fastapi import APIRouter, Depends

from billiard_security.api.dependencies import get_settings, http_error
from billiard_security.core.config import Settings
from billiard_security.core.exceptions import BilliardError, WitnessError
from billiard_security.schemas.witness import VerificationReport, WitnessBundleDocument, WitnessRequest
from billiard_security.services.verification import verify_bundle
from billiard_security.services.witness import construct_witness

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/construct", response_model=WitnessBundleDocument)
def construct(request: WitnessRequest, config: Settings = Depends(get_settings)):
    """Build n paths from x to y in general position on a nearby table"""
    budget = request.eps_budget or config.WITNESS_EPS_BUDGET
    try:
        bundle = construct_witness(request.table.build(), request.x, request.y, request.n,
                                   budget, request.seed, request.tol)
    except WitnessError as e:
        logger.error(f"Witness construction failed at {e.stage}: {e}")
        partial = None
        if e.partial is not None:
            partial = WitnessBundleDocument.from_bundle(e.partial, e.stage, str(e)).model_dump(mode="json")
        raise http_error(e, stage=e.stage, partial=partial)
    except BilliardError as e:
        raise http_error(e)
    return WitnessBundleDocument.from_bundle(bundle)


@router.post("/verify", response_model=VerificationReport)
def verify(document: WitnessBundleDocument):
    """Re-check a serialized bundle without any pipeline state"""
    try:
        return verify_bundle(document)
    except BilliardError as e:
        raise http_error(e)
