from lesionforge.inpaint.core import (
    VARIANTS,
    BackendDescriptor,
    InpaintRequest,
    inpaint,
    remove_lesion,
)
from lesionforge.inpaint.planning import PlannedPair, plan_generation, plan_pairings
from lesionforge.inpaint.remote import RemoteBackendClient
from lesionforge.inpaint.toy import toy_compose

__all__ = [
    "VARIANTS",
    "BackendDescriptor",
    "InpaintRequest",
    "PlannedPair",
    "RemoteBackendClient",
    "inpaint",
    "plan_generation",
    "plan_pairings",
    "remove_lesion",
    "toy_compose",
]
