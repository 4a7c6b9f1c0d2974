"""Vision-based push/pull and grasp force sensing for cable-driven micro-forceps.

A camera behind the jaws watches a perforated target riding on a compression
spring. The target pose gives the spring deflection and hence the supporting
force; combined with the proximal cable tension this yields the tissue
push/pull force and, through the jaw linkage, the grasping force.
"""
from .errors import ForcepsError
from .geometry import CameraIntrinsics, Homography, Pose, TargetLayout
from .imaging import BlobParams, GrayImage, RenderConfig

__all__ = [
    "ForcepsError",
    "CameraIntrinsics",
    "Homography",
    "Pose",
    "TargetLayout",
    "BlobParams",
    "GrayImage",
    "RenderConfig",
]
