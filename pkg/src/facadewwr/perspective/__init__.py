"""Perspective correction of oblique facade photographs."""

from .corners import corners_from_mask
from .edges import EdgeMap, detect_edges, quad_from_edges
from .homography import Homography, Quad, estimate_homography, project, target_rectangle
from .warp import warp_image, warp_labels

__all__ = [
    "EdgeMap",
    "Homography",
    "Quad",
    "corners_from_mask",
    "detect_edges",
    "estimate_homography",
    "project",
    "quad_from_edges",
    "target_rectangle",
    "warp_image",
    "warp_labels",
]
