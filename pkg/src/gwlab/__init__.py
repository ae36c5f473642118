"""gwlab: a desk-scale numerical laboratory for Gaussian-width decompositions
of convex bodies, their fixed points, intrinsic-volume profiles, variational
bounds, l1-projection analysis, and packing-entropy functionals."""

from .bodies import (Ball, ConvexBody, CrossPolytope, Cube, Ellipsoid,
                     VertexPolytope, body_from_descriptor)
from .sampling import GaussianSampleSet, MCEstimate, sample_set

__all__ = [
    "Ball", "ConvexBody", "CrossPolytope", "Cube", "Ellipsoid",
    "VertexPolytope", "body_from_descriptor",
    "GaussianSampleSet", "MCEstimate", "sample_set",
]
