"""Bernoulli hyper-edge percolation laboratory on the hypercubic lattice.

Hyper-edges are finite vertex sets of size >= 2 opened independently with
probability 1 - (1-u)^mu({h}) for a translation-invariant intensity measure
mu; one Poisson first-arrival sample couples every parameter u monotonically.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend
from .lattice import BoxRegion, LatticeSymmetry, ModifiedBox, SlabRegion
from .measure import (
    HyperEdgeInstance,
    HyperEdgeShape,
    IntensityMeasure,
    SquareLoopFamily,
    annulus_decay,
    annulus_mass,
    canonicalize,
    load_measure_spec,
    local_mass,
    nearest_neighbor_measure,
    square_loop_measure,
    symmetry_closure,
    validate,
)
from .sampler import (
    CLIPPED,
    CONTAINED,
    Configuration,
    CoupledSample,
    Window,
    apply_slab,
    configuration_at,
    draw_arrivals,
    enumerate_candidates,
)

__all__ = [
    "BoxRegion",
    "CLIPPED",
    "CONTAINED",
    "Configuration",
    "CoupledSample",
    "HyperEdgeInstance",
    "HyperEdgeShape",
    "IntensityMeasure",
    "LatticeSymmetry",
    "ModifiedBox",
    "SlabRegion",
    "SquareLoopFamily",
    "Window",
    "annulus_decay",
    "annulus_mass",
    "apply_slab",
    "canonicalize",
    "configuration_at",
    "draw_arrivals",
    "enumerate_candidates",
    "kernel_backend",
    "load_measure_spec",
    "local_mass",
    "nearest_neighbor_measure",
    "square_loop_measure",
    "symmetry_closure",
    "validate",
]
