"""Periodic-box incompressible-flow solver with a dyadic Besov-norm engine.

Submodules:

* ``fields``   -- grids, transforms, spectral calculus, L^p norms
* ``dyadic``   -- dyadic blocks, Besov/Sobolev norms, inequality probes
* ``solver``   -- dealiased integrating-factor RK4 time integration
* ``monitor``  -- criterion quantities, exponential bounds, chain checks
* ``calibrate``-- ensemble calibration of the non-explicit constants
* ``config``   -- plain-text run configuration
* ``cli``      -- the ``besovns`` command
"""

from .fields import (
    Grid,
    RealField,
    SpectralField,
    VectorField,
    curl,
    divergence,
    forward_transform,
    gradient,
    inverse_transform,
    laplacian,
    leray_project,
    lp_norm,
    partial_derivative,
)
from .dyadic import (
    BesovIndex,
    BlockRange,
    DyadicProfile,
    DEFAULT_PROFILE,
    besov_norm,
    block_range,
    dyadic_block,
    low_pass,
    sobolev_seminorm,
)
from .solver import (
    FlowState,
    SolverConfig,
    Trajectory,
    nonlinear_term,
    pressure_solve,
    random_divfree_init,
    run,
    step,
    taylor_green_init,
)
from .monitor import CriterionSpec, criterion_value, run_monitor

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
