"""Quotient-aware EM for nonidentifiable latent-variable models.

The library implements EM engines for three model families whose parameters
are identified only up to a symmetry group (label permutations, sign flips,
loading-matrix rotations), together with the orbit-quotient machinery needed
to state convergence meaningfully: canonical sections, orbit distances,
integral probability metrics on induced laws, and closed-form calculators for
the finite-sample envelopes that the harness verifies empirically.
"""

__version__ = "0.1.0"

from . import bounds, datasets, em, errors, groups, ipm, models, numerics, rng

__all__ = [
    "__version__",
    "bounds",
    "datasets",
    "em",
    "errors",
    "groups",
    "ipm",
    "models",
    "numerics",
    "rng",
]
