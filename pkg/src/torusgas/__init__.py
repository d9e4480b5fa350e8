"""Stochastic compressible barotropic flow on the flat torus.

Pseudo-spectral solver for the density/momentum system driven by a
truncated cylindrical Wiener process, plus the diagnostics layer built on
Monte Carlo ensembles: empirical Young measures, dissipation-defect
estimators, energy ledgers, relative-energy comparisons against strong
references, and the inviscid-incompressible limit sweep.
"""

from .grid import Grid
from .constitutive import PressureLaw, Viscosity

__version__ = "0.1.0"

__all__ = ["Grid", "PressureLaw", "Viscosity", "__version__"]
