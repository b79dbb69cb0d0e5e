"""Transfer operators of Gauss-type maps and functions with vanishing Fourier families.

Modules:

* :mod:`gausspf.core_maps` - the maps, their branches and interval dynamics;
* :mod:`gausspf.transfer` - exact branch series, Ulam matrices, spectra and
  the deflated Neumann series;
* :mod:`gausspf.closed_form` - explicit invariant densities;
* :mod:`gausspf.annihilator` - construction and verification of functions
  orthogonal to both exponential families;
* :mod:`gausspf.singular_measures` - continued fractions, Minkowski ``?``
  and periodic-orbit measures of the Gauss map;
* :mod:`gausspf.kg_fourier` - hyperbola Fourier transforms and the
  Klein-Gordon wave;
* :mod:`gausspf.cli` - the ``gausspf`` command.
"""
from .core_maps import GaussMapSpec, apply_map, covering_time, iterate_interval, orbit
from .transfer import (GridDensity, apply_pf_exact, build_ulam, leading_spectrum,
                       neumann_inverse_Z2, power_iterate)

__version__ = "0.1.0"

__all__ = [
    "GaussMapSpec", "apply_map", "covering_time", "iterate_interval", "orbit",
    "GridDensity", "apply_pf_exact", "build_ulam", "leading_spectrum",
    "neumann_inverse_Z2", "power_iterate", "__version__",
]
