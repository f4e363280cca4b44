"""Numerical laboratory for parabolic (caloric) measure on space-time domains.

Subpackages:

* ``geometry`` — points, the parabolic metric, composable domains, boundary
  classification, quasi-lateral boundary sampling.
* ``kernels`` — scaled heat kernels, Gaussian envelopes, discrete potentials,
  parabolic mollification.
* ``capacity`` — thermal capacity by linear programming, parabolic Hausdorff
  content, time-backwards density conditions, partial Wiener sums.
* ``walker`` — backward-in-time Monte Carlo exit sampling and the monotone
  lattice walker.
* ``analysis`` — boundary non-degeneracy, decay-exponent fits.
* ``scenarios`` — packaged experiments with reproducible result directories.
* ``cli`` — deterministic command-line front end.
"""

__version__ = "0.1.0"

from . import analysis, capacity, geometry, kernels, scenarios, serialization, walker

__all__ = [
    "analysis",
    "capacity",
    "geometry",
    "kernels",
    "scenarios",
    "serialization",
    "walker",
    "__version__",
]
