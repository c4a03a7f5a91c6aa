"""slipdyn: edge-dislocation systems with slip-plane-confined quasi-static dynamics.

Core objects:

* :mod:`slipdyn.kernels` -- singular elastic fields of a single dislocation;
* :mod:`slipdyn.interaction` -- the two-point potential on the bounded domain;
* :mod:`slipdyn.corrector` -- the boundary corrector and total energies;
* :mod:`slipdyn.transport` -- the slip-confined transport distance;
* :mod:`slipdyn.evolution` -- rate-independent incremental evolution;
* :mod:`slipdyn.recovery` -- discrete approximations of limit measures;
* :mod:`slipdyn.cli` -- the batch front end (``slipdyn`` console script).
"""

__version__ = "0.1.0"
