"""gpq: a numerical laboratory for dark solitons of the 1-D quintic
Gross-Pitaevskii equation

    i u_t + u_xx = (|u|^4 - 1) u,   |u(x)| -> 1 as x -> +-infinity.

Subpackages:

- grid        uniform grids, Simpson quadrature, finite differences, shifts
- solitons    black/dark soliton profiles, branch resolution, closed forms
- functionals conserved quantities, weighted norms, energy expansions
- spectral    linearized pencil around the black soliton, coercivity gap
- modulation  orthogonality conditions, parameter fitting, rate system
- evolution   Crank-Nicolson time stepping with observers
- cli         the `gpq` command-line entry point
"""

from gpq import errors

__version__ = "0.1.0"

__all__ = ["errors", "__version__"]
