"""Exception types shared across the package.

Every failure mode that callers are expected to catch gets its own class so
tests (and the CLI exit-code mapping) can discriminate without string
matching.  All of them derive from GPQError.
"""


class GPQError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GPQError):
    """A run configuration is malformed or inconsistent."""


# --- grid / discretization ---------------------------------------------------

class EvenPointCount(GPQError):
    """Grid point count must be odd (Simpson weights) and at least 9."""


class NonPositiveWidth(GPQError):
    """Grid half-width L must be strictly positive."""


# --- soliton construction ----------------------------------------------------

class SpeedOutOfRange(GPQError):
    """Traveling-wave speed outside the subsonic window |c| < 2."""


class UnresolvedBranch(GPQError):
    """Dark-soliton parameters used before their sign ambiguity was fixed."""


class BranchResolutionFailure(GPQError):
    """No sign assignment produced an acceptable traveling-wave residual."""


class DomainError(GPQError):
    """Closed-form identity evaluated outside its domain of validity."""


# --- functionals -------------------------------------------------------------

class VacuumViolation(GPQError):
    """|u| dips below 1/4 in the tail region where a phase is required."""


class UnwrapAmbiguity(GPQError):
    """Tail phase jump too close to pi/2 for a reliable mod-pi unwrap."""


# --- spectral ----------------------------------------------------------------

class EigenConvergenceFailure(GPQError):
    """Iterative eigensolver failed to converge."""


# --- modulation --------------------------------------------------------------

class NoConvergence(GPQError):
    """Newton iteration for the modulation parameters did not converge."""


class SingularModulationMatrix(GPQError):
    """Modulation system matrix is numerically singular."""


# --- evolution ---------------------------------------------------------------

class PicardDivergence(GPQError):
    """Fixed-point iteration inside a time step stopped contracting."""


class NonFiniteField(GPQError):
    """NaN or Inf appeared in an evolved field."""
