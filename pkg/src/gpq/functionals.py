"""Conserved quantities, weighted norms, distances, and the energy
expansion machinery for fields with |u| -> 1 tails.

The five conserved quantities of the flow are

    mass        M  = int (1 - |u|^2)
    p_classical    = Im int u conj(u_x)
    E1             = int (|u_x|^2 - (1/3)(1 - |u|^6))
    E2             = int (|u_x|^2 + (1/3)(1 - |u|^2)^2 (2 + |u|^2))
    p_modified  P  = (1/2) int (<i u, u_x> - d/dx((1 - chi) phase))

P is only defined modulo pi; see modified_momentum for the phase
conventions.  E2 = E1 + M holds as a pointwise identity of the densities
(the frequently quoted coefficient 4/3 on M is wrong; docs/errata.md).
"""

from dataclasses import dataclass

import numpy as np

from gpq.errors import DomainError, UnwrapAmbiguity, VacuumViolation
from gpq.grid import differentiate, integrate, pair
from gpq.solitons import black_profile, dark_profile, eta_weight, weight_q

PI = np.pi


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservedSet:
    mass: float
    p_classical: float
    p_modified: float | None  # None when the vacuum precondition fails
    E1: float
    E2: float


def energy_e2(u, grid, du=None):
    """E2[u] by quadrature; du may be supplied to reuse a derivative."""
    if du is None:
        du = differentiate(u, grid, 1)
    m2 = np.abs(u) ** 2
    return float(integrate(np.abs(du) ** 2 + (1 - m2) ** 2 * (2 + m2) / 3.0, grid))


def conserved(u, grid):
    """All five conserved quantities of a sampled field.

    p_modified is None (not an error) when |u| dips below 1/4 somewhere in
    |x| > 1, since the tail phase is then meaningless; the other four are
    always returned.
    """
    u = np.asarray(u, dtype=complex)
    du = differentiate(u, grid, 1)
    m2 = np.abs(u) ** 2
    mass = float(integrate(1.0 - m2, grid))
    p_cl = float(integrate(np.imag(u * np.conj(du)), grid))
    e1 = float(integrate(np.abs(du) ** 2 - (1.0 - m2 ** 3) / 3.0, grid))
    e2 = float(integrate(np.abs(du) ** 2 + (1 - m2) ** 2 * (2 + m2) / 3.0, grid))
    try:
        p_mod = modified_momentum(u, grid, _du=du)
    except VacuumViolation:
        p_mod = None
    return ConservedSet(mass=mass, p_classical=p_cl, p_modified=p_mod,
                        E1=e1, E2=e2)


# ---------------------------------------------------------------------------
# modified momentum
# ---------------------------------------------------------------------------

def _tail_phase_walk(w):
    """Mod-pi phase representatives along one tail, walked from the
    outermost sample inward.

    Each node gets arctan(Im/Re) in (-pi/2, pi/2]; adjacent jumps are
    folded back by multiples of pi (the unwrap is a diagnostic: a folded
    jump within 1e-9 of pi/2 means the mod-pi representative is ambiguous
    there and the walk refuses).  Returns the pinned outer value.
    """
    with np.errstate(divide="ignore"):
        raw = np.arctan(w.imag / w.real)
    d = np.diff(raw)
    folded = d - PI * np.round(d / PI)
    if folded.size and np.max(np.abs(folded)) >= PI / 2 - 1e-9:
        raise UnwrapAmbiguity(
            "adjacent tail samples differ by ~pi/2 modulo pi; phase "
            "representative is ambiguous")
    return raw[0]


def modified_momentum(u, grid, _du=None):
    """The renormalized momentum, a representative of a mod-pi class.

    P = (1/2) int <i u, u_x>  -  (1/2)(phase(L) - phase(-L)),

    where the phases are continuous mod-pi arguments of u on the two tail
    components |x| >= 1, pinned at the outermost node of each tail.  The
    cutoff weight (1 - chi) in the defining integral equals one at the
    outer ends and zero at the inner ends of the tails, so its telescoped
    integral is exactly the outer-end phase difference; evaluating it that
    way avoids differentiating an interpolated phase.  Requires |u| >= 1/4
    at every node with |x| > 1.
    """
    u = np.asarray(u, dtype=complex)
    outer = np.abs(grid.x) > 1.0
    if not np.any(outer):
        raise DomainError("grid has no tail nodes |x| > 1; momentum "
                          "renormalization needs L > 1")
    if np.min(np.abs(u[outer])) < 0.25:
        raise VacuumViolation("|u| < 1/4 in the tail region |x| > 1")
    if _du is None:
        _du = differentiate(u, grid, 1)
    kin = integrate(pair(1j * u, _du), grid)
    left = u[grid.x <= -1.0]          # outermost sample first
    right = u[grid.x >= 1.0][::-1]    # reversed: outermost sample first
    phase_left = _tail_phase_walk(left)
    phase_right = _tail_phase_walk(right)
    return float(0.5 * kin - 0.5 * (phase_right - phase_left))


def mod_pi_distance(a, b):
    """min_k |a - b - k pi|: the distance between two mod-pi classes."""
    d = a - b
    return abs(d - PI * np.round(d / PI))


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def cutoff_chi(grid):
    """chi = 1 on [-1, 1], 0 outside [-2, 2], quintic smoothstep between.

    The transition is 1 - S(|x| - 1) with S(t) = 6t^5 - 15t^4 + 10t^3, so
    chi is C^2 and chi' vanishes at |x| = 1 and |x| = 2.
    """
    t = np.clip(np.abs(grid.x) - 1.0, 0.0, 1.0)
    s = t ** 3 * (6.0 * t * t - 15.0 * t + 10.0)
    return 1.0 - s


# ---------------------------------------------------------------------------
# weighted norms and distances
# ---------------------------------------------------------------------------

def weighted_norm(f, grid, params=None):
    """|| f ||_{H_c} = (int |f'|^2 + eta_c |f|^2)^{1/2}; params=None is c=0."""
    f = np.asarray(f)
    df = differentiate(f, grid, 1)
    eta = eta_weight(grid, params)
    val = integrate(np.abs(df) ** 2 + eta * np.abs(f) ** 2, grid)
    return float(np.sqrt(val))


def distance_dc(u1, u2, grid, params=None):
    """d_c(u1, u2) = (||u1 - u2||_{H_c}^2 + || |phi_c|^3 (|u1|^2 - |u2|^2) ||_{L^2}^2)^{1/2}."""
    if params is None:
        mod3 = np.abs(black_profile(grid)[0]) ** 3
    else:
        mod3 = np.abs(dark_profile(grid, params)) ** 3
    diff = np.asarray(u1) - np.asarray(u2)
    h = weighted_norm(diff, grid, params)
    dm = np.abs(np.asarray(u1)) ** 2 - np.abs(np.asarray(u2)) ** 2
    l2 = integrate((mod3 * dm) ** 2, grid)
    return float(np.sqrt(h * h + l2))


# ---------------------------------------------------------------------------
# energy expansion around a profile
# ---------------------------------------------------------------------------

def quadratic_form(z, grid, params=None):
    """Q_c[z] = (1/2) int (|z'|^2 - eta_c |z|^2)."""
    z = np.asarray(z)
    dz = differentiate(z, grid, 1)
    eta = eta_weight(grid, params)
    return float(0.5 * integrate(np.abs(dz) ** 2 - eta * np.abs(z) ** 2, grid))


def rho_field(z, grid, params=None):
    """rho = 2 Re(phi conj(z)) + |z|^2 = |phi + z|^2 - |phi|^2."""
    phi = black_profile(grid)[0].astype(complex) if params is None \
        else dark_profile(grid, params)
    z = np.asarray(z, dtype=complex)
    return 2.0 * np.real(phi * np.conj(z)) + np.abs(z) ** 2


@dataclass(frozen=True)
class PerturbationView:
    """A perturbation z of a reference profile together with its rho field."""
    z: np.ndarray
    rho: np.ndarray


def perturbation_view(z, grid, params=None):
    return PerturbationView(z=np.asarray(z, dtype=complex),
                            rho=rho_field(z, grid, params))


def nonlinear_remainder(z, grid, params=None):
    """N_c[z] = int (|phi_c|^2 rho^2 + (1/3) rho^3), the cubic-and-higher
    part of E2[phi_c + z] - E2[phi_c].

    The exact expansion (factor 2 on the quadratic form; docs/errata.md) is

        E2[phi + z] - E2[phi] = -2c int <i phi', z> + 2 Q_c[z] + N_c[z],

    with the linear term absent in the black case c = 0.
    """
    phi = black_profile(grid)[0].astype(complex) if params is None \
        else dark_profile(grid, params)
    rho = rho_field(z, grid, params)
    return float(integrate(np.abs(phi) ** 2 * rho ** 2 + rho ** 3 / 3.0, grid))


# ---------------------------------------------------------------------------
# the energy floor
# ---------------------------------------------------------------------------

def energy_floor_probe(candidates, grid):
    """True iff every candidate's E2 sits at or above the black soliton's.

    Candidates must vanish somewhere (min node modulus <= 1e-3): the floor
    E2 >= E2[phi0] is a statement about fields with a zero, and feeding it
    zero-free fields (for which it is false) would make the probe vacuous.
    """
    floor = energy_e2(black_profile(grid)[0].astype(complex), grid)
    for u in candidates:
        u = np.asarray(u, dtype=complex)
        if np.min(np.abs(u)) > 1e-3:
            raise ValueError("candidate never gets near zero modulus; "
                             "the energy floor does not apply to it")
        if not np.isfinite(energy_e2(u, grid)):
            raise ValueError("candidate has non-finite E2")
        if energy_e2(u, grid) < floor - 1e-6:
            return False
    return True


# ---------------------------------------------------------------------------
# weighted test direction, used by the modulation system
# ---------------------------------------------------------------------------

def weighted_direction(z, grid, params=None):
    """conj(q_c) z: the weighted perturbation entering the orthogonality
    conditions; kept here so norm-equivalence checks live with the norms."""
    return np.conj(weight_q(grid, params)) * np.asarray(z, dtype=complex)
