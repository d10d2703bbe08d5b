"""Black and dark soliton profiles for i u_t + u_xx = (|u|^4 - 1) u.

The black soliton is the real stationary kink

    phi0(x) = sqrt(2) tanh x / sqrt(3 - tanh^2 x),

and the dark solitons phi_c (|c| < 2) are traveling profiles solving

    phi'' - i c phi' + (1 - |phi|^4) phi = 0,

written as phi_c(x) = (i mu1 + mu2 tanh(kappa x)) / (sqrt(2) sqrt(1 + mu tanh^2(kappa x)))
with kappa = sqrt(4 - c^2)/2 and parameters (mu1, mu2, mu) determined by c up
to an overall sign pair that the formulas below leave ambiguous.  The sign
pair is fixed numerically by sign_branch_search so that the c -> 0- family
tends to +phi0 (and the c -> 0+ family to -phi0).

Closed-form values of the main functionals on phi_c live in closed_forms();
some of those expressions disagree with direct quadrature in reproducible
ways, see docs/errata.md.  All formulas here are written in algebraically
equivalent forms that avoid catastrophic cancellation near c = 0 and in the
tails (sech^2 is computed directly, never as 1 - tanh^2).
"""

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from gpq.errors import (
    BranchResolutionFailure,
    DomainError,
    SpeedOutOfRange,
    UnresolvedBranch,
)
from gpq.grid import differentiate

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)


def black_energy():
    """E2[phi0] = 2 sqrt(3) artanh(1/sqrt(3)), also the mass of phi0."""
    return 2.0 * SQRT3 * np.arctanh(1.0 / SQRT3)


# ---------------------------------------------------------------------------
# black soliton
# ---------------------------------------------------------------------------

def black_profile(grid):
    """Return (phi0, phi0') sampled on the grid, both real.

    phi0' is the closed form 3 sqrt(2) sech^2 x / (3 - tanh^2 x)^{3/2}.
    """
    t = np.tanh(grid.x)
    s2 = np.cosh(grid.x) ** -2.0
    phi = SQRT2 * t / np.sqrt(3.0 - t * t)
    dphi = 3.0 * SQRT2 * s2 / (3.0 - t * t) ** 1.5
    return phi, dphi


def black_profile_at(x):
    """phi0 at arbitrary positions (grid-free closed form)."""
    t = np.tanh(np.asarray(x, dtype=float))
    return SQRT2 * t / np.sqrt(3.0 - t * t)


def black_second_derivative(grid):
    """phi0'' = -3 sqrt(2) tanh x sech^2 x (3 + tanh^2 x)/(3 - tanh^2 x)^{5/2}.

    Obtained by differentiating the profile directly, so it is an oracle
    independent of the stationary equation phi0'' = -(1 - phi0^4) phi0.
    """
    t = np.tanh(grid.x)
    s2 = np.cosh(grid.x) ** -2.0
    return -3.0 * SQRT2 * t * s2 * (3.0 + t * t) / (3.0 - t * t) ** 2.5


# ---------------------------------------------------------------------------
# dark soliton parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DarkParams:
    """Speed, branch side, and profile parameters of a dark soliton.

    mu1 and mu2 store the raw formula values; the physical profile uses
    sign_fix[0]*mu1 and sign_fix[1]*mu2, and sign_fix is only meaningful
    once resolved is True (see sign_branch_search).
    """
    c: float
    side: str           # 'minus' (c <= 0 family) or 'plus' (c >= 0 family)
    kappa: float
    mu1: float
    mu2: float
    mu: float
    sign_fix: tuple = (1, 1)
    resolved: bool = False

    def effective(self):
        """(mu1, mu2) with the resolved signs applied."""
        if not self.resolved:
            raise UnresolvedBranch(
                "sign ambiguity not yet fixed; run sign_branch_search first")
        return self.sign_fix[0] * self.mu1, self.sign_fix[1] * self.mu2

    @property
    def murelation_defect(self):
        """|mu1^2 + mu2^2 - 2 - 2 mu|, zero in exact arithmetic."""
        return abs(self.mu1 ** 2 + self.mu2 ** 2 - 2.0 - 2.0 * self.mu)


def dark_params(c, side=None):
    """Profile parameters for speed c, |c| < 2.

    side selects the family ('minus' for the branch through c <= 0, 'plus'
    for c >= 0) and defaults to the sign of c; it must be given explicitly
    at c = 0.  The returned parameters are unresolved: the formulas only
    determine (mu1, mu2) up to a simultaneous sign flip.

    The textbook expressions for (mu1, mu2) are 0/0 at c = 0; here they are
    rationalized (exactly, no approximation) into forms with no cancelling
    subtractions, stable down to c = 0:

        a    = 3 c^2 + 4
        den  = |c| sqrt(3) sqrt(6 + (a^2 + 4a + 16)/(a^{3/2} + 8))
        mu1  = 3 c^2 (1 + 2/(sqrt(a) + 2)) / den
        mu2  = 3 c sqrt(4 - c^2) / den
    """
    c = float(c)
    if not abs(c) < 2.0:
        raise SpeedOutOfRange(f"need |c| < 2, got c={c}")
    if side is None:
        if c == 0.0:
            raise ValueError("side must be given explicitly at c = 0")
        side = "minus" if c < 0.0 else "plus"
    if side not in ("minus", "plus"):
        raise ValueError(f"side must be 'minus' or 'plus', got {side!r}")
    if (side == "minus" and c > 0.0) or (side == "plus" and c < 0.0):
        raise ValueError(f"speed c={c} is off the {side} branch")

    kappa = np.sqrt(4.0 - c * c) / 2.0
    sgn = -1.0 if side == "minus" else 1.0
    a = 3.0 * c * c + 4.0
    root = np.sqrt(6.0 + (a * a + 4.0 * a + 16.0) / (a ** 1.5 + 8.0))
    mu1 = SQRT3 * abs(c) * (1.0 + 2.0 / (np.sqrt(a) + 2.0)) / root
    if c == 0.0:
        mu2 = sgn * 2.0 / SQRT3
    else:
        mu2 = SQRT3 * np.sign(c) * np.sqrt(4.0 - c * c) / root
    mu = 0.5 * (mu1 * mu1 + mu2 * mu2) - 1.0
    return DarkParams(c=c, side=side, kappa=kappa, mu1=mu1, mu2=mu2, mu=mu)


# ---------------------------------------------------------------------------
# profiles and weights
# ---------------------------------------------------------------------------

def _tanh_sech2(grid, kappa):
    arg = kappa * grid.x
    return np.tanh(arg), np.cosh(arg) ** -2.0


def _profile_from(grid, params, m1, m2):
    t, _ = _tanh_sech2(grid, params.kappa)
    denom = SQRT2 * np.sqrt(1.0 + params.mu * t * t)
    return (1j * m1 + m2 * t) / denom


def dark_profile(grid, params):
    """Complex dark-soliton profile phi_c on the grid; needs resolved params."""
    m1, m2 = params.effective()
    return _profile_from(grid, params, m1, m2)


def dark_profile_at(x, params):
    """phi_c at arbitrary positions (grid-free closed form).

    Matches dark_profile on grid nodes; handy for boundary values of a
    traveling wave phi_c(x - ct) at the domain ends.
    """
    m1, m2 = params.effective()
    t = np.tanh(params.kappa * np.asarray(x, dtype=float))
    return (1j * m1 + m2 * t) / (SQRT2 * np.sqrt(1.0 + params.mu * t * t))


def dark_derivative(grid, params):
    """Analytic phi_c' = (kappa/sqrt2) sech^2(kx) (mu2 - i mu mu1 tanh(kx)) / (1 + mu tanh^2)^{3/2}."""
    m1, m2 = params.effective()
    t, s2 = _tanh_sech2(grid, params.kappa)
    return (params.kappa / SQRT2) * s2 * (m2 - 1j * params.mu * m1 * t) \
        / (1.0 + params.mu * t * t) ** 1.5


def _modulus_sq(params, t):
    m1, m2 = params.effective()
    return (m1 * m1 + m2 * m2 * t * t) / (2.0 * (1.0 + params.mu * t * t))


def one_minus_modsq(grid, params=None):
    """1 - |phi|^2 in a cancellation-free form, positive into the far tails.

    The parameter relation mu1^2 + mu2^2 = 2 + 2 mu collapses the dark case
    to sech^2(kx)(mu2^2 - 2 mu)/(2(1 + mu tanh^2(kx))); the black case is
    3 sech^2 x/(3 - tanh^2 x).  Direct evaluation of 1 - |phi|^2 would round
    to zero beyond |x| ~ 18.
    """
    if params is None:
        t = np.tanh(grid.x)
        s2 = np.cosh(grid.x) ** -2.0
        return 3.0 * s2 / (3.0 - t * t)
    m1, m2 = params.effective()
    t, s2 = _tanh_sech2(grid, params.kappa)
    return s2 * (m2 * m2 - 2.0 * params.mu) / (2.0 * (1.0 + params.mu * t * t))


def eta_weight(grid, params=None):
    """eta = 1 - |phi|^4 = (1 - |phi|^2)(1 + |phi|^2), cancellation-free.

    params=None selects the black soliton (eta0 <= 3 sech^2 x, integral 3).
    """
    if params is None:
        t = np.tanh(grid.x)
        s2 = np.cosh(grid.x) ** -2.0
        return 3.0 * s2 * (3.0 + t * t) / (3.0 - t * t) ** 2
    m1, m2 = params.effective()
    t, _ = _tanh_sech2(grid, params.kappa)
    return one_minus_modsq(grid, params) * (1.0 + _modulus_sq(params, t))


def weight_q(grid, params=None):
    """The localized weight multiplying test directions in the orthogonality
    conditions: phi_c'/eta_c for a dark soliton, and (1/sqrt3) q0 with
    q0 = sqrt(2 + phi0^2)/(1 + phi0^2) for the black one.

    The dark quotient is returned with the common sech^2 factor cancelled
    algebraically, so it stays finite (and accurate) in the far tails where
    both phi' and eta underflow toward zero at the same rate.
    """
    if params is None:
        phi, _ = black_profile(grid)
        q0 = np.sqrt(2.0 + phi * phi) / (1.0 + phi * phi)
        return (q0 / SQRT3).astype(complex)
    m1, m2 = params.effective()
    t, _ = _tanh_sech2(grid, params.kappa)
    num = SQRT2 * params.kappa * (m2 - 1j * params.mu * m1 * t)
    den = (m2 * m2 - 2.0 * params.mu) * (1.0 + _modulus_sq(params, t)) \
        * np.sqrt(1.0 + params.mu * t * t)
    return num / den


# ---------------------------------------------------------------------------
# residuals and branch resolution
# ---------------------------------------------------------------------------

def residuals(grid, params=None):
    """Sup-norm defects of the defining equations.

    Black (params=None), all derivatives analytic:
      sup_stationary   |phi0'' + (1 - phi0^4) phi0|
      sup_traveling    same thing (c = 0)
      sup_first_order  |(phi0')^2 - (1/3)(1 - phi0^2)^2 (2 + phi0^2)|

    Dark: phi'' by fourth-order finite differences, phi' analytic:
      sup_traveling    |phi'' - i c phi' + (1 - |phi|^4) phi|
      sup_stationary   same residual without the -i c phi' transport term
                       (how far the profile is from being stationary)
      sup_first_order  None (the quadrature identity is specific to phi0)
    """
    if params is None:
        phi, dphi = black_profile(grid)
        eta = eta_weight(grid)
        d2 = black_second_derivative(grid)
        stat = float(np.max(np.abs(d2 + eta * phi)))
        first = float(np.max(np.abs(
            dphi * dphi - (1.0 - phi * phi) ** 2 * (2.0 + phi * phi) / 3.0)))
        return {"sup_stationary": stat, "sup_traveling": stat,
                "sup_first_order": first}
    phi = dark_profile(grid, params)
    dphi = dark_derivative(grid, params)
    eta = eta_weight(grid, params)
    d2 = differentiate(phi, grid, order=2)
    trav = float(np.max(np.abs(d2 - 1j * params.c * dphi + eta * phi)))
    stat = float(np.max(np.abs(d2 + eta * phi)))
    return {"sup_stationary": stat, "sup_traveling": trav,
            "sup_first_order": None}


_CANDIDATE_SIGNS = ((-1, -1), (1, 1), (1, -1), (-1, 1))


def sign_branch_search(grid, params, threshold=1e-4):
    """Fix the sign ambiguity in (mu1, mu2) and mark the params resolved.

    Every candidate sign pair is scored by the finite-difference traveling
    residual; pairs that merely flip the overall sign of the profile both
    solve the equation, so among the passing pairs the one whose small-|c|
    limit matches the branch convention is kept: the minus family tends to
    +phi0 (effective mu2 > 0), the plus family to -phi0 (effective mu2 < 0).
    """
    best = None
    want_pos = params.side == "minus"
    for s1, s2 in _CANDIDATE_SIGNS:
        trial = dataclasses.replace(params, sign_fix=(s1, s2), resolved=True)
        r = residuals(grid, trial)["sup_traveling"]
        if best is None or r < best[0]:
            best = (r, trial)
        if r > threshold:
            continue
        eff_mu2 = s2 * params.mu2
        if (eff_mu2 > 0) == want_pos:
            return trial
    raise BranchResolutionFailure(
        f"no sign pair matched the {params.side} branch at c={params.c}; "
        f"best residual {best[0]:.3e}")


def resolved_dark(c, grid, side=None):
    """Convenience: dark_params + sign_branch_search in one call."""
    return sign_branch_search(grid, dark_params(c, side=side))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def t_continued(mu):
    """arctan(sqrt(mu))/sqrt(mu), continued through mu <= 0 as the real
    branch artanh(sqrt(-mu))/sqrt(-mu); value 1 at mu = 0."""
    if mu > 0.0:
        r = np.sqrt(mu)
        return np.arctan(r) / r
    if mu < 0.0:
        r = np.sqrt(-mu)
        return np.arctanh(r) / r
    return 1.0


def sqrtmu_atan_continued(mu):
    """sqrt(mu) arctan(sqrt(mu)) continued to mu < 0 as
    -sqrt(-mu) artanh(sqrt(-mu)); value 0 at mu = 0."""
    if mu > 0.0:
        r = np.sqrt(mu)
        return r * np.arctan(r)
    if mu < 0.0:
        r = np.sqrt(-mu)
        return -r * np.arctanh(r)
    return 0.0


@dataclass(frozen=True)
class ClosedFormCatalog:
    """Closed-form values of the main functionals on a dark soliton.

    E2                        Ginzburg-Landau-type energy of phi_c
    P                         renormalized momentum (see docs/errata.md: the
                              kinetic part of this expression is twice the
                              quadrature value; quadrature is authoritative)
    dphi_L2sq                 ||phi_c'||_{L^2}^2
    dphi_over_sqrt_eta_L2sq   ||phi_c'/sqrt(eta_c)||_{L^2}^2
    sup_dphi_over_sqrt_eta0_sq  sup |phi_c'|^2/eta0 = kappa^2 mu2^2 / 2
    sup_Ic                    sup |Im phi_c| = |mu1|/sqrt(2 + 2 mu)
    """
    E2: float
    P: float
    dphi_L2sq: float
    dphi_over_sqrt_eta_L2sq: float
    sup_dphi_over_sqrt_eta0_sq: float
    sup_Ic: float


def closed_forms(params):
    """Evaluate the catalog for resolved params (all entries are invariant
    under the simultaneous sign flip, so resolution only guards intent)."""
    m1, m2 = params.effective()
    mu, k = params.mu, params.kappa
    t = t_continued(mu)
    m1sq, m2sq = m1 * m1, m2 * m2

    s1_term = (2.0 * mu * (mu + 3.0) - m2sq * (mu - 1.0)) \
        * (m2sq * m2sq - 4.0 * m2sq * mu + 4.0 * mu * (mu + k * k))
    s2_num = 12.0 * mu * k * k * (m1sq * (mu - 3.0) * mu + m2sq * (3.0 * mu - 1.0)) \
        - (m1sq - 2.0) ** 2 * (m2sq * (3.0 * mu * mu - 2.0 * mu + 3.0)
                               - 2.0 * mu * (3.0 * mu * mu + 10.0 * mu - 9.0))
    e2 = (s1_term + s2_num * t / 3.0) / (32.0 * k * mu * mu)

    grad = k * (m2sq + 3.0 * (m1sq + m2sq) * mu + m1sq * mu * mu) \
        / (8.0 * mu * (1.0 + mu)) \
        + k * (-m2sq - 3.0 * (m1sq - m2sq) * mu + m1sq * mu * mu) * t / (8.0 * mu)

    first = sqrtmu_atan_continued(mu)
    second = (m2sq + 2.0 * mu + mu * m1sq) \
        * np.arctan(np.sqrt((2.0 * mu + m2sq) / (2.0 + m1sq))) \
        / (np.sqrt(2.0 + m1sq) * np.sqrt(2.0 * mu + m2sq))
    w = 4.0 * k * (first - second) / (m1sq - 2.0)

    # arctan of the ratio, not the two-argument angle: the phase part of P
    # is a mod-pi object, and the ratio form is invariant under the
    # simultaneous sign flip of (mu1, mu2)
    p = -np.arctan(m1 / m2) - m1 * m2 * t

    return ClosedFormCatalog(
        E2=float(e2),
        P=float(p),
        dphi_L2sq=float(grad),
        dphi_over_sqrt_eta_L2sq=float(w),
        sup_dphi_over_sqrt_eta0_sq=float(0.5 * k * k * m2sq),
        sup_Ic=float(abs(m1) / np.sqrt(2.0 + 2.0 * mu)),
    )


# ---------------------------------------------------------------------------
# the tail-integral identity
# ---------------------------------------------------------------------------

def lemma_quadrature_identity(b, y):
    """Check int_0^y ds / ((b - s^2) sqrt(s^2 + 2b)) against its closed form

        (1/(2 b sqrt(3))) log( (sqrt(2b + y^2) + sqrt(3) y)
                             / (sqrt(2b + y^2) - sqrt(3) y) ).

    Returns (quadrature, closed_form).  Valid for b > 0 with |y| < b and
    y^2 < b (both enforced; the second keeps the log argument positive, the
    pair keeps the integrand away from its pole at s^2 = b).
    """
    b, y = float(b), float(y)
    if not (b > 0.0 and abs(y) < b and y * y < b):
        raise DomainError(f"need b > 0, |y| < b and y^2 < b, got b={b}, y={y}")
    lhs, _ = quad(lambda s: 1.0 / ((b - s * s) * np.sqrt(s * s + 2.0 * b)),
                  0.0, y, epsabs=1e-12, epsrel=1e-12)
    r = np.sqrt(2.0 * b + y * y)
    rhs = np.log((r + SQRT3 * y) / (r - SQRT3 * y)) / (2.0 * b * SQRT3)
    return lhs, rhs
