import numpy as np
import pytest

from gpq.errors import EigenConvergenceFailure
from gpq.functionals import quadratic_form, weighted_norm
from gpq.grid import make_grid
from gpq.solitons import black_profile, eta_weight
from gpq.spectral import (
    LAMBDA2_REFERENCE,
    SIGMA2_REFERENCE,
    assemble_pencil,
    coercivity_probe,
    extrapolated_spectrum,
    make_admissible,
    sigma_to_lambda,
    sign_changes,
    solve_lowest,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid()


@pytest.fixture(scope="module")
def pencil(grid):
    return assemble_pencil(grid)


@pytest.fixture(scope="module")
def spec3(pencil):
    return solve_lowest(pencil, 3)


def h0_inner(pencil, f, g):
    return float(f @ (pencil.A @ g) + f @ (pencil.B * g))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_pencil_symmetry_and_kernel(grid, pencil):
    assert (pencil.A - pencil.A.T).nnz == 0
    ones = np.ones(grid.N)
    assert np.max(np.abs(pencil.A @ ones)) == 0.0  # constants in the kernel
    rng = np.random.default_rng(0)
    for _ in range(5):
        f = rng.standard_normal(grid.N)
        assert f @ (pencil.A @ f) >= 0.0


def test_pencil_weights(grid, pencil):
    assert np.all(pencil.B > 0)
    assert pencil.B.sum() == pytest.approx(3.0, abs=1e-8)


def test_pencil_action_on_kink(grid, pencil):
    # interior rows of A/h apply -d^2/dx^2 to 2nd order, and the kink solves
    # -phi0'' = eta0 phi0
    phi = black_profile(grid)[0]
    lhs = (pencil.A @ phi) / grid.h
    rhs = eta_weight(grid) * phi
    assert np.max(np.abs(lhs[1:-1] - rhs[1:-1])) < 1e-4


# ---------------------------------------------------------------------------
# eigensolve
# ---------------------------------------------------------------------------

def test_lowest_mode_constant(grid, spec3):
    assert spec3.sigma[0] <= 1e-8
    assert spec3.lam[0] == pytest.approx(-0.5, abs=1e-8)
    e0 = spec3.fields[:, 0]
    assert np.max(np.abs(e0 - e0.mean())) <= 1e-6
    assert e0.mean() == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-6)


def test_second_mode_is_kink(grid, pencil, spec3):
    assert abs(spec3.sigma[1] - 1.0) <= 1e-4
    phi = black_profile(grid)[0]
    e1 = spec3.fields[:, 1]
    align = abs(h0_inner(pencil, e1, phi)) / np.sqrt(
        h0_inner(pencil, e1, e1) * h0_inner(pencil, phi, phi))
    assert align >= 1.0 - 1e-6


def test_gap_mode(grid, spec3):
    assert spec3.sigma[2] > 1.0
    assert 0.0 < spec3.lam[2] < 0.5


def test_gap_regression_pin(grid):
    ex = extrapolated_spectrum(grid, 3)
    assert ex.sigma[2] == pytest.approx(SIGMA2_REFERENCE, abs=5e-6)
    assert ex.lam[2] == pytest.approx(LAMBDA2_REFERENCE, abs=1e-6)


def test_fields_h0_normalized(pencil, spec3):
    for j in range(3):
        f = spec3.fields[:, j]
        assert h0_inner(pencil, f, f) == pytest.approx(1.0, rel=1e-12)


def test_sturm_oscillation(pencil):
    r = solve_lowest(pencil, 10)
    for j in range(10):
        assert sign_changes(r.fields[:, j]) == j


def test_lambda_increasing_below_half(pencil):
    r = solve_lowest(pencil, 10)
    assert np.all(np.diff(r.sigma) > 0)
    assert np.all(np.diff(r.lam) > 0)
    assert np.all(r.lam < 0.5)


def test_grid_convergence_of_sigma1():
    errs = []
    for N in (1025, 2049):
        r = solve_lowest(assemble_pencil(make_grid(30.0, N)), 2)
        errs.append(abs(r.sigma[1] - 1.0))
    assert errs[0] / errs[1] >= 3.0


def test_k_validation(pencil):
    with pytest.raises(ValueError):
        solve_lowest(pencil, 11)
    with pytest.raises(ValueError):
        solve_lowest(pencil, 0)


def test_convergence_failure(pencil):
    # starving the Krylov space forces the iteration cap
    with pytest.raises(EigenConvergenceFailure):
        solve_lowest(pencil, 6, maxiter=1, ncv=8)


# ---------------------------------------------------------------------------
# sigma <-> lambda
# ---------------------------------------------------------------------------

def test_sigma_to_lambda_values():
    assert sigma_to_lambda(0.0) == pytest.approx(-0.5, abs=1e-15)
    assert sigma_to_lambda(1.0) == pytest.approx(0.0, abs=1e-15)
    assert sigma_to_lambda(1e12) == pytest.approx(0.5, abs=1e-11)
    s = np.linspace(0.0, 50.0, 200)
    lam = sigma_to_lambda(s)
    assert np.all(np.diff(lam) > 0)
    assert np.all(lam < 0.5)


# ---------------------------------------------------------------------------
# admissibility and coercivity
# ---------------------------------------------------------------------------

def test_make_admissible_annihilates_low_modes(grid):
    phi = black_profile(grid)[0]
    assert np.max(np.abs(make_admissible(np.ones(grid.N), grid))) <= 1e-12
    assert np.max(np.abs(make_admissible(phi.copy(), grid))) <= 1e-12


def test_make_admissible_means(grid):
    w = grid.simpson_weights * eta_weight(grid)
    phi = black_profile(grid)[0]
    f = make_admissible(1.0 / np.cosh(grid.x), grid)
    assert abs(w @ f) <= 1e-10
    assert abs(w @ (phi * f)) <= 1e-10


def test_coercivity_probe_eigenfield_equality(pencil, spec3):
    e2 = spec3.fields[:, 2]
    assert coercivity_probe(e2, pencil, spec3)
    # Rayleigh identity: the probe margin is saturated to within the slack
    rq = pencil.q0(e2) / pencil.h0_normsq(e2)
    assert rq == pytest.approx(spec3.lam[2], abs=1e-6)


def test_coercivity_probe_random_sweep(grid, pencil, spec3):
    rng = np.random.default_rng(7)
    for _ in range(100):
        centers = rng.uniform(-5, 5, 3)
        widths = rng.uniform(0.5, 2.0, 3)
        amps = rng.standard_normal(3)
        f = sum(a * np.exp(-((grid.x - c) / w) ** 2)
                for a, c, w in zip(amps, centers, widths))
        f = make_admissible(f, grid)
        assert coercivity_probe(f, pencil, spec3)


def test_coercivity_probe_zero_field(grid, pencil, spec3):
    f = make_admissible(black_profile(grid)[0].copy(), grid)
    assert coercivity_probe(f, pencil, spec3)  # projected to 0, vacuously true


def test_rayleigh_quotient_matches_functionals():
    # the high-order forms of the functionals module reproduce the pencil's
    # Rayleigh value on the gap eigenfield once h is small enough
    g = make_grid(30.0, 16385)
    r = solve_lowest(assemble_pencil(g), 3)
    e2 = r.fields[:, 2]
    rq = quadratic_form(e2, g) / weighted_norm(e2, g) ** 2
    assert rq == pytest.approx(r.lam[2], rel=1e-6)
