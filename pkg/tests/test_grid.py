import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpq.errors import EvenPointCount, NonPositiveWidth
from gpq.grid import differentiate, integrate, make_grid, pair, shift_phase
from gpq.solitons import black_profile, black_second_derivative, eta_weight


@pytest.fixture(scope="module")
def grid():
    return make_grid()


def test_grid_layout(grid):
    assert grid.N == 4097
    assert grid.L == 30.0
    assert grid.x[0] == -30.0 and grid.x[-1] == 30.0
    assert np.allclose(np.diff(grid.x), grid.h, rtol=0, atol=1e-14)
    mid = (grid.N - 1) // 2
    assert grid.x[mid] == 0.0


def test_grid_validation():
    with pytest.raises(EvenPointCount):
        make_grid(30.0, 4096)
    with pytest.raises(EvenPointCount):
        make_grid(30.0, 7)
    with pytest.raises(NonPositiveWidth):
        make_grid(0.0, 4097)
    with pytest.raises(NonPositiveWidth):
        make_grid(-3.0, 101)


def test_simpson_weights_sum(grid):
    assert abs(grid.simpson_weights.sum() - 2 * grid.L) < 1e-10


def test_integrate_sech2(grid):
    # int sech^2 = 2 tanh(L)
    val = integrate(np.cosh(grid.x) ** -2.0, grid)
    assert abs(val - 2.0 * np.tanh(30.0)) <= 1e-10


def test_integrate_eta0_is_3(grid):
    assert abs(integrate(eta_weight(grid), grid) - 3.0) <= 1e-8


def test_integrate_zero(grid):
    assert integrate(np.zeros(grid.N), grid) == 0.0


@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
@settings(max_examples=25, deadline=None)
def test_integrate_linearity(a, b):
    g = make_grid(10.0, 257)
    f1 = np.exp(-g.x ** 2)
    f2 = np.sin(g.x) * np.exp(-abs(g.x))
    lhs = integrate(a * f1 + b * f2, g)
    rhs = a * integrate(f1, g) + b * integrate(f2, g)
    assert abs(lhs - rhs) < 1e-11 * (1 + abs(a) + abs(b))


def test_integrate_monotone():
    g = make_grid(10.0, 257)
    lo = np.exp(-g.x ** 2)
    hi = lo + 0.1
    assert integrate(hi, g) > integrate(lo, g)


def test_differentiate_const(grid):
    c = np.full(grid.N, 2.5)
    assert np.max(np.abs(differentiate(c, grid, 1))) < 1e-12
    # second-derivative closures divide rounding error by h^2
    assert np.max(np.abs(differentiate(c, grid, 2))) < 1e-9


def test_differentiate_bad_order(grid):
    with pytest.raises(ValueError):
        differentiate(np.zeros(grid.N), grid, order=3)


@pytest.mark.parametrize("order", [1, 2])
def test_differentiate_convergence(order):
    # measured order on a smooth decaying field should be ~4
    errs = []
    for n in (513, 1025, 2049):
        g = make_grid(15.0, n)
        f = np.exp(-0.5 * g.x ** 2) * np.cos(g.x)
        num = differentiate(f, g, order)
        if order == 1:
            exact = np.exp(-0.5 * g.x ** 2) * (-g.x * np.cos(g.x) - np.sin(g.x))
        else:
            exact = np.exp(-0.5 * g.x ** 2) * (
                (g.x ** 2 - 1) * np.cos(g.x) + 2 * g.x * np.sin(g.x)
                - np.cos(g.x))
        errs.append(np.max(np.abs(num - exact)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.8)


def test_differentiate_black_ode(grid):
    # FD second derivative of phi0 against the stationary equation
    phi, _ = black_profile(grid)
    eta = eta_weight(grid)
    d2 = differentiate(phi, grid, 2)
    assert np.max(np.abs(d2 + eta * phi)) <= 1e-6


def test_differentiate_matches_analytic_first(grid):
    phi, dphi = black_profile(grid)
    assert np.max(np.abs(differentiate(phi, grid, 1) - dphi)) <= 1e-8


def test_second_derivative_oracle(grid):
    # independent closed form for phi0'' vs FD of the closed form for phi0'
    _, dphi = black_profile(grid)
    d2 = differentiate(dphi, grid, 1)
    assert np.max(np.abs(d2 - black_second_derivative(grid))) <= 5e-8


def test_shift_identity(grid):
    phi, _ = black_profile(grid)
    w = phi.astype(complex)
    out = shift_phase(w, grid, 0.0, 0.0)
    assert np.max(np.abs(out - w)) < 1e-14


def test_shift_by_integer_steps(grid):
    phi, _ = black_profile(grid)
    w = phi + 0.1j * np.exp(-grid.x ** 2)
    k = 17
    out = shift_phase(w, grid, k * grid.h, 0.0)
    # interior nodes shift exactly onto other nodes
    assert np.max(np.abs(out[: grid.N - k] - w[k:])) < 1e-12


def test_shift_composition(grid):
    phi, _ = black_profile(grid)
    w = phi + 0.05j * np.exp(-0.3 * grid.x ** 2)
    one = shift_phase(w, grid, 0.7, 0.3)
    two = shift_phase(shift_phase(w, grid, 0.4, 0.1), grid, 0.3, 0.2)
    # interpolation error only; composition of (a, theta) maps is additive
    assert np.max(np.abs(one - two)) <= 1e-8


def test_shift_phase_only_is_exact(grid):
    phi, _ = black_profile(grid)
    w = phi + 0.2j
    out = shift_phase(w, grid, 0.0, 1.234)
    assert np.max(np.abs(out - np.exp(-1.234j) * w)) < 1e-14


def test_shift_constant_continuation(grid):
    phi, _ = black_profile(grid)
    w = phi.astype(complex)
    out = shift_phase(w, grid, 5.0, 0.0)
    # beyond the right edge, the boundary sample continues
    assert np.max(np.abs(out[-50:] - w[-1])) < 1e-9


def test_pair_values():
    assert pair(1.0, 1j) == 0.0
    assert pair(1j, 1j) == 1.0
    assert pair(1.0 + 2j, 3.0 - 4j) == pytest.approx(3.0 - 8.0)


def test_pair_fields(grid):
    f = np.exp(1j * grid.x)
    g = np.exp(1j * grid.x)
    assert np.max(np.abs(pair(f, g) - 1.0)) < 1e-14
    assert np.max(np.abs(pair(1j * f, g))) < 1e-14
