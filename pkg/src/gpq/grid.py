"""Uniform grids and the basic discrete calculus the rest of the package
builds on: composite-Simpson quadrature, fourth-order finite differences
with one-sided closures, spline-based shift/phase maps, and the real pairing
<f, g> = Re(f conj(g)).

Fields are plain numpy arrays sampled on grid.x; nothing here assumes
anything about the physics.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from gpq.errors import EvenPointCount, NonPositiveWidth


@dataclass(frozen=True)
class Grid1D:
    """Uniform symmetric grid on [-L, L] with an odd number of nodes.

    h is exactly 2L/(N-1); x[0] = -L and x[-1] = L.
    """
    L: float
    N: int
    h: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.L > 0:
            raise NonPositiveWidth(f"grid half-width must be positive, got L={self.L}")
        if self.N % 2 == 0 or self.N < 9:
            raise EvenPointCount(f"grid needs an odd point count >= 9, got N={self.N}")
        object.__setattr__(self, "h", 2.0 * self.L / (self.N - 1))
        x = np.linspace(-self.L, self.L, self.N)
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def simpson_weights(self):
        """Composite Simpson weights (h/3)(1,4,2,...,2,4,1); sums to 2L."""
        w = np.full(self.N, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        return w * (self.h / 3.0)


def make_grid(L=30.0, N=4097):
    return Grid1D(L=float(L), N=int(N))


def integrate(values, grid):
    """Composite Simpson integral of a sampled field over [-L, L].

    Complex input integrates componentwise and returns a complex number.
    """
    values = np.asarray(values)
    return np.dot(grid.simpson_weights, values)


# Fourth-order stencils.  Interior nodes use the centered five-point rules;
# the outermost two nodes on each side use one-sided closures of the same
# order so differentiate() never drops below O(h^4) anywhere.
_D1_EDGE = np.array([
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
]) / 12.0
_D2_EDGE = np.array([
    [45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
    [10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
]) / 12.0


def differentiate(values, grid, order=1):
    """First or second derivative of a sampled field, O(h^4) throughout."""
    f = np.asarray(values)
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    out = np.empty_like(f, dtype=np.result_type(f.dtype, np.float64))
    h = grid.h
    if order == 1:
        out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
        out[0] = _D1_EDGE[0] @ f[:5] / h
        out[1] = _D1_EDGE[1] @ f[:5] / h
        # right end: reversed stencil, flipped sign
        out[-1] = -(_D1_EDGE[0] @ f[-1:-6:-1]) / h
        out[-2] = -(_D1_EDGE[1] @ f[-1:-6:-1]) / h
    else:
        out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2]
                     + 16.0 * f[3:-1] - f[4:]) / (12.0 * h * h)
        out[0] = _D2_EDGE[0] @ f[:6] / (h * h)
        out[1] = _D2_EDGE[1] @ f[:6] / (h * h)
        out[-1] = _D2_EDGE[0] @ f[-1:-7:-1] / (h * h)
        out[-2] = _D2_EDGE[1] @ f[-1:-7:-1] / (h * h)
    return out


def shift_phase(values, grid, a=0.0, theta=0.0):
    """Evaluate e^{-i theta} w(x + a) on the grid.

    Interpolation is cubic-spline on the real and imaginary parts; query
    points beyond [-L, L] take the boundary sample (fields of interest are
    constant-modulus plateaus there, so constant continuation is the right
    call and keeps the map well defined for any shift).
    """
    w = np.asarray(values)
    query = np.clip(grid.x + a, -grid.L, grid.L)
    if np.iscomplexobj(w):
        re = CubicSpline(grid.x, w.real)(query)
        im = CubicSpline(grid.x, w.imag)(query)
        shifted = re + 1j * im
    else:
        shifted = CubicSpline(grid.x, w)(query)
    if theta == 0.0:
        return shifted
    return np.exp(-1j * theta) * shifted


def pair(f, g):
    """Real pairing <f, g> = Re(f conj(g)), elementwise."""
    return np.real(np.multiply(f, np.conj(g)))
