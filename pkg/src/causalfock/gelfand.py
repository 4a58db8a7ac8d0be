"""Weighted shell coordinates and the conjugated oscillator.

The coordinate t(r) = r - 1/r maps (0, inf) onto the line; the weight

    nu_n(t) = (t + sqrt(t^2+4))^{n-1} / (2^{n-2} (t^2 + 4 - t sqrt(t^2+4)))

is the Jacobian factor relating the line measure to the radial measure:
nu_n(t(r)) (1 + r^{-2}) = r^{n-1}.  The unitaries

    U1 f(t, w) = f(t, w) / sqrt(nu_n(t)),      L2(dt x dmu) -> L2(nu dt x dmu)
    U2 f(r, w) = f(t(r), w),                   L2(nu dt x dmu) -> L2(d^n p)

compose to an isometry U onto L2(R^n) in spherical coordinates.
Conjugating the line oscillator H = -d^2/dt^2 + t^2 + 1 through U and
restricting to the radial (constant-angle) sector yields the
second-order operator applied by ``a3_apply``; its closed-form
coefficients are

    c2(r) = -r^4 / (r^2+1)^2,
    c1(r) = -2 r^3 (r^2+3) / (r^2+1)^3,
    c0(r) = (r^12 + 3 r^10 + 3 r^8 + r^6 - 3 r^4 + 3 r^2 + 1)
            / (r^2 (r^2+1)^4),

derived symbolically from (1/w) [-(J^-1 d/dr)^2 + t^2 + 1] w with
w = sqrt(nu_3(t(r))) and J = dt/dr = 1 + r^{-2}.  The potential behaves
as r^2 + r^{-2} - 1 at both ends and the spectrum is 2k + 2, exactly the
oscillator's, since the map is unitary.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal


class GelfandError(ValueError):
    pass


def nu_weight(n, t):
    """Weight nu_n(t); nu_n(0) = 1/2 for every n."""
    t = np.asarray(t, dtype=float)
    root = np.sqrt(t * t + 4.0)
    num = (t + root) ** (n - 1)
    den = 2.0 ** (n - 2) * (t * t + 4.0 - t * root)
    out = num / den
    return out if out.shape else float(out)


def t_of_r(r):
    r = np.asarray(r, dtype=float)
    out = r - 1.0 / r
    return out if out.shape else float(out)


def r_of_t(t):
    t = np.asarray(t, dtype=float)
    out = 0.5 * (t + np.sqrt(t * t + 4.0))
    return out if out.shape else float(out)


class RadialGrid:
    """Uniform r-grid on [r_min, r_max] with its t-image and the three
    measure weights (dt, nu_n dt, r^{n-1} dr)."""

    def __init__(self, n_points, r_min, r_max, n=3):
        if r_min <= 0:
            raise GelfandError("radial grid must stay away from r = 0")
        self.n = n
        self.r = np.linspace(r_min, r_max, n_points)
        self.h = self.r[1] - self.r[0]
        self.t = t_of_r(self.r)
        self.jacobian = 1.0 + 1.0 / self.r ** 2     # dt/dr
        self.w_radial = self.r ** (self.n - 1) * self.h
        self.w_t_image = self.jacobian * self.h      # dt weights on t(r)
        self.nu = nu_weight(self.n, self.t)


def u_map(f, grid: RadialGrid):
    """U = U2 U1 on a callable f(t): samples f(t(r)) / sqrt(nu_n(t(r)))
    on the radial grid (angular dependence constant)."""
    return f(grid.t) / np.sqrt(grid.nu)


def u_inverse(g, grid: RadialGrid):
    """Inverse map on sampled radial data: sqrt(nu_n(t)) g(r(t)) at the
    grid's t-image points."""
    return np.sqrt(grid.nu) * g


def norm_t_side(f, t_lo, t_hi, n_quad=4000):
    """Line-measure norm of a callable on a uniform t-grid (trapezoid)."""
    t = np.linspace(t_lo, t_hi, n_quad)
    vals = np.abs(f(t)) ** 2
    return np.trapezoid(vals, t)


def norm_r_side(samples, grid: RadialGrid):
    """Radial-measure norm of sampled data, trapezoid against
    r^{n-1} dr."""
    vals = np.abs(samples) ** 2 * grid.r ** (grid.n - 1)
    return np.trapezoid(vals, grid.r)


def h_oscillator_apply(f, t, h):
    """H = -d^2/dt^2 + t^2 + 1 with the centered second-order stencil;
    endpoints returned as NaN."""
    out = np.full_like(f, np.nan, dtype=complex)
    out[1:-1] = -(f[2:] - 2 * f[1:-1] + f[:-2]) / h ** 2 \
        + (t[1:-1] ** 2 + 1) * f[1:-1]
    return out


def h_n_apply(f, axes, spacing):
    """(-Laplacian + r^2 + 1) f on an n-dimensional tensor grid.

    ``axes`` is a sequence of n coordinate arrays, ``f`` the sampled
    values with one axis per coordinate; centered second-order stencils
    per axis, boundary slabs returned as NaN.
    """
    f = np.asarray(f, dtype=complex)
    n = len(axes)
    if f.ndim != n:
        raise GelfandError("sample array rank must match the axis count")
    out = np.zeros_like(f)
    for ax in range(n):
        second = np.full_like(f, np.nan)
        src = np.moveaxis(f, ax, 0)
        dst = np.moveaxis(second, ax, 0)
        dst[1:-1] = (src[2:] - 2 * src[1:-1] + src[:-2]) / spacing ** 2
        out = out - second
    r2 = np.zeros(f.shape)
    for ax, coords in enumerate(axes):
        shape = [1] * n
        shape[ax] = len(coords)
        r2 = r2 + np.asarray(coords).reshape(shape) ** 2
    return out + (r2 + 1) * f


def h1_eigenvalues(n_points=400, r_max=5.0, k_max=5):
    """Low oscillator eigenvalues (2k + 2) from the half-line parity
    reduction: Dirichlet (odd) and staggered-Neumann (even) sectors, each
    on an n_points grid."""
    h = r_max / n_points
    x = (np.arange(n_points) + 1) * h
    d_odd = 2 / h ** 2 + x ** 2 + 1
    off = -np.ones(n_points - 1) / h ** 2
    odd = eigh_tridiagonal(d_odd, off, select="i",
                           select_range=(0, k_max))[0]
    xs = (np.arange(n_points) + 0.5) * h
    d_even = 2 / h ** 2 + xs ** 2 + 1
    d_even[0] = 1 / h ** 2 + xs[0] ** 2 + 1
    even = eigh_tridiagonal(d_even, off, select="i",
                            select_range=(0, k_max))[0]
    return np.sort(np.concatenate([even, odd]))[:k_max + 1]


def a3_coefficients(r):
    """Closed-form coefficients (c2, c1, c0) of the radial conjugated
    oscillator (see module docstring)."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    c2 = -r2 ** 2 / (r2 + 1) ** 2
    c1 = -2 * r ** 3 * (r2 + 3) / (r2 + 1) ** 3
    c0 = (r2 ** 6 + 3 * r2 ** 5 + 3 * r2 ** 4 + r2 ** 3
          - 3 * r2 ** 2 + 3 * r2 + 1) / (r2 * (r2 + 1) ** 4)
    return c2, c1, c0


def a3_apply(g, grid: RadialGrid):
    """Apply the radial operator with centered differences on the grid;
    endpoints NaN.  Input must be angle-independent (radial) samples."""
    if np.any(grid.r <= 0):
        raise GelfandError("operator coefficients are singular at r = 0")
    c2, c1, c0 = a3_coefficients(grid.r)
    out = np.full_like(np.asarray(g, dtype=complex), np.nan)
    h = grid.h
    gpp = (g[2:] - 2 * g[1:-1] + g[:-2]) / h ** 2
    gp = (g[2:] - g[:-2]) / (2 * h)
    out[1:-1] = c2[1:-1] * gpp + c1[1:-1] * gp + c0[1:-1] * g[1:-1]
    return out


def conjugation_residual(gfun, n_points, r_min=0.4, r_max=4.0,
                         interior_margin=5):
    """Max deviation between a3_apply and the two-step route
    U (H on the t-line) U^{-1}, for a radial profile gfun(r).

    The t-line application uses its own (finer) uniform grid plus cubic
    interpolation back to t(r); the discrepancy is O(h^2) in the radial
    spacing when the closed-form coefficients are the true conjugation.
    """
    from scipy.interpolate import CubicSpline
    grid = RadialGrid(n_points, r_min, r_max)
    g = gfun(grid.r)
    route_a = a3_apply(g, grid)

    t_lo, t_hi = grid.t[0], grid.t[-1]
    nt = 4 * n_points
    tg = np.linspace(t_lo, t_hi, nt)
    rt = r_of_t(tg)
    f = np.sqrt(nu_weight(grid.n, tg)) * gfun(rt)
    hf = h_oscillator_apply(f.astype(complex), tg, tg[1] - tg[0])
    spline = CubicSpline(tg[1:-1], hf[1:-1].real)
    route_b = spline(grid.t) / np.sqrt(grid.nu)

    s = slice(interior_margin, -interior_margin)
    return float(np.nanmax(np.abs(route_a[s].real - route_b[s])))
