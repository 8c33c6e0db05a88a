"""Degree-n vortex profile: shooting bracket, global table, asymptotics.

The radial profile U solves

    U'' + U'/r - n^2 U / r^2 + (1 - U^2) U = 0,   U(0) = 0,  U(inf) = 1,

launched from the origin series U = a r^n (1 - r^2/(4n+4) + ...).  The slope
a is pinned by overshoot/undershoot bisection: too-large slopes diverge above
1, too-small slopes fall back and oscillate.  Because the deviation from the
connecting orbit grows like exp(sqrt(2) r), a single shot cannot carry the
profile to large radii; the production table therefore comes from a
collocation solve on [r_start, r_max] with the series condition on the left
and the algebraic 1 - n^2/(2 r^2) - ... expansion on the right, seeded by the
shooting trajectory.  Beyond r_max evaluation switches to that expansion, and
below r_start to the origin series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import BPoly

from .numerics import Tolerance, TOL_PROFILE


class BracketFailure(RuntimeError):
    """Shooting bracket could not be closed to the requested width."""


@dataclass(frozen=True)
class ShootingOutcome:
    slope_trial: float
    classification: str  # overshoot | undershoot | converged

    def __post_init__(self):
        if self.classification not in ("overshoot", "undershoot", "converged"):
            raise ValueError(self.classification)


def tail_coefficients(n):
    """Coefficients of U = 1 + b1/r^2 + b2/r^4 + b3/r^6 at infinity.

    Derived by matching powers in the profile ODE; for n=1 this reproduces
    (b1, b2, b3) = (-1/2, -9/8, -161/16).
    """
    b1 = -n * n / 2.0
    b2 = (4.0 * b1 - n * n * b1 - 3.0 * b1 * b1) / 2.0
    b3 = (16.0 * b2 - n * n * b2 - 6.0 * b1 * b2 - b1 ** 3) / 2.0
    return b1, b2, b3


def one_minus_u2_coefficients(n):
    """1 - U^2 = d2/r^2 + d4/r^4 + d6/r^6 at infinity (d2 = n^2)."""
    b1, b2, b3 = tail_coefficients(n)
    d2 = -2.0 * b1
    d4 = -(b1 * b1 + 2.0 * b2)
    d6 = -2.0 * (b3 + b1 * b2)
    return d2, d4, d6


def _series_eval(n, slope, r):
    """Origin series U = a r^n (1 - r^2/(4n+4) [+ n=1 correction]) and U'."""
    r = np.asarray(r, dtype=float)
    c1 = -1.0 / (4.0 * n + 4.0)
    if n == 1:
        # next coefficient is slope-dependent; known in closed form for n=1
        c2 = (8.0 * slope ** 2 + 1.0) / 192.0
    else:
        c2 = 0.0
    poly = 1.0 + c1 * r ** 2 + c2 * r ** 4
    dpoly = 2.0 * c1 * r + 4.0 * c2 * r ** 3
    u = slope * r ** n * poly
    du = slope * (n * r ** (n - 1) * poly + r ** n * dpoly)
    return u, du


def _rhs(n):
    def rhs(r, y):
        u, du = y[0], y[1]
        return np.vstack([du, -du / r + n * n * u / r ** 2 - (1.0 - u ** 2) * u]) \
            if y.ndim == 2 else [du, -du / r + n * n * u / r ** 2 - (1.0 - u ** 2) * u]
    return rhs


def classify_shot(n, slope, r_start=1e-3, r_stop=60.0, tol=TOL_PROFILE):
    """Integrate one trial slope and classify the outcome.

    The classification thresholds encode the two definite numeric events:
    divergence above U = 1.5 (overshoot) and a decreasing U while still below
    1 (undershoot, the solution starts oscillating).
    """
    u0, du0 = _series_eval(n, slope, r_start)

    def over(r, y):
        return y[0] - 1.5
    over.terminal, over.direction = True, 1.0

    def under(r, y):
        # only meaningful while U < 1; offset keeps the event inactive above
        return y[1] if y[0] < 1.0 else 1.0
    under.terminal, under.direction = True, -1.0

    res = solve_ivp(_rhs(n), (r_start, r_stop), [u0, du0], method="RK45",
                    rtol=tol.rel, atol=tol.abs, events=[over, under],
                    dense_output=True)
    if res.t_events[0].size:
        cls = "overshoot"
    elif res.t_events[1].size:
        cls = "undershoot"
    else:
        cls = "converged"
    return ShootingOutcome(slope_trial=slope, classification=cls), res


def shoot_bracket(n, bracket_width=1e-10, tol=TOL_PROFILE, lo=0.1, hi=1.5):
    """Bisect the slope until the overshoot/undershoot bracket closes."""
    out_lo, _ = classify_shot(n, lo, tol=tol)
    out_hi, _ = classify_shot(n, hi, tol=tol)
    if out_lo.classification != "undershoot" or out_hi.classification != "overshoot":
        raise BracketFailure(f"initial bracket [{lo}, {hi}] does not straddle the slope")
    while hi - lo > bracket_width:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            raise BracketFailure("bracket cannot close further in double precision")
        out, _ = classify_shot(n, mid, tol=tol)
        if out.classification == "overshoot":
            hi = mid
        elif out.classification == "undershoot":
            lo = mid
        else:
            # neither event fired within the span: treat as the connecting
            # orbit; shrink symmetrically around it
            lo, hi = mid - 0.25 * (hi - lo), mid + 0.25 * (hi - lo)
    return lo, hi


@dataclass
class VortexProfile:
    degree: int
    slope: float
    r_max: float
    r_start: float
    bracket_width: float
    bracket: tuple
    grid: np.ndarray = field(repr=False)
    _poly: BPoly = field(repr=False)
    _dpoly: BPoly = field(repr=False)

    def eval(self, r):
        """(U, U') anywhere on [0, inf); series below r_start, tail beyond r_max."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        u = np.empty_like(r)
        du = np.empty_like(r)
        lo = r < self.r_start
        hi = r > self.r_max
        mid = ~(lo | hi)
        if lo.any():
            u[lo], du[lo] = _series_eval(self.degree, self.slope, r[lo])
        if mid.any():
            u[mid] = self._poly(r[mid])
            du[mid] = self._dpoly(r[mid])
        if hi.any():
            b1, b2, b3 = tail_coefficients(self.degree)
            x = r[hi]
            u[hi] = 1.0 + b1 / x ** 2 + b2 / x ** 4 + b3 / x ** 6
            du[hi] = -2.0 * b1 / x ** 3 - 4.0 * b2 / x ** 5 - 6.0 * b3 / x ** 7
        if scalar:
            return float(u[0]), float(du[0])
        return u, du

    def u(self, r):
        return self.eval(r)[0]

    def one_minus_u2(self, r):
        """1 - U(r)^2 computed as (1-U)(1+U); pure tail series beyond r_max."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        hi = r > self.r_max
        if hi.any():
            d2, d4, d6 = one_minus_u2_coefficients(self.degree)
            x = r[hi]
            out[hi] = d2 / x ** 2 + d4 / x ** 4 + d6 / x ** 6
        if (~hi).any():
            u = self.eval(r[~hi])[0]
            out[~hi] = (1.0 - u) * (1.0 + u)
        return float(out[0]) if scalar else out

    def ode_residual(self, r):
        """Profile ODE applied to the interpolant (should be ~0)."""
        r = np.asarray(r, dtype=float)
        u = self._poly(r)
        du = self._dpoly(r)
        d2u = self._poly.derivative(2)(r)
        n = self.degree
        return d2u + du / r - n * n * u / r ** 2 + (1.0 - u ** 2) * u


def _table_grid(r_start, r_max):
    dec = np.log10(r_max / r_start)
    return np.geomspace(r_start, r_max, int(dec * 2200) + 1)


def solve_profile(n, r_max=50.0, tol=TOL_PROFILE, bracket_width=1e-10):
    """Shoot for the slope, then collocate the profile on [r_start, r_max]."""
    if n < 1:
        raise ValueError("degree must be >= 1")
    if r_max < 20.0:
        raise ValueError("r_max must be >= 20")
    r_start = 1e-3
    lo, hi = shoot_bracket(n, bracket_width=bracket_width, tol=tol)
    slope = 0.5 * (lo + hi)

    # initial guess: shooting trajectory to moderate r, tail expansion beyond
    _, shot = classify_shot(n, slope, r_start=r_start, r_stop=60.0, tol=tol)
    r_switch = min(0.22 * np.log(1.0 / bracket_width) / np.sqrt(2.0) * 2.0, 10.0)
    mesh = np.geomspace(r_start, r_max, 600)
    b1, b2, b3 = tail_coefficients(n)
    u_guess = np.empty((2, mesh.size))
    inner = mesh <= min(r_switch, shot.t[-1])
    u_guess[0, inner] = shot.sol(mesh[inner])[0]
    u_guess[1, inner] = shot.sol(mesh[inner])[1]
    x = mesh[~inner]
    u_guess[0, ~inner] = 1.0 + b1 / x ** 2 + b2 / x ** 4
    u_guess[1, ~inner] = -2.0 * b1 / x ** 3 - 4.0 * b2 / x ** 5

    def bc(ya, yb):
        # left: series relation  r U' - n U + U r^2/(2n+2) = O(r^{n+4})
        left = r_start * ya[1] - n * ya[0] + ya[0] * r_start ** 2 / (2.0 * n + 2.0)
        right = yb[0] - (1.0 + b1 / r_max ** 2 + b2 / r_max ** 4 + b3 / r_max ** 6)
        return np.array([left, right])

    sol = solve_bvp(_rhs(n), bc, mesh, u_guess, tol=min(tol.rel, 1e-11),
                    max_nodes=400000)
    if not sol.success:
        raise BracketFailure(f"collocation failed: {sol.message}")

    grid = _table_grid(r_start, r_max)
    vals = sol.sol(grid)
    u, du = vals[0], vals[1]
    d2u = -du / grid + n * n * u / grid ** 2 - (1.0 - u ** 2) * u
    poly = BPoly.from_derivatives(grid, np.column_stack([u, du, d2u]))
    return VortexProfile(degree=n, slope=slope, r_max=float(r_max),
                         r_start=r_start, bracket_width=hi - lo,
                         bracket=(lo, hi), grid=grid,
                         _poly=poly, _dpoly=poly.derivative())


def eval_profile(profile, r):
    """(U, U') at r; module-level alias for VortexProfile.eval."""
    return profile.eval(r)


def one_minus_U2(profile, r):
    return profile.one_minus_u2(r)
