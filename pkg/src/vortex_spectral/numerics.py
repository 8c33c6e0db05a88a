"""Shared double-precision numerical kernels.

Everything downstream (profile solve, zero modes, eigenfunctions, transforms,
evolution) is built on four primitives:

- ``integrate_ode``: embedded RK4(5) with dense output (scipy's RK45 behind a
  thin trajectory wrapper).  All ODEs in this project are non-stiff away from
  r = 0; the r = 0 singularity is always entered through series initial data,
  never integrated into.
- ``quad_adaptive``: globally adaptive Gauss-Legendre quadrature on vectorized
  integrands, with graded bisection toward integrable endpoint singularities
  and a caller-supplied analytic tail for infinite upper limits.
- ``quad_oscillatory``: wavelength-scaled panel quadrature for integrals
  of the form  ``int A(k) exp(i phi(k)) dk``  where ``phi'`` is available.
  Panels never span more than a fixed fraction of the local period, so the
  oscillation itself is resolved exactly by the panel layout; accuracy is
  verified by a density-doubling check.
- ``find_root_bracketed``: Brent root finding on a sign-changing bracket.

All operations are pure; inputs and outputs are immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import roots_legendre


class StepSizeUnderflow(RuntimeError):
    """Integrator hit its minimal step (stiffness or singularity)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge within the subdivision budget."""


class BracketError(ValueError):
    """Root bracket does not contain a sign change."""


@dataclass(frozen=True)
class Tolerance:
    """Relative/absolute error targets for ODE and quadrature work."""

    rel: float = 1e-10
    abs: float = 1e-12

    def __post_init__(self):
        if not (self.rel > 0.0):
            raise ValueError("rel tolerance must be positive")
        if self.rel > 1e-2:
            raise ValueError("rel tolerance must be <= 1e-2")
        if self.abs < 0.0:
            raise ValueError("abs tolerance must be >= 0")


#: defaults used across the package
TOL_PROFILE = Tolerance(rel=1e-10, abs=1e-12)
TOL_EVOLUTION = Tolerance(rel=1e-7, abs=1e-9)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing radial (or frequency) nodes with a layout tag."""

    nodes: np.ndarray
    kind: str = "composite"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("grid needs at least 2 nodes")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("grid nodes must be finite")
        if np.any(nodes < 0.0):
            raise ValueError("grid nodes must be >= 0")
        if np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes must be strictly increasing")
        if self.kind not in ("uniform", "log-uniform", "composite"):
            raise ValueError(f"unknown grid kind {self.kind!r}")

    def __len__(self):
        return self.nodes.size

    @classmethod
    def uniform(cls, a, b, n):
        return cls(np.linspace(a, b, n), kind="uniform")

    @classmethod
    def log_uniform(cls, a, b, n):
        if a <= 0:
            raise ValueError("log grid needs a > 0")
        return cls(np.geomspace(a, b, n), kind="log-uniform")

    @classmethod
    def composite(cls, *parts):
        """Concatenate grids, dropping duplicate junction nodes."""
        nodes = np.concatenate([np.asarray(p.nodes if isinstance(p, Grid) else p)
                                for p in parts])
        nodes = np.unique(nodes)
        return cls(nodes, kind="composite")


class Trajectory:
    """Dense-output ODE solution, evaluable at any r inside its span."""

    def __init__(self, sol, t_min, t_max):
        self._sol = sol
        self.t_min = t_min
        self.t_max = t_max

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        lo, hi = self.t_min, self.t_max
        if np.any(r < lo - 1e-12 * (1 + abs(lo))) or np.any(r > hi + 1e-12 * (1 + abs(hi))):
            raise ValueError(f"evaluation outside trajectory span [{lo}, {hi}]")
        return self._sol(np.clip(r, lo, hi))


def integrate_ode(rhs, span, init, tol=TOL_PROFILE, events=None, max_step=np.inf):
    """Integrate y' = rhs(r, y) over span with dense output.

    span may be decreasing (inward integration).  Raises StepSizeUnderflow
    with the failure location if the integrator stalls.
    """
    a, b = float(span[0]), float(span[1])
    y0 = np.atleast_1d(np.asarray(init))
    res = solve_ivp(rhs, (a, b), y0, method="RK45", dense_output=True,
                    rtol=tol.rel, atol=tol.abs, events=events, max_step=max_step)
    if res.status == -1:
        raise StepSizeUnderflow(res.message, location=res.t[-1] if res.t.size else a)
    lo, hi = (a, b) if a <= b else (b, a)
    traj = Trajectory(res.sol, lo, hi)
    traj.raw = res
    return traj


_GL_CACHE: dict = {}


def _gl_rule(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = roots_legendre(n)
    return _GL_CACHE[n]


def _panel_values(f, lo, hi, order):
    """Gauss-Legendre values of subpanel integrals; f is vectorized."""
    x, w = _gl_rule(order)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(pts.ravel())).reshape(pts.shape)
    return (vals * w).sum(axis=1) * half


def quad_adaptive(f, a, b, tol=1e-10, tail=None, max_rounds=64, init_panels=8):
    """Adaptive quadrature of a vectorized integrand on (a, b).

    Integrable endpoint singularities up to r^(-1/2) are handled by the
    graded bisection of failing end panels.  An infinite upper limit needs a
    caller-supplied ``tail(R)`` estimating |int_R^inf f|; the integral is
    truncated once the tail is below the tolerance budget.
    """
    a = float(a)
    if np.isinf(b):
        if tail is None:
            raise ValueError("infinite upper limit requires a tail estimate")
        R = max(2.0 * abs(a), 1.0)
        budget = max(tol, 1e-300)
        for _ in range(80):
            if tail(R) <= 0.25 * budget:
                break
            R *= 2.0
        else:
            raise QuadratureError("tail never fell below tolerance budget")
        b = R
    b = float(b)
    if a == b:
        return 0.0
    edges = np.linspace(a, b, init_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    total = 0.0 + 0.0j
    pending_err = np.inf
    span = b - a
    for _ in range(max_rounds):
        coarse = _panel_values(f, lo, hi, 8)
        fine = _panel_values(f, lo, hi, 16)
        err = np.abs(fine - coarse)
        budget = tol * (1.0 + abs(total + fine.sum()))
        ok = err <= budget * (hi - lo) / span
        pending_err = err[~ok].sum()
        if pending_err <= 0.1 * budget:
            total += fine.sum()
            lo = np.empty(0)
            break
        total += fine[ok].sum()
        lo, hi = lo[~ok], hi[~ok]
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        lo = np.concatenate([lo, mid])
        hi = np.concatenate([mid, hi])
        # keep the worklist bounded: flush the narrowest panels at fine order
        if lo.size > 4096:
            order = np.argsort(hi - lo)
            keep, drop = order[-2048:], order[:-2048]
            total += _panel_values(f, lo[drop], hi[drop], 16).sum()
            lo, hi = lo[keep], hi[keep]
    else:
        raise QuadratureError(f"no convergence after {max_rounds} subdivision rounds "
                              f"(pending error {pending_err:.2e})")
    total = complex(total)
    return total.real if total.imag == 0.0 else total


def _oscillatory_edges(dphase, a, b, points_per_period, min_panels):
    trial = np.linspace(a, b, 513)
    dph = np.abs(np.asarray(dphase(trial), dtype=float)) + 0.0
    density = np.maximum(dph * points_per_period / (2.0 * np.pi),
                         min_panels / (b - a))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1])
                                           * np.diff(trial))])
    n_panels = max(int(np.ceil(cum[-1])), min_panels)
    targets = np.linspace(0.0, cum[-1], n_panels + 1)
    return np.interp(targets, cum, trial)


def quad_oscillatory(amplitude, phase, dphase, a, b, tol=1e-10, max_doublings=4):
    """Compute ``int_a^b amplitude(k) exp(i phase(k)) dk``.

    The panel layout is subdivided at the scale of the local wavelength
    2*pi/|phase'|, so the complex exponential is fully resolved; the result is
    accepted once doubling the panel density moves it by less than tol.
    Both callables must accept numpy arrays.
    """
    a, b = float(a), float(b)
    if a == b:
        return 0.0 + 0.0j

    def run(ppp):
        edges = _oscillatory_edges(dphase, a, b, ppp, 16)
        lo, hi = edges[:-1], edges[1:]
        vals = _panel_values(lambda k: np.asarray(amplitude(k))
                             * np.exp(1j * np.asarray(phase(k))), lo, hi, 12)
        return vals.sum()

    ppp = 3.0
    prev = run(ppp)
    for _ in range(max_doublings):
        ppp *= 2.0
        cur = run(ppp)
        if abs(cur - prev) <= tol * (1.0 + abs(cur)):
            return cur
        prev = cur
    raise QuadratureError("oscillatory quadrature did not settle "
                          "(unresolved stationary point at a domain edge?)")


def cumulative_integral(x, g, anchor=0):
    """Cumulative integral of nodal data g on a positive grid x.

    Returns I with I[j] = int_{x[anchor]}^{x[j]} g ds, assembled from
    per-panel integrals of a cubic spline in log x and summed outward from
    the anchor.  Summing from the anchor (instead of differencing a global
    antiderivative) keeps the result accurate even when the integrand spans
    many orders of magnitude, as it does for the strongly singular weights
    used by the zero-mode constructions.
    """
    from scipy.interpolate import CubicSpline

    x = np.asarray(x, dtype=float)
    u = np.log(x)
    h = np.asarray(g) * x  # integrand w.r.t. du = dx/x
    sp = CubicSpline(u, h)
    du = np.diff(u)
    c = sp.c
    panels = sum(c[k] * du ** (4 - k) / (4 - k) for k in range(4))
    out = np.empty(x.size, dtype=panels.dtype)
    out[anchor] = 0.0
    if anchor < x.size - 1:
        out[anchor + 1:] = np.cumsum(panels[anchor:])
    if anchor > 0:
        out[:anchor] = -np.cumsum(panels[:anchor][::-1])[::-1]
    return out


def power_law_head(x0, g0, g1, x1):
    """Estimate int_0^x0 g ds assuming g ~ x^p locally (p from the log slope)."""
    if g0 == 0.0 or g1 == 0.0 or np.sign(g0) != np.sign(g1):
        return 0.0
    p = np.log(abs(g1 / g0)) / np.log(x1 / x0)
    if p <= -0.99:
        return 0.0
    return g0 * x0 / (p + 1.0)


def find_root_bracketed(f, a, b, tol=1e-12):
    """Brent's method on [a, b]; requires f(a) * f(b) < 0."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise BracketError(f"no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    return brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
