"""Threshold (zero-energy) fundamental systems for the half-line operators.

The two conjugated operators at degree n are

    H1 = -d^2/dr^2 + (n^2 - 1/4)/r^2 - (1 - 3 U^2),   threshold at 2,
    H2 = -d^2/dr^2 + (n^2 - 1/4)/r^2 - (1 - U^2),     threshold at 0.

For H2 the regular threshold solution is explicit, phi0 = sqrt(r) U(r),
and theta0 follows by reduction of order with theta0(1) = 0.  For H1 the
pair is built constructively:

  * regular solution near zero by a contractive Picard iteration around
    r^(n + 1/2) on (0, ~0.5],
  * extension by the ODE out to large radii,
  * an oscillatory pair at infinity ( sqrt(r) cos(mu ln r),
    -sqrt(r) sin(mu ln r)/mu with mu = n sqrt(2) ) by a Picard iteration of
    the Volterra map from infinity, truncated at R_inf with closed-form
    power-log tails,
  * connection constants c1, c2 (and c3, c4 for theta0) by matching values
    and derivatives against that pair at an anchor radius.

Both bases are normalized to W[theta0, phi0] = 1 with W(f, g) = f g' - f' g.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import (Tolerance, TOL_PROFILE, cumulative_integral,
                       integrate_ode, power_law_head, quad_adaptive)
from .vortex import VortexProfile, one_minus_u2_coefficients

#: coupling of U^2 in the potential and threshold shift per operator kind
OPERATOR_INFO = {
    "H1": (3.0, 2.0),
    "H2": (1.0, 0.0),
    "H1n": (3.0, 2.0),
    "H2n": (1.0, 0.0),
}

R_TAB = 650.0  # outer-most tabulated radius for every basis


def operator_tag(kind, degree):
    if kind not in ("H1", "H2"):
        raise ValueError(kind)
    return kind if degree == 1 else kind + "n"


def potential(profile, op, r):
    """Half-line potential of the conjugated operator (without the shift)."""
    coupling, _ = OPERATOR_INFO[op]
    n = profile.degree
    r = np.asarray(r, dtype=float)
    u = profile.eval(r)[0]
    return (n * n - 0.25) / r ** 2 - (1.0 - coupling * u ** 2)


def threshold_rhs(profile, op):
    """RHS of the zero-energy equation f'' = (V - sigma) f as a first-order system."""
    coupling, sigma = OPERATOR_INFO[op]
    n = profile.degree

    def rhs(r, y):
        u = profile.eval(r)[0]
        q = (n * n - 0.25) / r ** 2 - (1.0 - coupling * u ** 2) - sigma
        return [y[1], q * y[0]]

    return rhs


@dataclass
class ZeroEnergyBasis:
    operator: str
    degree: int
    sigma: float
    phi0: Callable = field(repr=False)
    theta0: Callable = field(repr=False)
    constants: Optional[tuple] = None
    eta0: Optional[float] = None
    profile: VortexProfile = field(default=None, repr=False)

    def wronskian(self, r):
        """W[theta0, phi0](r); should be identically 1."""
        tv, td = self.theta0(r)
        pv, pd = self.phi0(r)
        return tv * pd - td * pv


# ----------------------------------------------------------------------------
# H2-type basis: explicit regular solution sqrt(r) U(r)
# ----------------------------------------------------------------------------

def eta0_integral(profile, r_cut=300.0, tol=1e-12):
    """eta0 = int_1^inf (1 - U^2) / (s U^2) ds with an analytic tail."""
    n = profile.degree
    d2, d4, _ = one_minus_u2_coefficients(n)

    def integrand(s):
        u = profile.eval(s)[0]
        return profile.one_minus_u2(s) / (s * u * u)

    head = quad_adaptive(integrand, 1.0, r_cut, tol=tol)
    tail = d2 / (2 * r_cut ** 2) + (d4 + d2 * d2) / (4 * r_cut ** 4)
    return head + tail


def zero_basis_H2(profile, tol=TOL_PROFILE):
    """Threshold basis for H2 at the profile's degree."""
    n = profile.degree
    a = profile.slope
    grid = np.geomspace(1e-6, R_TAB, 9000)
    u, du = profile.eval(grid)
    anchor = int(np.searchsorted(grid, 1.0))
    integral = cumulative_integral(grid, 1.0 / (grid * u * u), anchor=anchor)
    # re-anchor exactly at r = 1
    shift = CubicSpline(np.log(grid), integral)(0.0)
    integral = integral - shift
    i_spline = CubicSpline(np.log(grid), integral)

    def phi0(r):
        r = np.asarray(r, dtype=float)
        uu, ddu = profile.eval(r)
        sq = np.sqrt(r)
        return sq * uu, np.where(r > 0, uu / (2.0 * np.maximum(sq, 1e-300)) + sq * ddu,
                                 0.0 if n > 1 else a)

    def theta0(r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        uu, ddu = profile.eval(r)
        sq = np.sqrt(r)
        val = np.empty_like(r)
        der = np.empty_like(r)
        inside = (r >= grid[0]) & (r <= grid[-1])
        if inside.any():
            ri, ui, sqi = r[inside], uu[inside], sq[inside]
            I = i_spline(np.log(ri))
            val[inside] = -sqi * ui * I
            der[inside] = -(ui / (2 * sqi) + sqi * profile.eval(ri)[1]) * I \
                - 1.0 / (sqi * ui)
        low = r < grid[0]
        if low.any():
            # theta0 ~ r^{1/2-n}/(2 n a) plus the regular piece through I0
            rl = r[low]
            i0 = integral[0] + 1.0 / (2 * n * a * a * grid[0] ** (2 * n))
            lead = rl ** (0.5 - n) / (2 * n * a)
            val[low] = lead - a * rl ** (n + 0.5) * i0
            der[low] = (0.5 - n) * lead / rl - a * (n + 0.5) * rl ** (n - 0.5) * i0
        high = r > grid[-1]
        if high.any():
            raise ValueError("theta0 requested beyond tabulated range")
        if scalar:
            return float(val[0]), float(der[0])
        return val, der

    return ZeroEnergyBasis(operator=operator_tag("H2", n), degree=n,
                           sigma=0.0, phi0=phi0, theta0=theta0,
                           constants=None, eta0=eta0_integral(profile),
                           profile=profile)


# ----------------------------------------------------------------------------
# H1-type basis: constructive Picard iterations + matching
# ----------------------------------------------------------------------------

class PicardDivergence(RuntimeError):
    """Fixed-point iteration failed to contract."""


def _log_tail_moment(m, alpha, R):
    """int_R^inf s^(-m) exp(i alpha ln s) ds (valid for m > 1)."""
    return R ** (1.0 - m) * np.exp(1j * alpha * np.log(R)) / ((m - 1.0) - 1j * alpha)


def _inner_regular(profile, r_in=0.55, npts=2400, max_iter=60):
    """Picard solution r^(n+1/2) + eta(r) of the H1 threshold equation on (0, r_in]."""
    n = profile.degree
    nu = n + 0.5
    s = np.geomspace(1e-6, r_in, npts)
    v0 = 3.0 - 3.0 * profile.eval(s)[0] ** 2
    y1 = s ** nu
    y2 = s ** (0.5 - n) / (2.0 * n)
    eta = np.zeros_like(s)
    for it in range(max_iter):
        w = v0 * (s ** nu + eta)
        g1, g2 = y1 * w, y2 * w
        c1 = cumulative_integral(s, g1) + power_law_head(s[0], g1[0], g1[1], s[1])
        c2 = cumulative_integral(s, g2) + power_law_head(s[0], g2[0], g2[1], s[1])
        new = -y1 * c2 + y2 * c1
        delta = np.max(np.abs(new - eta))
        eta = new
        if delta < 1e-15 * max(1.0, np.max(np.abs(eta))):
            break
    else:
        raise PicardDivergence("inner threshold iteration did not converge")
    # derivative from the differentiated integral identity (diagonal cancels)
    w = v0 * (s ** nu + eta)
    g1, g2 = y1 * w, y2 * w
    c1 = cumulative_integral(s, g1) + power_law_head(s[0], g1[0], g1[1], s[1])
    c2 = cumulative_integral(s, g2) + power_law_head(s[0], g2[0], g2[1], s[1])
    deta = -nu * s ** (nu - 1.0) * c2 + (0.5 - n) * s ** (-0.5 - n) / (2.0 * n) * c1
    return s, eta, deta


def _outer_pair(profile, r_lo=10.0, npts=4000, max_iter=60):
    """Oscillatory pair (phi_inf, theta_inf) on [r_lo, R_TAB] by Picard from infinity."""
    n = profile.degree
    mu = n * np.sqrt(2.0)
    s = np.geomspace(r_lo, R_TAB, npts)
    th = mu * np.log(s)
    cos_t, sin_t = np.cos(th), np.sin(th)
    sq = np.sqrt(s)
    vt = 3.0 * profile.one_minus_u2(s) - 3.0 * n * n / s ** 2
    _, d4, d6 = one_minus_u2_coefficients(n)
    v4, v6 = 3.0 * d4, 3.0 * d6

    R = R_TAB
    # tail moments of s^-3 and s^-5 against 1 and exp(2 i mu ln s)
    m_plain = v4 * R ** -2 / 2.0 + v6 * R ** -4 / 4.0
    m_osc = v4 * _log_tail_moment(3, 2 * mu, R) + v6 * _log_tail_moment(5, 2 * mu, R)

    def iterate(lead, tail_cc, tail_cs):
        eps = np.zeros_like(s)
        for it in range(max_iter):
            w = lead + eps
            gc = sq * cos_t * vt * w
            gs = sq * sin_t * vt * w
            cc = cumulative_integral(s, gc)
            cs = cumulative_integral(s, gs)
            # right-cumulative: int_r^{R} = total - left-cumulative, plus tail
            Cc = (cc[-1] - cc) + tail_cc
            Cs = (cs[-1] - cs) + tail_cs
            new = -(sq / mu) * (sin_t * Cc - cos_t * Cs)
            delta = np.max(np.abs(new - eps))
            eps = new
            if delta < 1e-15:
                break
        else:
            raise PicardDivergence("outer Volterra iteration did not converge")
        w = lead + eps
        gc = sq * cos_t * vt * w
        gs = sq * sin_t * vt * w
        cc = cumulative_integral(s, gc)
        cs = cumulative_integral(s, gs)
        Cc = (cc[-1] - cc) + tail_cc
        Cs = (cs[-1] - cs) + tail_cs
        deps = -(1.0 / mu) * ((sin_t / 2.0 + mu * cos_t) / sq * Cc
                              - (cos_t / 2.0 - mu * sin_t) / sq * Cs)
        return eps, deps

    # leading sqrt(s) cos: cos^2 = (1 + cos 2th)/2, sin*cos = (sin 2th)/2
    eps1, deps1 = iterate(sq * cos_t,
                          tail_cc=0.5 * (m_plain + m_osc.real),
                          tail_cs=0.5 * m_osc.imag)
    # leading -sqrt(s) sin / mu: sin^2 = (1 - cos 2th)/2
    eps2, deps2 = iterate(-sq * sin_t / mu,
                          tail_cc=-0.5 * m_osc.imag / mu,
                          tail_cs=-0.5 * (m_plain - m_osc.real) / mu)

    phi_inf = sq * cos_t + eps1
    dphi_inf = (cos_t / 2.0 - mu * sin_t) / sq + deps1
    theta_inf = -sq * sin_t / mu + eps2
    dtheta_inf = -(sin_t / 2.0 + mu * cos_t) / (mu * sq) + deps2
    return s, (phi_inf, dphi_inf), (theta_inf, dtheta_inf)


def _match_at(anchor, fn_val, fn_der, basis_vals):
    """Solve [phi_inf theta_inf; phi_inf' theta_inf'] [A, B] = [f, f']."""
    (pv, pd), (tv, td) = basis_vals
    M = np.array([[pv, tv], [pd, td]])
    rhs = np.array([fn_val, fn_der])
    return np.linalg.solve(M, rhs)


def _spline_fn(x, val, der):
    """(value, derivative) interpolant in log x from exact nodal pairs."""
    lv = CubicSpline(np.log(x), val)
    ld = CubicSpline(np.log(x), der)

    def fn(r):
        u = np.log(r)
        return lv(u), ld(u)

    return fn


def zero_basis_H1(profile, r_anchor=20.0, tol=TOL_PROFILE):
    """Constructive threshold basis for H1 (Klein-Gordon type operator).

    Returns a basis with connection constants (c1, c2, c3, c4) describing the
    sqrt(r) (c cos + c sin)(mu ln r) behavior of phi0 and theta0 at infinity.
    """
    if r_anchor < 10.0:
        raise ValueError("anchor must sit well inside the oscillatory regime (>= 10)")
    n = profile.degree
    nu = n + 0.5
    mu = n * np.sqrt(2.0)
    rhs = threshold_rhs(profile, operator_tag("H1", n))

    # (i) regular solution near zero
    s_in, eta, deta = _inner_regular(profile)
    r_in = s_in[-1]
    inner_fn = _spline_fn(s_in, s_in ** nu + eta, nu * s_in ** (nu - 1.0) + deta)

    # (ii) extend by the ODE to the tabulated range
    y_in = [s_in[-1] ** nu + eta[-1], nu * s_in[-1] ** (nu - 1.0) + deta[-1]]
    traj_phi = integrate_ode(rhs, (r_in, R_TAB), y_in,
                             Tolerance(rel=1e-12, abs=1e-14))

    # (iii) oscillatory pair at infinity
    s_out, (pvs, pds), (tvs, tds) = _outer_pair(profile)
    pair_fn = (_spline_fn(s_out, pvs, pds), _spline_fn(s_out, tvs, tds))

    # (iv) connection constants for phi0
    fv, fd = traj_phi(r_anchor)
    A, B = _match_at(r_anchor, fv, fd,
                     (pair_fn[0](r_anchor), pair_fn[1](r_anchor)))
    c1, c2 = A, -B / mu

    # (v) theta0 by reduction of order: theta0(1) = 0, W[theta0, phi0] = 1
    phi_at_1 = traj_phi(1.0)[0] if r_in <= 1.0 else inner_fn(1.0)[0]
    th_init = [0.0, -1.0 / phi_at_1]
    traj_th_out = integrate_ode(rhs, (1.0, R_TAB), th_init,
                                Tolerance(rel=1e-12, abs=1e-14))
    traj_th_in = integrate_ode(rhs, (1.0, 1e-4), th_init,
                               Tolerance(rel=1e-12, abs=1e-14))

    # (vi) constants for theta0 by the same matching
    gv, gd = traj_th_out(r_anchor)
    A2, B2 = _match_at(r_anchor, gv, gd,
                       (pair_fn[0](r_anchor), pair_fn[1](r_anchor)))
    c3, c4 = A2, -B2 / mu

    def phi0(r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        val = np.empty_like(r)
        der = np.empty_like(r)
        tiny = r < s_in[0]
        low = (~tiny) & (r <= r_in)
        mid = r > r_in
        if tiny.any():
            val[tiny] = r[tiny] ** nu
            der[tiny] = nu * r[tiny] ** (nu - 1.0)
        if low.any():
            val[low], der[low] = inner_fn(r[low])
        if mid.any():
            out = traj_phi(r[mid])
            val[mid], der[mid] = out[0], out[1]
        if scalar:
            return float(val[0]), float(der[0])
        return val, der

    def theta0(r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        val = np.empty_like(r)
        der = np.empty_like(r)
        tiny = r < 1e-4
        low = (~tiny) & (r <= 1.0)
        mid = r > 1.0
        if tiny.any():
            # continue with the leading 1/(2n) r^{1/2-n} scaling from the edge
            redge, dedge = traj_th_in(1e-4)
            scale = r[tiny] ** (0.5 - n) / (1e-4) ** (0.5 - n)
            val[tiny] = redge * scale
            der[tiny] = (0.5 - n) * val[tiny] / r[tiny]
        if low.any():
            out = traj_th_in(r[low])
            val[low], der[low] = out[0], out[1]
        if mid.any():
            out = traj_th_out(r[mid])
            val[mid], der[mid] = out[0], out[1]
        if scalar:
            return float(val[0]), float(der[0])
        return val, der

    return ZeroEnergyBasis(operator=operator_tag("H1", n), degree=n,
                           sigma=2.0, phi0=phi0, theta0=theta0,
                           constants=(float(c1), float(c2), float(c3), float(c4)),
                           eta0=None, profile=profile)


def zero_basis_n(profile, operator, n):
    """Degree-n (n >= 2) threshold basis for either operator kind."""
    if n < 2:
        raise ValueError("use zero_basis_H1 / zero_basis_H2 for n = 1")
    if profile.degree != n:
        raise ValueError("profile degree does not match requested n")
    kind = "H1" if operator.startswith("H1") else "H2"
    return zero_basis_H1(profile) if kind == "H1" else zero_basis_H2(profile)


# ----------------------------------------------------------------------------
# diagnostics used by tests and the CLI
# ----------------------------------------------------------------------------

def fit_log_oscillation(r, y, freq):
    """Least-squares (A, B) in y ~ A cos(freq ln r) + B sin(freq ln r)."""
    th = freq * np.log(r)
    M = np.column_stack([np.cos(th), np.sin(th)])
    coef, res, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = y - M @ coef
    return coef[0], coef[1], float(np.sqrt(np.mean(resid ** 2)))


def fit_log_frequency(r, y, freq_lo, freq_hi, nscan=400):
    """Best oscillation frequency in ln r by scanning the LSQ residual."""
    freqs = np.linspace(freq_lo, freq_hi, nscan)
    resids = np.array([fit_log_oscillation(r, y, f)[2] for f in freqs])
    i = int(np.argmin(resids))
    lo = freqs[max(i - 2, 0)]
    hi = freqs[min(i + 2, nscan - 1)]
    fine = np.linspace(lo, hi, 200)
    resids = np.array([fit_log_oscillation(r, y, f)[2] for f in fine])
    return float(fine[np.argmin(resids)])
