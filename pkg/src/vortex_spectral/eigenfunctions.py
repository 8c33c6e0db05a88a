"""Generalized eigenfunctions of the half-line operators.

Two complementary representations are glued at the matching scale r k = c:

* inner region (r k <= c): a convergent series around the threshold solution,

      Phi(r, k^2) = sqrt(r) * sum_j (-k^2)^j f_j(r),      f_0 = phi0 / sqrt(r),

  with coefficient functions obtained by iterating the threshold Green kernel

      sqrt(r) f_j(r) = int_0^r [theta0(s) phi0(r) - theta0(r) phi0(s)]
                               sqrt(s) f_{j-1}(s) ds.

  The f_j are nonnegative near the origin and obey a factorial-in-j bound, so
  the alternating series converges for every r k, and fast for r k <= 1.
  (The sign alternation is fixed here by the direct ODE oracle; see the
  recursion's Wronskian orientation.)  Derivatives come from the
  differentiated kernel identity, never from numerical differencing.

* outer region (r k >= c): the Weyl solution at infinity,

      Psi(r, k^2) = k^(-1/2) exp(i k r) sigma(k r, r),

  seeded far out (k r >= 40) by the asymptotic series
  sigma = sum_{j<=j0} k^(-j) f_j(r) whose coefficients solve
  f_{j+1} = (i/2) f_j' + (i/2) int_r^inf Q f_j, carried as exact Laurent
  polynomials of the potential tail, then transported by inward ODE
  integration.  The normalization W(conj(Psi), Psi) = 2i holds by
  construction and is asserted numerically.

The connection coefficient a(k^2) = (i/2) W(Phi, conj(Psi)) glues the two:
Phi = 2 Re(a Psi) on the outer region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .numerics import Tolerance, cumulative_integral, integrate_ode, power_law_head
from .vortex import one_minus_u2_coefficients
from .zero_modes import OPERATOR_INFO, ZeroEnergyBasis, potential

DEFAULT_C_MATCH = 0.5
_INNER_R_HI = 640.0  # must stay below the zero-mode tabulation range
_INNER_J_MAX = 14


class RegionError(ValueError):
    """Evaluation requested in the wrong matching region."""


# ----------------------------------------------------------------------------
# inner series
# ----------------------------------------------------------------------------

class _InnerTable:
    """k-independent coefficient functions f_j and their derivatives."""

    def __init__(self, basis, r_hi=_INNER_R_HI, j_max=_INNER_J_MAX, npts_per_decade=640):
        n = basis.degree
        decades = np.log10(r_hi / 1e-6)
        r = np.geomspace(1e-6, r_hi, int(decades * npts_per_decade))
        pv, pd = basis.phi0(r)
        tv, td = basis.theta0(r)
        sq = np.sqrt(r)
        f = [pv / sq]
        df = [pd / sq - pv / (2.0 * r * sq)]
        for j in range(1, j_max + 1):
            g = sq * f[-1]
            g_th = tv * g
            g_ph = pv * g
            a_th = cumulative_integral(r, g_th) + power_law_head(r[0], g_th[0], g_th[1], r[1])
            a_ph = cumulative_integral(r, g_ph) + power_law_head(r[0], g_ph[0], g_ph[1], r[1])
            srf = pv * a_th - tv * a_ph
            dsrf = pd * a_th - td * a_ph
            f.append(srf / sq)
            df.append(dsrf / sq - srf / (2.0 * r * sq))
        self.r = r
        self.f = np.array(f)
        self.df = np.array(df)
        self.j_max = j_max
        self.degree = n
        u = np.log(r)
        self._sf = [CubicSpline(u, fj) for fj in f]
        self._sdf = [CubicSpline(u, dfj) for dfj in df]

    def coeff(self, j, r):
        """(f_j, f_j') at r, power-law continued below the table."""
        r = np.asarray(r, dtype=float)
        if np.any(r > self.r[-1] * (1.0 + 1e-12)):
            raise RegionError("inner coefficient table does not extend this far out")
        rc = np.clip(r, self.r[0], self.r[-1])
        u = np.log(rc)
        v = self._sf[j](u)
        d = self._sdf[j](u)
        low = r < self.r[0]
        if np.any(low):
            p = 2 * j + self.degree
            v[low] = self.f[j, 0] * (r[low] / self.r[0]) ** p
            d[low] = p * v[low] / r[low]
        return v, d

    def fitted_growth_constant(self):
        """Smallest C with |f_j| <= C^j r^(2j+n) / (j! (j+1)!) on r <= 1."""
        mask = self.r <= 1.0
        best = 0.0
        from math import factorial
        for j in range(1, self.j_max + 1):
            bound = self.r[mask] ** (2 * j + self.degree) / (factorial(j) * factorial(j + 1))
            ratio = np.max(np.abs(self.f[j, mask]) / bound)
            best = max(best, ratio ** (1.0 / j))
        return best


def inner_table(basis, r_hi=_INNER_R_HI, j_max=_INNER_J_MAX):
    key = (float(r_hi), int(j_max))
    cache = getattr(basis, "_inner_tables", None)
    if cache is None:
        cache = {}
        object.__setattr__(basis, "_inner_tables", cache) if hasattr(basis, "__frozen__") \
            else setattr(basis, "_inner_tables", cache)
    if key not in cache:
        cache[key] = _InnerTable(basis, r_hi=r_hi, j_max=j_max)
    return cache[key]


@dataclass
class InnerSeries:
    operator: str
    degree: int
    k: float
    c_match: float
    J: int
    table: _InnerTable = field(repr=False)

    def eval(self, r):
        """(Phi, dPhi) from the truncated alternating series."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        sq = np.sqrt(r)
        k2 = self.k * self.k
        val = np.zeros_like(r)
        der = np.zeros_like(r)
        sign = 1.0
        fac = 1.0
        for j in range(self.J + 1):
            fj, dfj = self.table.coeff(j, r)
            val += sign * fac * fj
            der += sign * fac * (fj / (2.0 * r) + dfj)
            sign = -sign
            fac *= k2
        if scalar:
            return float(sq[0] * val[0]), float(sq[0] * der[0])
        return sq * val, sq * der


def inner_series(op, basis, k, c_match=DEFAULT_C_MATCH, tol=1e-10):
    """Inner representation of Phi(., k^2), truncated by the factorial tail bound."""
    if not (0.3 < c_match <= 0.6):
        raise ValueError("c_match must lie in (0.3, 0.6]")
    if k < 0:
        raise ValueError("k must be >= 0")
    table = inner_table(basis)
    from math import factorial
    C = max(table.fitted_growth_constant(), 1.0)
    J = table.j_max
    for j in range(1, table.j_max + 1):
        if (C * c_match * c_match) ** j / (factorial(j) * factorial(j + 1)) < tol:
            J = j
            break
    return InnerSeries(operator=basis.operator, degree=basis.degree, k=float(k),
                       c_match=c_match, J=J, table=table)


# ----------------------------------------------------------------------------
# Weyl solution at infinity
# ----------------------------------------------------------------------------

def weyl_laurent_coefficients(op, degree, j_count, max_power=10):
    """Laurent arrays (coefficient of r^-m) for the sigma-series functions f_j."""
    d2, d4, d6 = one_minus_u2_coefficients(degree)
    coupling, _ = OPERATOR_INFO[op]
    M = max_power
    q = np.zeros(M + 1)
    q[2] = (degree * degree - 0.25) - coupling * d2
    if M >= 4:
        q[4] = -coupling * d4
    if M >= 6:
        q[6] = -coupling * d6
    fs = [np.zeros(M + 1, dtype=complex)]
    fs[0][0] = 1.0
    for _ in range(j_count):
        f = fs[-1]
        deriv = np.zeros(M + 1, dtype=complex)
        for m in range(M):
            deriv[m + 1] = -m * f[m]
        prod = np.zeros(2 * M + 1, dtype=complex)
        for m1 in range(M + 1):
            if q[m1] == 0.0:
                continue
            prod[m1:m1 + M + 1] += q[m1] * f
        integ = np.zeros(M + 1, dtype=complex)
        for m in range(2, min(prod.size, M + 2)):
            if prod[m] != 0.0:
                integ[m - 1] = prod[m] / (m - 1.0)
        fs.append(0.5j * deriv + 0.5j * integ)
    return fs


def _laurent_eval(coeffs, r):
    val = np.zeros(np.shape(r), dtype=complex)
    der = np.zeros(np.shape(r), dtype=complex)
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        val += c * r ** (-m)
        der += -m * c * r ** (-m - 1)
    return val, der


@dataclass
class WeylSolution:
    operator: str
    degree: int
    k: float
    r_init: float
    series_order: int
    r_low: float
    _coeffs: list = field(repr=False)
    _traj: Optional[object] = field(repr=False, default=None)

    def sigma(self, r):
        """(sigma, d/dr sigma) from the asymptotic series (valid r >= r_init)."""
        val = np.zeros(np.shape(r), dtype=complex)
        der = np.zeros(np.shape(r), dtype=complex)
        for j, cj in enumerate(self._coeffs[: self.series_order + 1]):
            v, d = _laurent_eval(cj, r)
            val += self.k ** (-j) * v
            der += self.k ** (-j) * d
        return val, der

    def eval(self, r):
        """(Psi, dPsi) at r, complex; trajectory inside, series beyond r_init."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        val = np.empty(r.shape, dtype=complex)
        der = np.empty(r.shape, dtype=complex)
        k = self.k
        far = r >= self.r_init
        if far.any():
            sig, dsig = self.sigma(r[far])
            phase = np.exp(1j * k * r[far]) / np.sqrt(k)
            val[far] = phase * sig
            der[far] = phase * (1j * k * sig + dsig)
        near = ~far
        if near.any():
            if self._traj is None:
                raise RegionError("no inward trajectory available below r_init")
            if np.any(r[near] < self.r_low - 1e-12):
                raise RegionError("r below the integrated range of the Weyl solution")
            out = self._traj(np.maximum(r[near], self.r_low))
            val[near] = out[0]
            der[near] = out[1]
        if scalar:
            return complex(val[0]), complex(der[0])
        return val, der

    def normalization_defect(self, r):
        """|W(conj(Psi), Psi) - 2i| at r."""
        v, d = self.eval(r)
        w = np.conj(v) * d - np.conj(d) * v
        return np.abs(w - 2j)


def weyl_solution(op, profile, k, r_eval, tol=None, j0=4, seed_scale=40.0):
    """Weyl solution seeded at r_init = max(seed_scale/k, seed_scale) >= r_eval side.

    Integrates inward to r_eval when r_eval < r_init; for larger radii the
    asymptotic series itself is the representation.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if r_eval * k < 0.3:
        raise RegionError("r_eval inside the inner region; use inner_series there")
    tol = tol or Tolerance(rel=1e-11, abs=1e-13)
    coeffs = weyl_laurent_coefficients(op, profile.degree, j_count=max(j0, 6))
    r_init = max(seed_scale / k, seed_scale)
    sol = WeylSolution(operator=op, degree=profile.degree, k=float(k),
                       r_init=r_init, series_order=j0, r_low=r_init,
                       _coeffs=coeffs)
    if r_eval < r_init:
        sig, dsig = sol.sigma(np.asarray(r_init))
        phase = np.exp(1j * k * r_init) / np.sqrt(k)
        y0 = np.array([phase * sig, phase * (1j * k * sig + dsig)], dtype=complex)
        coupling, shift = OPERATOR_INFO[op]
        n = profile.degree

        def rhs(r, y):
            u = profile.eval(r)[0]
            q = (n * n - 0.25) / r ** 2 - (1.0 - coupling * u * u) - shift - k * k
            return [y[1], q * y[0]]

        traj = integrate_ode(rhs, (r_init, r_eval), y0, tol)
        sol._traj = traj
        sol.r_low = r_eval
    return sol


# ----------------------------------------------------------------------------
# global eigenfunction
# ----------------------------------------------------------------------------

def connection_wronskian(inner, weyl, r_w):
    """a(k^2) = (i/2) W(Phi, conj(Psi)) evaluated at radius r_w."""
    pv, pd = inner.eval(r_w)
    wv, wd = weyl.eval(r_w)
    return 0.5j * (pv * np.conj(wd) - pd * np.conj(wv))


@dataclass
class Eigenfunction:
    operator: str
    k: float
    inner: InnerSeries
    outer: Optional[WeylSolution]
    a_conn: Optional[complex]
    c_match: float

    def eval(self, r):
        """(Phi, dPhi); inner series for r k <= c_match, 2 Re(a Psi) beyond."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        val = np.empty_like(r)
        der = np.empty_like(r)
        if self.k == 0.0 or self.outer is None:
            val, der = self.inner.eval(r)
        else:
            cut = self.c_match / self.k
            left = r <= cut
            if left.any():
                val[left], der[left] = self.inner.eval(r[left])
            if (~left).any():
                wv, wd = self.outer.eval(r[~left])
                val[~left] = 2.0 * np.real(self.a_conn * wv)
                der[~left] = 2.0 * np.real(self.a_conn * wd)
        if scalar:
            return float(val[0]), float(der[0])
        return val, der


def eigenfunction(op, basis, profile, k, c_match=DEFAULT_C_MATCH, tol=1e-10,
                  r_low=None):
    """Assemble the global eigenfunction at frequency k (k = 0 allowed)."""
    if basis.operator != op:
        raise ValueError(f"basis is for {basis.operator}, not {op}")
    inn = inner_series(op, basis, k, c_match=c_match, tol=tol)
    if k == 0.0:
        return Eigenfunction(operator=op, k=0.0, inner=inn, outer=None,
                             a_conn=None, c_match=c_match)
    cut = c_match / k
    weyl = weyl_solution(op, profile, k, r_eval=min(cut, r_low or cut))
    a = connection_wronskian(inn, weyl, cut)
    return Eigenfunction(operator=op, k=float(k), inner=inn, outer=weyl,
                         a_conn=complex(a), c_match=c_match)


def phi_global(op, basis, profile, r, k, c_match=DEFAULT_C_MATCH):
    """(value, derivative) of Phi(r, k^2); convenience wrapper."""
    return eigenfunction(op, basis, profile, k, c_match=c_match).eval(r)
