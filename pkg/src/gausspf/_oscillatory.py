"""Closed-form oscillatory integrals used by the Fourier verifiers.

Everything here is exact up to rounding:

* ``exp_integral``: integral of ``exp(i k x)`` over ``[lo, hi]``;
* ``inv_square_exp``: integral of ``exp(i k y) / (y + a)^2`` over an interval
  not containing ``-a``, possibly unbounded, through the antiderivative
  ``A(t) = -exp(i k t)/t + i k (Ci(|k t|) + i Si(k t))``;
* ``inv_power_tail``: integrals of ``exp(i k y) y^-p`` over ``[Y, inf)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import sici


def exp_integral(kappa: float, lo, hi):
    """``int_lo^hi exp(i kappa x) dx``, vectorised over the bounds."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if kappa == 0.0:
        return (hi - lo).astype(complex)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return np.exp(1j * kappa * mid) * (2.0 * np.sin(kappa * half) / kappa)


def inv_square_antiderivative(kappa: float, t):
    """Antiderivative of ``exp(i kappa t) / t^2`` on either half-line.

    Finite ``t`` must be nonzero; ``t = +-inf`` returns the limits
    ``-|kappa| pi/2`` and ``+|kappa| pi/2``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty(t.shape, dtype=complex)
    fin = np.isfinite(t)
    if np.any(t[fin] == 0.0):
        raise ValueError("the antiderivative is singular at 0")
    tf = t[fin]
    if kappa == 0.0:
        out[fin] = -1.0 / tf
        out[~fin] = 0.0
        return out
    si, ci = sici(np.abs(kappa * tf))
    si = np.sign(kappa * tf) * si
    out[fin] = -np.exp(1j * kappa * tf) / tf + 1j * kappa * (ci + 1j * si)
    out[~fin] = -np.sign(t[~fin]) * abs(kappa) * math.pi / 2
    return out


def inv_square_exp(kappa: float, a, lo, hi):
    """``int_lo^hi exp(i kappa y) / (y + a)^2 dy`` with ``-a`` outside ``[lo, hi]``.

    ``lo`` and ``hi`` may be infinite.  Vectorised over ``a``, ``lo``, ``hi``.
    """
    a = np.asarray(a, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    t0 = lo + a
    t1 = hi + a
    diff = inv_square_antiderivative(kappa, t1) - inv_square_antiderivative(kappa, t0)
    return np.exp(-1j * kappa * a) * diff


def inv_power_tail(kappa: float, Y: float, p_max: int) -> np.ndarray:
    """``E_p = int_Y^inf exp(i kappa y) y^-p dy`` for ``p = 2..p_max`` (``Y > 0``).

    For ``|kappa| Y <= 10`` the upward recursion
    ``E_p = exp(i kappa Y) Y^(1-p)/(p-1) + i kappa E_{p-1}/(p-1)`` is used,
    started from the closed form of ``E_2``.  Beyond that the recursion
    amplifies rounding by ``(kappa Y)^p / p!``, so the contour is turned to
    ``y = Y + i t/kappa`` where the integrand decays like ``exp(-t)`` and
    Gauss-Laguerre is exact to rounding.  Index ``p`` of the result holds
    ``E_p`` (entries 0 and 1 are unused).
    """
    if Y <= 0:
        raise ValueError("Y must be positive")
    out = np.zeros(p_max + 1, dtype=complex)
    ph = complex(np.exp(1j * kappa * Y))
    if abs(kappa) * Y > 10.0:
        t, w = _LAGUERRE
        z = Y + 1j * t / kappa
        for p in range(2, p_max + 1):
            out[p] = (1j / kappa) * ph * np.sum(w * z ** (-p))
        return out
    out[2] = complex(inv_square_exp(kappa, 0.0, Y, math.inf))
    for p in range(3, p_max + 1):
        out[p] = ph * Y ** (1 - p) / (p - 1) + 1j * kappa * out[p - 1] / (p - 1)
    return out


_LAGUERRE = np.polynomial.laguerre.laggauss(80)


def poly_exp_moments(kappa: float, lo: float, hi: float, m_max: int) -> np.ndarray:
    """``int_lo^hi u^m exp(i kappa u) du`` for ``m = 0..m_max`` by Gauss-Legendre.

    The integrand is entire; the node count is chosen so that the rule is
    exact to rounding for ``|kappa (hi - lo)|`` up to a few hundred.
    """
    width = hi - lo
    n_nodes = int(min(400, 40 + abs(kappa) * width))
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    u = 0.5 * (lo + hi) + 0.5 * width * x
    e = np.exp(1j * kappa * u) * w * 0.5 * width
    return np.array([np.sum(u**m * e) for m in range(m_max + 1)])
