"""Fourier transforms of measures on the hyperbola and the Klein-Gordon wave.

A density ``f`` on the line is lifted to the hyperbola ``{(v, 1/v)}``; its
Fourier transform is

    mu_hat(x1, x2) = int f(v) exp(i pi (x1 v + x2 / v)) dv.

On the axes ``x2 = 0`` and ``x1 = 0`` this is one of the two Fourier
families handled exactly by :mod:`gausspf.annihilator`; those points go
through the same exact integrator.  At general points the integral is split:

* the resolved band ``1/V <= |v| <= V`` by fixed-node composite
  Gauss-Legendre, giving ``sum_k c_k exp(i pi (x1 v_k + x2 / v_k))``;
* ``|v| > V`` and ``|v| < 1/V`` by closed-form tails in which the density is
  frozen at its limiting behaviour (``F(0) P / v^2`` in the far field, the
  local average near 0).

Every term ``exp(i pi (x1 v + x2/v))`` with ``x1 = (t + x)/2`` and
``x2 = (t - x)/2`` solves ``(d_t^2 - d_x^2 + pi^2) psi = 0``, so
``psi(t, x) = mu_hat((t+x)/2, (t-x)/2)`` is a Klein-Gordon wave.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._oscillatory import inv_power_tail
from .annihilator import (CellFunction, FarField, PartitionedFunction,
                          near_integral_exp, near_integral_exp_inv)

_TAIL_TERMS = 16
_GL = {n: np.polynomial.legendre.leggauss(n) for n in range(2, 65)}


@dataclass(frozen=True)
class HyperbolaMeasure:
    """``f(v) dv`` carried to the hyperbola by ``v -> (v, 1/v)``.

    ``band`` is the radius ``V`` of the resolved band ``1/V <= |v| <= V``
    used at general frequencies.  ``branch`` is ``"full"`` for two-sided
    densities and ``"positive"`` for half-line ones.
    """

    density: PartitionedFunction
    band: float = 100.0

    def __post_init__(self):
        if not self.band > max(1.0, self.density.parameter):
            raise ValueError("band radius must exceed the far-field radius")

    @property
    def branch(self) -> str:
        return "full" if self.density.spec.is_two_sided else "positive"

    @property
    def near(self) -> CellFunction:
        return self.density.near()

    @property
    def far(self) -> FarField:
        return self.density.f3


@dataclass(frozen=True)
class LatticeCross:
    """``(alpha Z x {0}) U ({0} x beta Z)`` truncated to ``|n| <= n_max``.

    The rotated cross (where ``psi`` vanishes) consists of ``(n alpha, n alpha)``
    and ``(n beta, -n beta)`` in ``(t, x)`` coordinates.
    """

    alpha: float
    beta: float
    n_max: int = 10

    @property
    def product(self) -> float:
        return self.alpha * self.beta

    def points(self) -> list[tuple[float, float]]:
        ns = range(-self.n_max, self.n_max + 1)
        pts = [(n * self.alpha, 0.0) for n in ns]
        pts += [(0.0, n * self.beta) for n in ns if n != 0]
        return pts

    def rotated_points(self) -> list[tuple[float, float]]:
        ns = range(-self.n_max, self.n_max + 1)
        pts = [(n * self.alpha, n * self.alpha) for n in ns]
        pts += [(n * self.beta, -n * self.beta) for n in ns if n != 0]
        return pts


# ---------------------------------------------------------------------------
# quadrature representation
# ---------------------------------------------------------------------------

@dataclass
class WaveQuadrature:
    """``mu_hat`` near a frequency point as nodes plus closed-form tails.

    ``v`` and ``c`` give the resolved band as ``sum c_k exp(i pi (x1 v_k + x2/v_k))``.
    ``far_limits`` are ``F(0+), F(0-)`` (far field ``~ F(0+-) P / v^2``) and
    ``zero_means`` the averages of ``f`` on ``(0, 1/V)`` and ``(-1/V, 0)``.
    """

    v: np.ndarray
    c: np.ndarray
    band: float
    parameter: float
    far_limits: tuple
    zero_means: tuple
    two_sided: bool
    tail_mass: float = field(default=0.0)

    def band_value(self, x1, x2) -> complex:
        return complex(np.sum(self.c * np.exp(1j * np.pi * (x1 * self.v + x2 / self.v))))

    def tail_value(self, x1, x2) -> complex:
        V, P = self.band, self.parameter
        m = np.arange(_TAIL_TERMS + 1)
        fact = np.array([math.factorial(k) for k in m], dtype=float)
        total = 0j
        Fp, Fm = self.far_limits
        zp, zm = self.zero_means
        sides = (1, -1) if self.two_sided else (1,)
        for s in sides:
            Fs = Fp if s > 0 else Fm
            zs = zp if s > 0 else zm
            if Fs != 0:
                E = inv_power_tail(s * math.pi * x1, V, _TAIL_TERMS + 2)[2:]
                total += Fs * P * np.sum((s * 1j * math.pi * x2) ** m / fact * E)
            if zs != 0:
                E = inv_power_tail(s * math.pi * x2, V, _TAIL_TERMS + 2)[2:]
                total += zs * np.sum((s * 1j * math.pi * x1) ** m / fact * E)
        return complex(total)

    def value(self, x1, x2) -> complex:
        return self.band_value(x1, x2) + self.tail_value(x1, x2)


def _nodes_on(lo: np.ndarray, hi: np.ndarray, rate: np.ndarray):
    """Gauss-Legendre nodes on each ``[lo_i, hi_i]``; the count grows with the
    phase change ``rate_i * (hi_i - lo_i)`` across the interval."""
    phase = rate * (hi - lo)
    n = np.clip(np.ceil(0.6 * phase).astype(int) + 4, 4, 64)
    xs, ws, owner = [], [], []
    for k in np.unique(n):
        sel = np.nonzero(n == k)[0]
        t, w = _GL[int(k)]
        mid = 0.5 * (lo[sel] + hi[sel])[:, None]
        half = 0.5 * (hi[sel] - lo[sel])[:, None]
        xs.append((mid + half * t[None, :]).ravel())
        ws.append((half * w[None, :]).ravel())
        owner.append(np.repeat(sel, k))
    return np.concatenate(xs), np.concatenate(ws), np.concatenate(owner)


def _split_long(lo, hi, rate, max_phase=40.0):
    """Cut intervals so that each carries at most ``max_phase`` radians."""
    pieces = np.maximum(1, np.ceil(rate * (hi - lo) / max_phase).astype(int))
    if np.all(pieces == 1):
        return lo, hi
    rep = np.repeat(np.arange(lo.size), pieces)
    k = np.arange(rep.size) - np.repeat(np.cumsum(pieces) - pieces, pieces)
    step = (hi - lo)[rep] / pieces[rep]
    return lo[rep] + k * step, lo[rep] + (k + 1) * step


def wave_quadrature(m: HyperbolaMeasure, x1: float, x2: float) -> WaveQuadrature:
    """Node representation of ``mu_hat`` adapted to frequencies near ``(x1, x2)``."""
    V = m.band
    P = m.density.parameter
    two = m.density.spec.is_two_sided
    ax1 = math.pi * (abs(x1) + 0.5)
    ax2 = math.pi * (abs(x2) + 0.5)
    near = m.near
    # near cells, clipped to |v| >= 1/V
    lo = near.x0.copy()
    hi = near.x1.copy()
    pos = lo >= 0
    lo = np.where(pos, np.maximum(lo, 1.0 / V), lo)
    hi = np.where(pos, hi, np.minimum(hi, -1.0 / V))
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    vmin = np.minimum(np.abs(lo), np.abs(hi))
    rate = ax1 + ax2 / vmin**2
    lo, hi = _split_long(lo, hi, rate)
    cell_vals = near(0.5 * (lo + hi))
    vmin = np.minimum(np.abs(lo), np.abs(hi))
    xs, ws, own = _nodes_on(lo, hi, ax1 + ax2 / vmin**2)
    v_near, c_near = xs, ws * cell_vals[own]
    # far band P <= |y| <= V, geometric panels refined by phase
    sides = (1.0, -1.0) if two else (1.0,)
    v_far, c_far = [], []
    f3 = m.far
    if not f3.is_zero:
        edges = np.geomspace(P, V, 400)
        flo, fhi = edges[:-1], edges[1:]
        frate = ax1 + ax2 / flo**2
        flo, fhi = _split_long(flo, fhi, frate, max_phase=6.0)
        y, w, _ = _nodes_on(flo, fhi, ax1 + ax2 / flo**2)
        for s in sides:
            v_far.append(s * y)
            c_far.append(w * f3(s * y))
    v = np.concatenate([v_near] + v_far)
    c = np.concatenate([c_near] + c_far)
    # tails
    if f3.is_zero:
        far_lim = (0.0, 0.0)
    else:
        far_lim = tuple(complex(f3.u_form(np.array([s * 1e-12]))[0]) for s in (1.0, -1.0))
        far_lim = tuple(x.real if x.imag == 0 else x for x in far_lim)
    zp = V * near_mass(near, 0.0, 1.0 / V)
    zm = V * near_mass(near, -1.0 / V, 0.0) if two else 0.0
    tail_mass = (abs(far_lim[0]) + (abs(far_lim[1]) if two else 0.0)) * P / V \
        + (abs(zp) + abs(zm)) / V
    return WaveQuadrature(v, c, V, P, far_lim, (zp, zm), two, tail_mass)


def near_mass(h: CellFunction, a: float, b: float):
    """``int_a^b h`` for a piecewise-constant ``h``."""
    lo = np.maximum(h.x0, a)
    hi = np.minimum(h.x1, b)
    return np.sum(h.values * np.maximum(hi - lo, 0.0))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def mu_hat(m: HyperbolaMeasure, x1: float, x2: float) -> complex:
    """``int f(v) exp(i pi (x1 v + x2/v)) dv``.

    Axis points use the exact two-family integrator; general points use
    :func:`wave_quadrature`.
    """
    x1 = float(x1)
    x2 = float(x2)
    f = m.density
    if x2 == 0.0:
        return near_integral_exp(m.near, math.pi * x1) + (
            0j if f.f3.is_zero else f.f3.integral_exp(math.pi * x1))
    if x1 == 0.0:
        return near_integral_exp_inv(m.near, math.pi * x2) + (
            0j if f.f3.is_zero else f.f3.integral_exp_inv(math.pi * x2 / f.parameter))
    return wave_quadrature(m, x1, x2).value(x1, x2)


def psi_wave(m: HyperbolaMeasure, t: float, x: float) -> complex:
    """``psi(t, x) = mu_hat((t + x)/2, (t - x)/2)``."""
    return mu_hat(m, 0.5 * (t + x), 0.5 * (t - x))


def _one_minus_sinc(a):
    a = np.asarray(a, dtype=float)
    small = np.abs(a) < 1e-2
    a2 = a * a
    series = a2 / 6 * (1 - a2 / 20 * (1 - a2 / 42 * (1 - a2 / 72)))
    safe = np.where(small, 1.0, a)
    return np.where(small, series, 1 - np.sin(safe) / safe)


def _sinc(a):
    return 1.0 - _one_minus_sinc(a)


@dataclass(frozen=True)
class KGResidual:
    """Centred-difference Klein-Gordon residual of ``psi`` at ``(t, x)``.

    ``value`` is the residual of the resolved band (``sum_k c_k`` times the
    stencil symbol of each plane wave).  ``tail_size`` bounds the modulus of
    the closed-form tails, which hold frequencies the stencil cannot resolve
    and are excluded from ``value``.
    """

    value: complex
    h: float
    tail_size: float


def kg_residual(m: HyperbolaMeasure, t: float, x: float, h: float = 1e-3,
                quadrature: WaveQuadrature | None = None) -> KGResidual:
    """``(D_t^2 - D_x^2 + pi^2) psi`` with centred second differences of step ``h``.

    For a plane wave ``exp(i (w t + k x))`` with ``w^2 - k^2 = pi^2`` the
    stencil returns ``pi^2 (1 - sinc(a) sinc(b))`` times the wave, where
    ``a = pi v h / 2`` and ``b = pi h / (2 v)``; the residual of the band
    is summed with this symbol, which is algebraically identical to
    differencing the band sum and avoids the ``1/h^2`` rounding blow-up.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    x1, x2 = 0.5 * (t + x), 0.5 * (t - x)
    q = quadrature or wave_quadrature(m, x1, x2)
    a = 0.5 * math.pi * q.v * h
    b = 0.5 * math.pi * h / q.v
    symbol = math.pi**2 * (_one_minus_sinc(a) + _sinc(a) * _one_minus_sinc(b))
    waves = np.exp(1j * np.pi * (x1 * q.v + x2 / q.v))
    return KGResidual(complex(np.sum(q.c * symbol * waves)), h, q.tail_mass)


@dataclass(frozen=True)
class RichardsonLadder:
    t: float
    x: float
    residuals: tuple

    @property
    def ratios(self) -> tuple:
        r = [abs(z) for z in self.residuals]
        return tuple(r[i] / r[i + 1] for i in range(len(r) - 1))


def kg_ladder(m: HyperbolaMeasure, t: float, x: float, h: float = 1e-3, levels: int = 3
              ) -> RichardsonLadder:
    """Residuals at ``h, h/2, h/4, ...`` on a common quadrature."""
    q = wave_quadrature(m, 0.5 * (t + x), 0.5 * (t - x))
    res = tuple(kg_residual(m, t, x, h / 2**k, q).value for k in range(levels))
    return RichardsonLadder(t, x, res)


def lattice_report(m: HyperbolaMeasure, cross: LatticeCross) -> list[dict]:
    """``psi`` on the rotated lattice cross."""
    out = []
    for t, x in cross.rotated_points():
        z = psi_wave(m, t, x)
        out.append({"t": t, "x": x, "psi": z, "abs": abs(z)})
    return out


def scan_grid(m: HyperbolaMeasure, ts: Sequence[float], xs: Sequence[float], path=None):
    """``psi`` on a tensor grid; optionally written as CSV ``t, x, re, im``."""
    rows = []
    for t in ts:
        for x in xs:
            z = psi_wave(m, t, x)
            rows.append((float(t), float(x), z.real, z.imag))
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "re_psi", "im_psi"])
            w.writerows([tuple(repr(v) for v in r) for r in rows])
    return rows


# ---------------------------------------------------------------------------
# Dirac coupling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaledFarField:
    """Far field ``m(y) f3(y)`` with ``m(y) = (1 + y)/(1 - y) = -1 - 2/(y - 1)``.

    The ``-f3`` part is integrated exactly by :class:`FarField`; the
    remainder ``-2 f3/(y - 1)`` decays like ``y^-3`` and is integrated in
    ``u = P/y`` by Gauss-Legendre on ``u_cut <= |u| <= 1``, where the
    integrand is ``-2 F(u) u/(P - u)``.  ``u_cut`` bounds the neglected part
    by ``sup|F| u_cut^2 / P`` per side.
    """

    base: FarField
    u_cut: float = 1e-2
    j_trunc: int = 200

    @property
    def parameter(self) -> float:
        return self.base.parameter

    @property
    def is_zero(self) -> bool:
        return self.base.is_zero

    @property
    def shape(self):
        return self.base.shape

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return (1 + y) / (1 - y) * self.base(y)

    def _remainder(self, phase_fn, n_panels=200):
        P = self.parameter
        t, w = _GL[16]
        sides = (1.0, -1.0) if self.base.two_sided else (1.0,)
        total = 0j
        edges = np.geomspace(self.u_cut, 1.0, n_panels + 1)
        for s in sides:
            lo, hi = edges[:-1], edges[1:]
            rate = np.abs(phase_fn(1.0)) / lo**2 + 1.0
            lo, hi = _split_long(lo, hi, rate, max_phase=4.0)
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            u = (mid[:, None] + half[:, None] * t[None, :]).ravel() * s
            ww = (half[:, None] * w[None, :]).ravel()
            F = self.base.u_form(u, j_trunc=self.j_trunc)
            total += np.sum(ww * F * (-2 * u / (P - u)) * np.exp(1j * phase_fn(u)))
        return total

    def integral_exp(self, kappa: float) -> complex:
        P = self.parameter
        return -self.base.integral_exp(kappa) + self._remainder(lambda u: kappa * P / u)

    def integral_exp_inv(self, kappa: float) -> complex:
        return -self.base.integral_exp_inv(kappa) + self._remainder(lambda u: kappa * u)

    def neglected_bound(self) -> float:
        P = self.parameter
        sup_F = self.base.decay_constant() / P
        sides = 2 if self.base.two_sided else 1
        return sides * sup_F * self.u_cut**2 / P


@dataclass(frozen=True)
class DiracPair:
    """``f2 = (1 + v)/(1 - v) f1`` outside the window ``(1 - eps, 1 + eps)``.

    ``excluded_mass`` is ``int |f1|`` over the (cell-aligned) window, and
    ``near`` the product on the grid cells (cell averages of the multiplier
    times the cell value).
    """

    source: PartitionedFunction
    near: CellFunction
    far: ScaledFarField
    epsilon: float
    window: tuple
    excluded_mass: float

    @property
    def parameter(self) -> float:
        return self.source.parameter

    @property
    def spec(self):
        return self.source.spec


def _multiplier_integral(lo, hi):
    """``int (1 + v)/(1 - v) dv = -v - 2 log|1 - v|`` between bounds on one side of 1."""
    def prim(v):
        return -v - 2.0 * np.log(np.abs(1.0 - v))
    return prim(hi) - prim(lo)


def dirac_pair(f1: PartitionedFunction, epsilon: float = 1e-3,
               max_excluded: float = 0.05) -> DiracPair:
    """Multiply ``f1`` by ``(1 + v)/(1 - v)``, cutting a window around the pole.

    The window is widened to whole grid cells.  Raises when the mass of
    ``f1`` inside the window exceeds ``max_excluded`` times its near-field
    mass, i.e. when ``f1`` does not decay near 1 fast enough for ``epsilon``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    near = f1.near()
    in_win = (near.x1 > 1 - epsilon) & (near.x0 < 1 + epsilon)
    if f1.parameter <= 1 + epsilon:
        raise ValueError("window reaches the far field")
    win = (float(near.x0[in_win].min()), float(near.x1[in_win].max())) if np.any(in_win) \
        else (1 - epsilon, 1 + epsilon)
    excluded = float(np.sum(np.abs(near.values[in_win]) * (near.x1 - near.x0)[in_win]))
    scale = near.l1_norm()
    if scale > 0 and excluded > max_excluded * scale:
        raise ValueError(f"f1 carries {excluded:.3e} of mass in the window; "
                         "it does not decay near v = 1 for this epsilon")
    x0, x1 = near.x0[~in_win], near.x1[~in_win]
    avg = _multiplier_integral(x0, x1) / (x1 - x0)
    vals = near.values[~in_win] * avg
    prod = CellFunction(x0, x1, vals)
    return DiracPair(f1, prod, ScaledFarField(f1.f3), float(epsilon), win, excluded)


def dirac_report(pair: DiracPair, n_max: int = 5) -> dict:
    """Both Fourier families of the Dirac partner (measured, not asserted)."""
    P = pair.parameter
    ns = np.arange(-n_max, n_max + 1)
    fx, finv = [], []
    for n in ns:
        k = math.pi * n
        fx.append(near_integral_exp(pair.near, k) + pair.far.integral_exp(k))
        finv.append(near_integral_exp_inv(pair.near, k * P) + pair.far.integral_exp_inv(k))
    return {"ns": ns, "family_x": np.array(fx), "family_inv": np.array(finv),
            "max_abs": float(max(np.max(np.abs(fx)), np.max(np.abs(finv)))),
            "excluded_mass": pair.excluded_mass, "far_neglected": pair.far.neglected_bound()}


__all__ = [
    "HyperbolaMeasure", "LatticeCross", "WaveQuadrature", "wave_quadrature", "mu_hat",
    "psi_wave", "KGResidual", "kg_residual", "RichardsonLadder", "kg_ladder",
    "lattice_report", "scan_grid", "DiracPair", "ScaledFarField", "dirac_pair",
    "dirac_report", "near_mass",
]
