"""Explicit invariant densities and a series check of their invariance.

Four families are known in closed form:

* odd integer ``beta >= 3``: ``c / (1 - (x/beta)^2)`` on ``[-1, 1]``;
* ``beta = 3/2``: ``1/(1 - (2x/3)^2)`` on ``|x| <= 1/2`` and
  ``(3/4) / ((1 - |x|/3)(1 + 2|x|/3))`` on ``1/2 < |x| <= 1``, times ``c0``;
* integer ``gamma >= 1`` (one-sided map): ``c / (1 + x/gamma)`` on ``[0, 1]``;
* ``beta = 1``: ``1 / (1 - x^2)``, which has infinite mass.

Normalising constants are computed from the exact integrals of the shapes.
The constants printed alongside the odd-``beta`` and ``beta = 3/2`` formulas
in the literature (``1/c = (beta/2) log((beta+1)/(beta-1))`` and
``1/c0 = (3/2) log(5/2)``) do not give mass one; they are kept as
``stated_normalizer`` for reference.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .core_maps import GaussMapSpec
from .transfer import apply_pf_exact

ODD_BETA = "odd_beta"
BETA_3_2 = "beta_3_2"
INTEGER_GAMMA = "integer_gamma"
TAU1_INFINITE = "tau1_infinite"


def _is_odd_integer(beta) -> bool:
    return float(beta).is_integer() and int(beta) % 2 == 1


def _odd_beta_shape(beta: float, x):
    return 1.0 / (1.0 - (np.asarray(x, dtype=float) / beta) ** 2)


def _beta_3_2_shape(x):
    ax = np.abs(np.asarray(x, dtype=float))
    inner = 1.0 / (1.0 - (2.0 * ax / 3.0) ** 2)
    outer = 0.75 / ((1.0 - ax / 3.0) * (1.0 + 2.0 * ax / 3.0))
    return np.where(ax <= 0.5, inner, outer)


def _integer_gamma_shape(gamma: float, x):
    return 1.0 / (1.0 + np.asarray(x, dtype=float) / gamma)


def odd_beta_normalizer(beta: float) -> float:
    """``c(beta)`` making ``c / (1 - (x/beta)^2)`` a probability density on ``[-1, 1]``.

    The shape integrates to ``beta * log((beta + 1)/(beta - 1))``.
    """
    return 1.0 / (beta * math.log((beta + 1.0) / (beta - 1.0)))


def beta_3_2_normalizer() -> float:
    """``c0`` for the ``beta = 3/2`` density; the shape integrates to ``(3/2) log(25/8)``.

    Inner part: ``(3/2) log 2``.  Outer part (both sides):
    ``(3/2) log(25/16)`` from the partial fractions
    ``(3/4)/((1 - t/3)(1 + 2t/3)) = (1/4)/(1 - t/3) + (1/2)/(1 + 2t/3)``.
    """
    return 1.0 / (1.5 * math.log(25.0 / 8.0))


def integer_gamma_normalizer(gamma: float) -> float:
    """``c(gamma)`` with ``1/c = gamma log(1 + 1/gamma)``."""
    return 1.0 / (gamma * math.log1p(1.0 / gamma))


@dataclass(frozen=True)
class ClosedFormDensity:
    """An explicit invariant density.

    ``normalizer`` multiplies the shape so that the total mass is one (it is
    1 for the infinite-mass ``tau1_infinite`` kind, which is not
    normalisable).  ``stated_normalizer`` is the constant printed next to the
    formula in the literature, which for two of the kinds does not give mass
    one.
    """

    kind: str
    parameter: float
    normalizer: float
    stated_normalizer: float

    def __post_init__(self):
        if self.kind not in (ODD_BETA, BETA_3_2, INTEGER_GAMMA, TAU1_INFINITE):
            raise ValueError(f"unknown density kind {self.kind!r}")

    # constructors ---------------------------------------------------------
    @classmethod
    def odd_beta(cls, beta: float) -> "ClosedFormDensity":
        if not (_is_odd_integer(beta) and beta >= 3):
            raise ValueError(f"beta must be an odd integer >= 3, got {beta}")
        beta = float(beta)
        stated = 1.0 / (0.5 * beta * math.log((beta + 1) / (beta - 1)))
        return cls(ODD_BETA, beta, odd_beta_normalizer(beta), stated)

    @classmethod
    def beta_3_2(cls) -> "ClosedFormDensity":
        return cls(BETA_3_2, 1.5, beta_3_2_normalizer(), 1.0 / (1.5 * math.log(2.5)))

    @classmethod
    def integer_gamma(cls, gamma: float) -> "ClosedFormDensity":
        if not (float(gamma).is_integer() and gamma >= 1):
            raise ValueError(f"gamma must be a positive integer, got {gamma}")
        c = integer_gamma_normalizer(float(gamma))
        return cls(INTEGER_GAMMA, float(gamma), c, c)

    @classmethod
    def tau1(cls) -> "ClosedFormDensity":
        return cls(TAU1_INFINITE, 1.0, 1.0, 1.0)

    # properties -----------------------------------------------------------
    @property
    def normalizable(self) -> bool:
        return self.kind != TAU1_INFINITE

    @property
    def spec(self) -> GaussMapSpec:
        if self.kind == INTEGER_GAMMA:
            return GaussMapSpec.one_sided(self.parameter)
        return GaussMapSpec.two_sided(self.parameter)

    @property
    def domain(self) -> tuple[float, float]:
        return self.spec.domain

    def shape(self, x):
        """Unnormalised formula."""
        if self.kind == ODD_BETA:
            return _odd_beta_shape(self.parameter, x)
        if self.kind == BETA_3_2:
            return _beta_3_2_shape(x)
        if self.kind == INTEGER_GAMMA:
            return _integer_gamma_shape(self.parameter, x)
        return 1.0 / (1.0 - np.asarray(x, dtype=float) ** 2)

    def __call__(self, x):
        """Density value; raises outside the domain (and at ``|x| = 1`` for ``beta = 1``)."""
        x = np.asarray(x, dtype=float)
        a, b = self.domain
        if np.any((x < a) | (x > b)):
            raise ValueError(f"x outside {self.domain}")
        if self.kind == TAU1_INFINITE and np.any(np.abs(x) >= 1.0):
            raise ValueError("the beta = 1 density is singular at |x| = 1")
        out = self.normalizer * self.shape(x)
        return out if out.ndim else float(out)

    def restricted(self) -> Callable:
        """Vectorised callable vanishing off the domain (for series evaluation)."""
        a, b = self.domain

        def fn(x):
            x = np.asarray(x, dtype=float)
            inside = (x >= a) & (x <= b)
            if self.kind == TAU1_INFINITE:
                inside &= np.abs(x) < 1.0
            safe = np.where(inside, x, 0.5 * (a + b))
            return np.where(inside, self.normalizer * self.shape(safe), 0.0)
        return fn

    def mass(self, eps: float = 0.0) -> float:
        """Integral over the domain (over ``[-1+eps, 1-eps]`` for the infinite kind)."""
        a, b = self.domain
        if self.kind == TAU1_INFINITE:
            if eps <= 0:
                return math.inf
            a, b = a + eps, b - eps
        pts = [-0.5, 0.5] if self.kind == BETA_3_2 else None
        val, _ = quad(lambda t: float(self.normalizer * self.shape(t)), a, b,
                      points=pts, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def sample(self, n: int = 201) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.domain
        if self.kind == TAU1_INFINITE:
            a, b = -0.99, 0.99
        xs = np.linspace(a, b, n)
        return xs, np.asarray(self(xs))

    def to_csv(self, path, n: int = 201) -> None:
        xs, ys = self.sample(n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "density"])
            for x, y in zip(xs, ys):
                w.writerow([repr(float(x)), repr(float(y))])


def density_odd_beta(beta: float, x):
    """``c(beta) / (1 - (x/beta)^2)`` for odd integer ``beta >= 3`` and ``|x| <= 1``."""
    return ClosedFormDensity.odd_beta(beta)(x)


def density_beta_3_2(x):
    """Invariant probability density of the map with ``beta = 3/2``.

    At ``|x| = 1/2`` the inner formula is used; the two pieces differ there
    (``9/8`` against ``27/40`` before normalisation).
    """
    return ClosedFormDensity.beta_3_2()(x)


def density_integer_gamma(gamma: float, x):
    """``c(gamma) / (1 + x/gamma)`` on ``[0, 1]`` for integer ``gamma >= 1``."""
    return ClosedFormDensity.integer_gamma(gamma)(x)


def density_tau1(x):
    """``1 / (1 - x^2)`` on ``|x| < 1``: invariant for ``beta = 1`` but of infinite mass."""
    return ClosedFormDensity.tau1()(x)


def sample_points(spec: GaussMapSpec, n_samples: int, limit: float | None = None) -> np.ndarray:
    """Deterministic interior sample points avoiding 0 and the cell-like seams.

    Irrational offsets keep the points off the branch endpoints and off
    the ``|x| = 1/2`` seam of the ``beta = 3/2`` density.
    """
    a, b = spec.domain
    if limit is not None:
        a, b = max(a, -limit), min(b, limit)
    t = (np.arange(n_samples) + (math.sqrt(5) - 1) / 2) / n_samples
    return a + (b - a) * t


def residual_invariance(spec: GaussMapSpec, density_fn, n_samples: int = 200,
                        j_trunc: int = 10_000, limit: float | None = None) -> float:
    """``max |P rho(x) - rho(x)|`` over sample points, by the branch series.

    ``density_fn`` is a :class:`ClosedFormDensity` (its spec must match) or a
    plain callable on the domain.  The formula, not a grid, is evaluated
    inside the series; the omitted branches are summed by the midpoint tail
    of :func:`apply_pf_exact`.  ``limit`` keeps the samples in
    ``|x| <= limit`` (needed for ``beta = 1``).
    """
    if isinstance(density_fn, ClosedFormDensity):
        if density_fn.spec != spec:
            raise ValueError(f"density is for {density_fn.spec.describe()}, not {spec.describe()}")
        fn = density_fn.restricted()
    else:
        fn = density_fn
    xs = sample_points(spec, n_samples, limit)
    pf = apply_pf_exact(spec, fn, xs, j_trunc).value
    return float(np.max(np.abs(pf - fn(xs))))


__all__ = [
    "ClosedFormDensity", "ODD_BETA", "BETA_3_2", "INTEGER_GAMMA", "TAU1_INFINITE",
    "density_odd_beta", "density_beta_3_2", "density_integer_gamma", "density_tau1",
    "odd_beta_normalizer", "beta_3_2_normalizer", "integer_gamma_normalizer",
    "residual_invariance", "sample_points",
]
