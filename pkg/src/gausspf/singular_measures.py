"""Singular invariant measures of the Gauss map ``x -> {1/x}_1``.

Continued fractions, the Minkowski question-mark function through its Salem
series, Markov cylinder measures, and the discrete invariant measures
carried by periodic orbits.  Periodic orbits are found algebraically: the
point with purely periodic expansion ``[0; a1, ..., ak, a1, ...]`` is the
root in ``(0, 1)`` of the integer quadratic ``C x^2 + (D - A) x - B = 0``
where ``[[A, B], [C, D]]`` is the product of the matrices ``[[0, 1], [1, a]]``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

_RATIONAL_EPS = 1e-14


def gauss_map(x):
    """``{1/x}_1`` with ``0 -> 0``."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0, 1.0, x)
    out = np.where(x == 0, 0.0, 1.0 / safe - np.floor(1.0 / safe))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuedFractionExpansion:
    """``x = [0; a1, a2, ...]``; ``terminated`` when the expansion ended (rational input)."""

    partial_quotients: tuple
    terminated: bool

    def __post_init__(self):
        if any(int(a) != a or a < 1 for a in self.partial_quotients):
            raise ValueError("partial quotients must be positive integers")

    def __len__(self):
        return len(self.partial_quotients)

    def value(self) -> float:
        """Value of the (finite) expansion, evaluated from the back."""
        t = 0.0
        for a in reversed(self.partial_quotients):
            t = 1.0 / (a + t)
        return t

    def convergents(self) -> list[Fraction]:
        """``p_n/q_n = [0; a1, ..., an]``, from ``p_-1/q_-1 = 1/0`` and ``p_0/q_0 = 0/1``."""
        p0, q0, p1, q1 = 1, 0, 0, 1
        out = []
        for a in self.partial_quotients:
            p0, p1 = p1, a * p1 + p0
            q0, q1 = q1, a * q1 + q0
            out.append(Fraction(p1, q1))
        return out


def cf_expand(x, depth: int = 40) -> ContinuedFractionExpansion:
    """Continued fraction quotients of ``x`` in ``(0, 1)`` by iterating the Gauss map.

    ``Fraction`` input is expanded exactly.  Float input stops when the
    remainder drops below ``1e-14`` (a rational up to rounding) or after
    ``depth`` quotients.
    """
    if isinstance(x, Fraction):
        if not 0 < x < 1:
            raise ValueError("x must lie in (0, 1)")
        qs = []
        r = x
        while r != 0 and len(qs) < depth:
            inv = 1 / r
            a = inv.numerator // inv.denominator
            qs.append(int(a))
            r = inv - a
        return ContinuedFractionExpansion(tuple(qs), r == 0)
    x = float(x)
    if not 0.0 < x < 1.0:
        raise ValueError("x must lie in (0, 1)")
    qs = []
    r = x
    while len(qs) < depth:
        inv = 1.0 / r
        a = math.floor(inv)
        r = inv - a
        if r > 1.0 - _RATIONAL_EPS:  # rounding just below an integer
            a, r = a + 1, 0.0
        qs.append(int(a))
        if r < _RATIONAL_EPS:
            return ContinuedFractionExpansion(tuple(qs), True)
    return ContinuedFractionExpansion(tuple(qs), False)


# ---------------------------------------------------------------------------
# Minkowski question mark
# ---------------------------------------------------------------------------

def minkowski_q(x, depth: int = 60) -> float:
    """Minkowski ``?(x)`` from the Salem series ``2 sum_j (-1)^(j+1) 2^-(a1+...+aj)``.

    The omitted terms are bounded by ``2 * 2^-(a1+...+a_depth)``.
    """
    if isinstance(x, Fraction):
        if x in (0, 1):
            return float(x)
    else:
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise ValueError("x must lie in [0, 1]")
        if x == 0.0 or x == 1.0:
            return x
    cf = cf_expand(x, depth)
    total = 0.0
    s = 0
    for j, a in enumerate(cf.partial_quotients, start=1):
        s += a
        total += (2.0 if j % 2 else -2.0) * 2.0 ** (-s)
    return total


def minkowski_q_tail(x, depth: int = 60) -> float:
    """Bound on the Salem terms beyond ``depth``."""
    cf = cf_expand(x, depth)
    return 0.0 if cf.terminated else 2.0 * 2.0 ** (-sum(cf.partial_quotients))


def minkowski_invariance_residual(t: float, K: int = 40) -> float:
    """``|sum_{k<=K} [?(1/k) - ?(1/(k+t))] - ?(t)|``.

    The preimage of ``[0, t]`` under the Gauss map is the union of
    ``[1/(k+t), 1/k]``; invariance of the Minkowski measure makes the full
    sum equal ``?(t)``.  The omitted terms total at most ``?(1/(K+1)) = 2^-K``.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie in (0, 1)")
    s = sum(minkowski_q(1.0 / k) - minkowski_q(1.0 / (k + t)) for k in range(1, int(K) + 1))
    return abs(s - minkowski_q(t))


def minkowski_table(xs: Iterable[float], path=None) -> list[tuple[float, float]]:
    rows = [(float(x), minkowski_q(x)) for x in xs]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "q"])
            w.writerows([(repr(a), repr(b)) for a, b in rows])
    return rows


# ---------------------------------------------------------------------------
# Markov cylinder measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkovWeights:
    """Digit weights ``q(j)``, ``j >= 1``, summing to one.

    ``values[j-1] = q(j)`` for ``j <= len(values)``; ``tail`` is the mass of
    the digits beyond, so that ``sum(values) + tail = 1``.
    """

    values: np.ndarray
    tail: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if np.any(v < 0) or np.any(v >= 1):
            raise ValueError("weights must lie in [0, 1)")
        if abs(v.sum() + self.tail - 1.0) > 1e-12:
            raise ValueError("weights and tail must sum to 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def minkowski(cls, n_digits: int = 60) -> "MarkovWeights":
        """``q(j) = 2^-j``, the digit law of the Minkowski measure."""
        v = 2.0 ** -np.arange(1, n_digits + 1)
        return cls(v, 2.0 ** -n_digits)

    @classmethod
    def from_function(cls, q: Callable[[int], float], n_digits: int, tail: float
                      ) -> "MarkovWeights":
        return cls(np.array([q(j) for j in range(1, n_digits + 1)]), tail)

    def __call__(self, j: int) -> float:
        if j < 1:
            raise ValueError("digits are positive")
        if j > self.values.size:
            raise ValueError(f"digit {j} beyond the stored range ({self.values.size})")
        return float(self.values[j - 1])


def markov_cylinder_mass(weights: MarkovWeights, digits: Sequence[int]) -> float:
    """Mass ``prod_j q(b_j)`` of the cylinder ``[b1, ..., bk]`` (1 for the empty word)."""
    return float(np.prod([weights(int(b)) for b in digits])) if len(digits) else 1.0


def cylinder_interval(digits: Sequence[int]) -> tuple[Fraction, Fraction]:
    """Endpoints of ``{x : a1(x) = b1, ..., ak(x) = bk}`` as exact fractions."""
    if not digits:
        return Fraction(0), Fraction(1)
    ends = []
    for t in (Fraction(0), Fraction(1)):
        for b in reversed(digits):
            t = 1 / (b + t)
        ends.append(t)
    return min(ends), max(ends)


def minkowski_cylinder_mass(digits: Sequence[int]) -> float:
    """Minkowski mass of a cylinder through ``?`` at its rational endpoints."""
    lo, hi = cylinder_interval(digits)
    return minkowski_q(hi) - minkowski_q(lo)


# ---------------------------------------------------------------------------
# periodic orbits
# ---------------------------------------------------------------------------

def _word_matrix(word: Sequence[int]) -> tuple[int, int, int, int]:
    A, B, C, D = 1, 0, 0, 1
    for a in word:
        # right-multiply by [[0, 1], [1, a]]
        A, B, C, D = B, A + a * B, D, C + a * D
    return A, B, C, D


def word_quadratic(word: Sequence[int]) -> tuple[int, int, int]:
    """Integer coefficients ``(p, q, r)`` of ``p x^2 + q x + r = 0`` for the purely
    periodic expansion with period ``word``."""
    A, B, C, D = _word_matrix(word)
    return C, D - A, -B


def periodic_point(word: Sequence[int]) -> float:
    """Root in ``(0, 1)`` of :func:`word_quadratic`, in a cancellation-free form."""
    p, q, r = word_quadratic(word)
    disc = q * q - 4 * p * r
    # root = (-q + sqrt(disc)) / (2p) = -2r / (q + sqrt(disc))
    return (-2.0 * r) / (q + math.sqrt(disc))


def _is_primitive(word: tuple) -> bool:
    k = len(word)
    return all(word != word[d:] + word[:d] for d in range(1, k) if k % d == 0)


def _canonical(word: tuple) -> tuple:
    return min(word[i:] + word[:i] for i in range(len(word)))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite atomic measure ``sum_i w_i delta_{x_i}``."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, g: Callable) -> complex:
        return np.sum(self.weights * g(self.points))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class DiscretePeriodicMeasure(DiscreteMeasure):
    """Uniform measure on a periodic orbit of the Gauss map.

    ``word`` is the canonical (lexicographically least) rotation of the
    period; ``orbit[i]`` has period word ``word[i:] + word[:i]``, so the
    Gauss map sends ``orbit[i]`` to ``orbit[i + 1]``.
    """

    word: tuple = ()
    quadratics: tuple = field(default=(), repr=False)

    @property
    def base_point(self) -> float:
        return float(self.points[0])

    @property
    def period(self) -> int:
        return len(self.word)

    @property
    def orbit(self) -> np.ndarray:
        return self.points

    @classmethod
    def from_word(cls, word: Sequence[int]) -> "DiscretePeriodicMeasure":
        word = tuple(int(a) for a in word)
        if not word or min(word) < 1:
            raise ValueError("word must be a nonempty sequence of positive integers")
        if not _is_primitive(word):
            raise ValueError(f"word {word} is a power of a shorter word")
        word = _canonical(word)
        k = len(word)
        rots = [word[i:] + word[:i] for i in range(k)]
        pts = np.array([periodic_point(r) for r in rots])
        quads = tuple(word_quadratic(r) for r in rots)
        return cls(pts, np.full(k, 1.0 / k), word, quads)

    def closure_residual(self) -> float:
        """``|theta^k(a) - a|`` computed by iterating the map in floating point."""
        x = self.base_point
        for _ in range(self.period):
            x = gauss_map(x)
        return abs(x - self.base_point)

    def quadratic_residual(self) -> float:
        """Largest ``|p x^2 + q x + r|`` over the orbit."""
        return max(abs(p * x * x + q * x + r) for (p, q, r), x in zip(self.quadratics, self.points))

    def describe(self) -> dict:
        return {"word": list(self.word), "base_point": self.base_point,
                "period": self.period, "quadratic": list(self.quadratics[0])}


def periodic_points(k_max: int, quotient_max: int) -> list[DiscretePeriodicMeasure]:
    """All periodic-orbit measures with minimal period ``<= k_max`` and quotients
    ``<= quotient_max``, one per orbit (cyclic rotations identified)."""
    if k_max < 1 or quotient_max < 1:
        raise ValueError("k_max and quotient_max must be positive")
    out = []
    for k in range(1, k_max + 1):
        for word in itertools.product(range(1, quotient_max + 1), repeat=k):
            if word == _canonical(word) and _is_primitive(word):
                out.append(DiscretePeriodicMeasure.from_word(word))
    return out


def mix(measures: Sequence[DiscreteMeasure], coefficients: Sequence[float]) -> DiscreteMeasure:
    """``sum_i xi_i mu_i`` as one atomic measure."""
    if len(measures) != len(coefficients):
        raise ValueError("one coefficient per measure")
    pts = np.concatenate([m.points for m in measures])
    w = np.concatenate([c * m.weights for m, c in zip(measures, coefficients)])
    return DiscreteMeasure(pts, w)


def invariance_check(measure: DiscreteMeasure, g: Callable) -> float:
    """``|int g o theta d mu - int g d mu|`` as finite sums."""
    return float(abs(measure.integrate(lambda x: g(gauss_map(x))) - measure.integrate(g)))


TEST_FUNCTIONS: tuple = (
    lambda x: np.ones_like(x),
    lambda x: x,
    lambda x: x**2,
    lambda x: np.sqrt(x),
    lambda x: np.exp(2j * np.pi * x),
    lambda x: np.exp(-6j * np.pi * x),
    lambda x: np.cos(7 * x),
    lambda x: 1.0 / (1.0 + x),
    lambda x: np.log1p(x),
    lambda x: np.where(x < 0.5, 1.0, 0.0),
)


def orbit_listing(measures: Sequence[DiscretePeriodicMeasure], path=None) -> list[dict]:
    rows = [m.describe() for m in measures]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["word", "period", "base_point", "p", "q", "r"])
            for r in rows:
                w.writerow(["-".join(map(str, r["word"])), r["period"], repr(r["base_point"]),
                            *r["quadratic"]])
    return rows


__all__ = [
    "gauss_map", "ContinuedFractionExpansion", "cf_expand", "minkowski_q",
    "minkowski_q_tail", "minkowski_invariance_residual", "minkowski_table",
    "MarkovWeights", "markov_cylinder_mass", "cylinder_interval", "minkowski_cylinder_mass",
    "word_quadratic", "periodic_point", "DiscreteMeasure", "DiscretePeriodicMeasure",
    "periodic_points", "mix", "invariance_check", "TEST_FUNCTIONS", "orbit_listing",
]
