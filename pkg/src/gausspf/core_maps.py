"""Gauss-type interval maps and their branch structure.

Two families are covered:

* the two-sided map ``tau(x) = {-beta/x}_2`` on ``[-1, 1]``, where ``{t}_2`` is
  the representative of ``t`` modulo 2 in ``(-1, 1]``;
* the one-sided map ``theta(x) = {gamma/x}_1`` on ``[0, 1]``, where ``{t}_1`` is
  the ordinary fractional part in ``[0, 1)``.

Both send 0 to 0 by convention.  On each branch the map is a Moebius
transformation, so inverse branches and images of intervals are available in
closed form; everything downstream (transfer operators, covering times) builds
on that.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

LOGGER = logging.getLogger(__name__)

TWO_SIDED = "two-sided"
ONE_SIDED = "one-sided"

#: Gaps smaller than this between image intervals are treated as seams.
MERGE_GAP = 1e-14
DEFAULT_MAX_INDEX = 10_000


# ---------------------------------------------------------------------------
# fractional parts
# ---------------------------------------------------------------------------

def _check_finite(t):
    if not np.all(np.isfinite(t)):
        raise ValueError("fractional part of a non-finite number is undefined")


def frac_part_1(t):
    """Fractional part in ``[0, 1)`` with ``t - result`` an integer.

    Works on scalars and arrays.

    >>> frac_part_1(2.25), frac_part_1(-0.25)
    (0.25, 0.75)
    """
    arr = np.asarray(t, dtype=float)
    _check_finite(arr)
    out = arr - np.floor(arr)
    # a tiny negative input can round up to exactly 1.0
    out = np.where(out >= 1.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def frac_part_2(t):
    """Representative of ``t`` modulo 2 in the half-open interval ``(-1, 1]``.

    >>> frac_part_2(3.5), frac_part_2(1.0), frac_part_2(-1.0)
    (-0.5, 1.0, 1.0)
    """
    arr = np.asarray(t, dtype=float)
    _check_finite(arr)
    out = arr - 2.0 * np.ceil((arr - 1.0) / 2.0)
    out = np.where(out <= -1.0, out + 2.0, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# map specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussMapSpec:
    """A Gauss-type map: ``kind`` is ``"two-sided"`` or ``"one-sided"``.

    The two-sided map takes ``parameter = beta`` and lives on ``[-1, 1]``; the
    one-sided map takes ``parameter = gamma`` and lives on ``[0, 1]``.  The
    analysis (spectral gap, annihilators) needs ``beta > 1`` or ``gamma > 1``;
    the map itself is also constructed for ``beta = 1`` and ``gamma = 1``, which
    covers the classical Gauss map and the map with an indifferent fixed point.
    """

    kind: str
    parameter: float

    def __post_init__(self):
        if self.kind not in (TWO_SIDED, ONE_SIDED):
            raise ValueError(f"unknown map kind {self.kind!r}")
        p = float(self.parameter)
        if not math.isfinite(p) or p < 1.0:
            raise ValueError(
                f"{self.kind} map needs a finite parameter >= 1, got {self.parameter}")
        object.__setattr__(self, "parameter", p)

    @classmethod
    def two_sided(cls, beta: float) -> "GaussMapSpec":
        return cls(TWO_SIDED, beta)

    @classmethod
    def one_sided(cls, gamma: float) -> "GaussMapSpec":
        return cls(ONE_SIDED, gamma)

    @property
    def is_two_sided(self) -> bool:
        return self.kind == TWO_SIDED

    @property
    def domain(self) -> tuple[float, float]:
        return (-1.0, 1.0) if self.is_two_sided else (0.0, 1.0)

    @property
    def expanding(self) -> bool:
        """True when ``|derivative| >= parameter > 1`` on every branch."""
        return self.parameter > 1.0

    @property
    def edge_index(self) -> int:
        """Smallest branch index ``|u|`` (or ``v``) with a nonempty branch.

        For the two-sided map this is ``(beta - {beta}_2) / 2`` unless ``beta``
        is an odd integer, in which case that branch is empty and the edge
        index is ``(beta + 1) / 2``.  For the one-sided map it is
        ``gamma - {gamma}_1``.
        """
        p = self.parameter
        if self.is_two_sided:
            u0 = int(round(0.5 * (p - frac_part_2(p))))
            if p / (2 * u0 + 1) >= 1.0:  # odd integer beta
                u0 += 1
            return u0
        return int(round(p - frac_part_1(p)))

    def describe(self) -> str:
        name = "beta" if self.is_two_sided else "gamma"
        return f"{self.kind} {name}={self.parameter:g}"


def _as_spec(spec) -> GaussMapSpec:
    if not isinstance(spec, GaussMapSpec):
        raise TypeError("expected a GaussMapSpec")
    return spec


def _check_domain(spec: GaussMapSpec, x):
    a, b = spec.domain
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < a) or np.any(arr > b):
        raise ValueError(f"point outside the domain [{a}, {b}] of {spec.describe()}")
    return arr


def apply_map(spec: GaussMapSpec, x):
    """Evaluate the map, with 0 sent to 0.  Accepts scalars or arrays."""
    spec = _as_spec(spec)
    arr = _check_domain(spec, x)
    p = spec.parameter
    with np.errstate(divide="ignore", invalid="ignore"):
        safe = np.where(arr == 0.0, 1.0, arr)
        if spec.is_two_sided:
            out = frac_part_2(-p / safe)
        else:
            out = frac_part_1(p / safe)
    out = np.where(arr == 0.0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def branch_index(spec: GaussMapSpec, x):
    """Index of the branch containing ``x`` (0 for the point 0 itself).

    Endpoint ties follow the fractional-part conventions: ``x = beta/(2u-1)``
    belongs to branch ``u`` (image value 1), and ``x = gamma/v`` belongs to
    branch ``v`` (image value 0).
    """
    spec = _as_spec(spec)
    arr = _check_domain(spec, x)
    p = spec.parameter
    with np.errstate(divide="ignore"):
        safe = np.where(arr == 0.0, 1.0, arr)
        if spec.is_two_sided:
            t = -p / safe
            idx = np.rint((frac_part_2(t) - t) / 2.0)
        else:
            t = p / safe
            idx = np.floor(t)
    idx = np.where(arr == 0.0, 0, idx).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def derivative(spec: GaussMapSpec, x):
    """Derivative of the map: ``beta/x**2`` (two-sided), ``-gamma/x**2`` (one-sided).

    Raises at 0 and at branch endpoints, where the map is discontinuous.
    """
    spec = _as_spec(spec)
    arr = _check_domain(spec, x)
    if np.any(arr == 0.0):
        raise ValueError("the map is not differentiable at 0")
    p = spec.parameter
    if spec.is_two_sided:
        at_end = frac_part_2(-p / arr) == 1.0
    else:
        at_end = frac_part_1(p / arr) == 0.0
    # the domain endpoint 1 is interior to its branch unless the branch is complete
    if np.any(at_end & (np.abs(arr) < 1.0)):
        raise ValueError("the map is not differentiable at a branch endpoint")
    d = p / arr**2
    if not spec.is_two_sided:
        d = -d
    return float(d) if np.ndim(d) == 0 else d


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One monotone branch of a Gauss-type map.

    ``lo < hi`` delimit the open branch interval; ``image_lo < image_hi`` its
    image.  The forward map is ``x -> 2u - beta/x`` (two-sided) or
    ``x -> gamma/x - v`` (one-sided).
    """

    index: int
    lo: float
    hi: float
    image_lo: float
    image_hi: float
    complete: bool
    parameter: float
    two_sided: bool

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if self.two_sided:
            out = 2 * self.index - self.parameter / x
        else:
            out = self.parameter / x - self.index
        return float(out) if out.ndim == 0 else out

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.two_sided:
            out = self.parameter / (2 * self.index - y)
        else:
            out = self.parameter / (self.index + y)
        return float(out) if out.ndim == 0 else out

    def inverse_jacobian(self, y):
        """``|d inverse / dy|``, the weight of this branch in the transfer operator."""
        y = np.asarray(y, dtype=float)
        if self.two_sided:
            out = self.parameter / (2 * self.index - y) ** 2
        else:
            out = self.parameter / (self.index + y) ** 2
        return float(out) if out.ndim == 0 else out

    @property
    def increasing(self) -> bool:
        return self.two_sided

    @property
    def length(self) -> float:
        return self.hi - self.lo


def make_branch(spec: GaussMapSpec, index: int) -> Branch | None:
    """Build branch ``index`` clipped to the domain, or ``None`` if it is empty."""
    spec = _as_spec(spec)
    p = spec.parameter
    index = int(index)
    if spec.is_two_sided:
        if index == 0:
            return None
        # valid for either sign of the index: beta/(2u+1) < beta/(2u-1)
        raw_lo, raw_hi = p / (2 * index + 1), p / (2 * index - 1)
        lo, hi = max(raw_lo, -1.0), min(raw_hi, 1.0)
        if not lo < hi:
            return None
        complete = raw_lo >= -1.0 and raw_hi <= 1.0
        ilo = -1.0 if raw_lo >= -1.0 else 2 * index - p / lo
        ihi = 1.0 if raw_hi <= 1.0 else 2 * index - p / hi
    else:
        if index < 1:
            return None
        raw_hi = p / index
        lo, hi = p / (index + 1), min(raw_hi, 1.0)
        if not lo < hi:
            return None
        complete = raw_hi <= 1.0
        ilo = 0.0 if complete else p / hi - index
        ihi = 1.0
    return Branch(index, lo, hi, ilo, ihi, complete, p, spec.is_two_sided)


@dataclass(frozen=True)
class BranchDecomposition:
    """Branches with ``|index| <= max_index``, ordered by position in the domain."""

    spec: GaussMapSpec
    branches: tuple
    edge_index: int
    max_index: int
    filling: bool
    tail_length: float

    def __iter__(self) -> Iterator[Branch]:
        return iter(self.branches)

    def __len__(self) -> int:
        return len(self.branches)

    def get(self, index: int) -> Branch:
        for br in self.branches:
            if br.index == index:
                return br
        raise KeyError(index)


def branches(spec: GaussMapSpec, max_index: int = DEFAULT_MAX_INDEX) -> BranchDecomposition:
    """Enumerate all nonempty branches with ``|index| <= max_index``.

    The untracked part of the domain is the neighbourhood of 0 not covered by
    the enumerated branches; its length is ``tail_length``.
    """
    spec = _as_spec(spec)
    u0 = spec.edge_index
    if max_index < u0:
        raise ValueError(f"max_index={max_index} is below the edge index {u0}")
    p = spec.parameter
    found = []
    if spec.is_two_sided:
        for u in range(-max_index, -u0 + 1):
            br = make_branch(spec, u)
            if br is not None:
                found.append(br)
        for u in range(max_index, u0 - 1, -1):
            br = make_branch(spec, u)
            if br is not None:
                found.append(br)
        tail = 2.0 * p / (2 * max_index + 1)
    else:
        for v in range(max_index, u0 - 1, -1):
            br = make_branch(spec, v)
            if br is not None:
                found.append(br)
        tail = p / (max_index + 1)
    filling = all(br.complete for br in found)
    return BranchDecomposition(spec, tuple(found), u0, max_index, filling, tail)


def inverse_branch(spec: GaussMapSpec, index: int, y):
    """Preimage of ``y`` under branch ``index``; ``y`` must lie in that branch's image."""
    br = make_branch(spec, index)
    if br is None:
        raise ValueError(f"branch {index} of {spec.describe()} is empty")
    arr = np.asarray(y, dtype=float)
    tol = 1e-15
    if np.any(arr < br.image_lo - tol) or np.any(arr > br.image_hi + tol):
        raise ValueError(f"y outside the image ({br.image_lo}, {br.image_hi}) of branch {index}")
    return br.inverse(arr)


# ---------------------------------------------------------------------------
# interval images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntervalUnion:
    """Sorted, disjoint, nonempty open intervals.

    ``tail`` is the length of any part of the image that could not be
    tracked (always 0 for the exact image computation below, kept so that
    callers can combine exact and truncated results uniformly).
    """

    intervals: tuple = ()
    tail: float = 0.0

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], gap: float = MERGE_GAP,
                   tail: float = 0.0) -> "IntervalUnion":
        items = sorted((float(a), float(b)) for a, b in pairs if b > a)
        merged: list[list[float]] = []
        for a, b in items:
            if merged and a <= merged[-1][1] + gap:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged), tail)

    @property
    def length(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def is_empty(self) -> bool:
        return not self.intervals

    def contains_interval(self, a: float, b: float) -> bool:
        return any(lo <= a and b <= hi for lo, hi in self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)


def _index_range(spec: GaussMapSpec, a: float, b: float) -> tuple[int, int]:
    """Smallest and largest branch index met by the open interval ``(a, b)``.

    Requires ``(a, b)`` to stay on one side of 0 with ``a, b`` not both 0.
    """
    p = spec.parameter
    if spec.is_two_sided:
        if b <= 0.0:
            lo, hi = _index_range(spec, -b, -a)
            return -hi, -lo
        # x in I_u  <=>  2u - 1 <= p/x < 2u + 1 for x > 0
        u_right = math.floor((p / b + 1.0) / 2.0)
        u_left = math.ceil((p / a + 1.0) / 2.0) - 1
        return u_right, u_left
    v_right = math.floor(p / b)
    v_left = math.ceil(p / a) - 1
    return v_right, v_left


def _image_of_interval(spec: GaussMapSpec, a: float, b: float) -> list[tuple[float, float]]:
    """Exact image of the open interval ``(a, b)`` under one application of the map."""
    full = spec.domain
    if a < 0.0 < b or a == 0.0 or (spec.is_two_sided and b == 0.0):
        # a neighbourhood of 0 holds infinitely many complete branches
        return [full]
    lo_idx, hi_idx = _index_range(spec, a, b)
    if hi_idx - lo_idx >= 2:
        # a whole interior branch (never an edge branch) lies inside (a, b)
        return [full]
    out = []
    for k in range(lo_idx, hi_idx + 1):
        br = make_branch(spec, k)
        if br is None:
            continue
        lo, hi = max(a, br.lo), min(b, br.hi)
        if lo >= hi:
            continue
        y1, y2 = br.forward(lo), br.forward(hi)
        y1, y2 = min(y1, y2), max(y1, y2)
        out.append((max(y1, full[0]), min(y2, full[1])))
    return out


def iterate_interval(spec: GaussMapSpec, J, n: int) -> IntervalUnion:
    """Image of an interval union under ``n`` applications of the map.

    Images are exact: each piece is split along branch boundaries and pushed
    through the Moebius branch maps.  A piece that contains a whole complete
    branch (in particular any piece around 0) maps onto the full open domain,
    so no index truncation is needed and ``tail`` stays 0.
    """
    spec = _as_spec(spec)
    if not isinstance(J, IntervalUnion):
        J = IntervalUnion.from_pairs(J)
    a0, b0 = spec.domain
    for lo, hi in J:
        if lo < a0 - 1e-15 or hi > b0 + 1e-15:
            raise ValueError("interval outside the map's domain")
    cur = J
    full = spec.domain
    for _ in range(int(n)):
        if cur.is_empty():
            return cur
        if cur.contains_interval(*full):
            return cur
        pieces = []
        for lo, hi in cur:
            pieces.extend(_image_of_interval(spec, max(lo, a0), min(hi, b0)))
        cur = IntervalUnion.from_pairs(pieces)
    return cur


def covering_time(spec: GaussMapSpec, J, delta: float = 1e-6, n_max: int = 200):
    """Least ``n <= n_max`` with ``(-1 + delta, 1 - delta)`` inside the n-th image.

    For the one-sided map the target is ``(delta, 1 - delta)``.  Returns
    ``None`` when the covering is not reached within ``n_max`` steps.
    """
    spec = _as_spec(spec)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not isinstance(J, IntervalUnion):
        if len(J) == 2 and np.isscalar(J[0]):
            J = [J]
        J = IntervalUnion.from_pairs(J)
    if J.is_empty():
        raise ValueError("covering time of an empty set is undefined")
    a0, b0 = spec.domain
    target = (a0 + delta, b0 - delta)
    cur = J
    for n in range(0, int(n_max) + 1):
        if cur.contains_interval(*target):
            return n
        cur = iterate_interval(spec, cur, 1)
    return None


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Orbit:
    """Points ``x, T x, ..., T^n x`` with a note on degenerate hits.

    ``event`` is ``None``, ``"zero"`` or ``"endpoint"``; ``event_step`` is the
    first step at which it happened.  After reaching 0 the orbit stays at 0.
    """

    points: np.ndarray
    event: str | None = None
    event_step: int | None = None


def _is_endpoint(spec: GaussMapSpec, x: float) -> bool:
    if x == 0.0:
        return False
    p = spec.parameter
    if spec.is_two_sided:
        return frac_part_2(-p / x) == 1.0 and abs(x) < 1.0
    return frac_part_1(p / x) == 0.0 and x < 1.0


def orbit(spec: GaussMapSpec, x: float, n: int) -> Orbit:
    """Forward orbit of length ``n + 1`` starting at ``x``."""
    spec = _as_spec(spec)
    _check_domain(spec, x)
    pts = np.zeros(int(n) + 1)
    pts[0] = float(x)
    event, step = None, None
    for k in range(int(n) + 1):
        xk = pts[k]
        if event is None:
            if xk == 0.0:
                event, step = "zero", k
            elif _is_endpoint(spec, xk):
                event, step = "endpoint", k
        if k < n:
            pts[k + 1] = apply_map(spec, xk)
    return Orbit(pts, event, step)
