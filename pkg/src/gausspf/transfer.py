"""Perron-Frobenius operators of Gauss-type maps.

Two routes are provided and kept independent:

* the exact branch series
  ``P f(x) = sum_j |inverse_j'(x)| f(inverse_j(x))`` evaluated pointwise
  (:func:`apply_pf_exact`);
* Ulam's discretisation on a uniform cell partition, with every matrix entry
  ``m(C_i & T^-1 C_j) / m(C_i)`` computed from closed-form preimages
  (:func:`build_ulam`).

On top of the Ulam matrix sit the invariant-density solve, the leading
spectrum, the deflated operator ``Z h = P h - <h, 1> rho0`` and the Neumann
series for ``(I - Z^2)^-1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core_maps import GaussMapSpec, apply_map, make_branch

LOGGER = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# grid densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridDensity:
    """Piecewise-constant function on ``n_cells`` equal cells of ``[a, b]``.

    ``values[i]`` is the value on cell ``i``.  Evaluation returns the value of
    the containing cell (no interpolation) and 0 outside ``[a, b]``.  Values may
    be complex.
    """

    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.dtype.kind not in "fc":
            vals = vals.astype(float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("values must be a nonempty 1-d array")
        if not self.b > self.a:
            raise ValueError("empty interval")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, a, b, n_cells, dtype=float):
        return cls(a, b, np.zeros(int(n_cells), dtype=dtype))

    @classmethod
    def from_function(cls, fn: Callable, a: float, b: float, n_cells: int,
                      average: bool = True) -> "GridDensity":
        """Sample ``fn`` on the grid.

        With ``average=True`` each cell gets the cell average of ``fn``
        (8-point Gauss-Legendre per cell), i.e. the L2 projection onto
        piecewise constants; otherwise the midpoint value.
        """
        edges = np.linspace(a, b, int(n_cells) + 1)
        if not average:
            mids = 0.5 * (edges[:-1] + edges[1:])
            return cls(a, b, np.asarray(fn(mids)))
        half = 0.5 * (edges[1:] - edges[:-1])
        mids = 0.5 * (edges[1:] + edges[:-1])
        pts = mids[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = np.asarray(fn(pts.ravel())).reshape(pts.shape)
        return cls(a, b, 0.5 * vals @ _GL_WEIGHTS)

    def with_values(self, values) -> "GridDensity":
        return GridDensity(self.a, self.b, values)

    # geometry ---------------------------------------------------------------
    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def width(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n_cells + 1)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def cell_of(self, x):
        """Cell index of ``x`` (clipped; the right end belongs to the last cell)."""
        idx = np.floor((np.asarray(x, dtype=float) - self.a) / self.width).astype(np.int64)
        return np.clip(idx, 0, self.n_cells - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.a) & (x <= self.b)
        out = np.where(inside, self.values[self.cell_of(np.where(inside, x, self.a))], 0)
        return out if out.ndim else out[()]

    # norms and functionals --------------------------------------------------
    @property
    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.width)

    @property
    def tv_estimate(self) -> float:
        """Sum of absolute jumps between neighbouring cells."""
        return float(np.sum(np.abs(np.diff(self.values))))

    @property
    def mass(self):
        """Integral over ``[a, b]``."""
        s = np.sum(self.values) * self.width
        return complex(s) if np.iscomplexobj(s) else float(s)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self, lo, hi):
        """Exact integral over ``[lo, hi]`` (vectorised over the bounds)."""
        cum = np.concatenate([[0.0], np.cumsum(self.values) * self.width])

        def prim(t):
            t = np.clip(np.asarray(t, dtype=float), self.a, self.b)
            s = (t - self.a) / self.width
            k = np.clip(np.floor(s).astype(np.int64), 0, self.n_cells - 1)
            return cum[k] + (s - k) * self.width * self.values[k]

        out = prim(hi) - prim(lo)
        return out if np.ndim(out) else out[()]

    def inner(self, other: "GridDensity"):
        """``<self, other>`` for two densities on the same grid."""
        _check_same_grid(self, other)
        return np.sum(self.values * other.values) * self.width

    def distance_l1(self, other: "GridDensity") -> float:
        _check_same_grid(self, other)
        return float(np.sum(np.abs(self.values - other.values)) * self.width)

    def normalized(self) -> "GridDensity":
        m = self.mass
        if m == 0:
            raise ValueError("cannot normalise a density of zero mass")
        return self.with_values(self.values / m)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _check_same_grid(f: GridDensity, g: GridDensity):
    if f.n_cells != g.n_cells or f.a != g.a or f.b != g.b:
        raise ValueError("densities live on different grids")


def _restricted(f, a: float, b: float) -> Callable:
    """``f`` as a callable that vanishes outside ``[a, b]``."""
    def fn(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= a) & (x <= b)
        vals = np.asarray(f(np.where(inside, x, 0.5 * (a + b))))
        return np.where(inside, vals, 0.0)
    return fn


def integrate(f, lo, hi, panels: int = 1):
    """Integral of ``f`` over ``[lo, hi]``: exact for grids, Gauss-Legendre otherwise."""
    if isinstance(f, GridDensity):
        return f.integral(lo, hi)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    total = 0.0
    for k in range(panels):
        p0 = lo + (hi - lo) * k / panels
        p1 = lo + (hi - lo) * (k + 1) / panels
        mid, half = 0.5 * (p0 + p1), 0.5 * (p1 - p0)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        total = total + half * (np.asarray(f(pts)) @ _GL_WEIGHTS)
    return total


def _sup_estimate(f, a: float, b: float) -> float:
    if isinstance(f, GridDensity):
        return f.sup_norm()
    xs = np.linspace(a, b, 4097)
    return float(np.max(np.abs(f(xs))))


# ---------------------------------------------------------------------------
# exact branch series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PFValue:
    """Result of a truncated transfer-operator series.

    ``value`` includes the midpoint estimate ``tail_estimate`` of the omitted
    terms (when requested); ``tail_bound`` bounds the omitted terms themselves.
    """

    value: np.ndarray
    tail_bound: float
    tail_estimate: np.ndarray


def apply_pf_exact(spec: GaussMapSpec, f, x, j_trunc: int = 10_000,
                   tail_correction: bool = True) -> PFValue:
    """Transfer operator applied to ``f`` at the points ``x`` by its branch series.

    Two-sided: ``sum_{0<|j|<=J} beta/(2j-x)^2 f(beta/(2j-x))``;
    one-sided: ``sum_{1<=j<=J} gamma/(j+x)^2 f(gamma/(j+x))``.  ``f`` is a
    callable or a :class:`GridDensity` and is taken to vanish off the domain.

    The omitted terms ``|j| > J`` come from preimages in a shrinking
    neighbourhood of 0; summing them by the midpoint rule in ``j`` gives
    ``(1/2) * integral of f`` over that neighbourhood (two-sided) or the full
    integral (one-sided), which is added when ``tail_correction`` is set.
    """
    x = np.asarray(x, dtype=float)
    a, b = spec.domain
    if np.any(x == 0.0):
        raise ValueError("the series is evaluated away from 0")
    if np.any((x < a) | (x > b)):
        raise ValueError("x outside the domain")
    fr = f if isinstance(f, GridDensity) else _restricted(f, a, b)
    p = spec.parameter
    J = int(j_trunc)
    flat = x.ravel()
    acc = np.zeros(flat.shape, dtype=complex if _is_complex(f) else float)
    chunk = max(1, 2_000_000 // max(flat.size, 1))
    if spec.is_two_sided:
        js = np.concatenate([np.arange(-J, 0), np.arange(1, J + 1)]).astype(float)
    else:
        js = np.arange(1, J + 1, dtype=float)
    for s in range(0, js.size, chunk):
        jj = js[s:s + chunk][:, None]
        denom = (2.0 * jj - flat[None, :]) if spec.is_two_sided else (jj + flat[None, :])
        y = p / denom
        acc = acc + np.sum(p / denom**2 * fr(y), axis=0)
    sup = _sup_estimate(f, a, b)
    if spec.is_two_sided:
        tail_bound = sup * p / (J - 1) if J > 1 else math.inf
        tail = np.zeros_like(acc)
        if tail_correction:
            y_pos = p / (2 * J + 1 - flat)
            y_neg = p / (-2 * J - 1 - flat)
            tail = 0.5 * (integrate(fr, np.zeros_like(flat), y_pos)
                          + integrate(fr, y_neg, np.zeros_like(flat)))
    else:
        tail_bound = sup * p / J
        tail = np.zeros_like(acc)
        if tail_correction:
            tail = integrate(fr, np.zeros_like(flat), p / (J + 0.5 + flat))
    value = (acc + tail).reshape(x.shape)
    return PFValue(value if value.ndim else value[()], float(tail_bound),
                   np.asarray(tail).reshape(x.shape))


def _is_complex(f) -> bool:
    if isinstance(f, GridDensity):
        return np.iscomplexobj(f.values)
    try:
        return np.iscomplexobj(f(np.array([0.5])))
    except Exception:  # pragma: no cover - defensive
        return False


def koopman(spec: GaussMapSpec, g: Callable) -> Callable:
    """The composition ``g o T``."""
    return lambda x: g(apply_map(spec, np.asarray(x, dtype=float)))


def _koopman_pairing(spec: GaussMapSpec, f: Callable, g: Callable, j_trunc: int,
                     n_cells: int, y_edges: np.ndarray) -> complex:
    """``<f, g o T>`` integrated in ``x`` branch by branch, plus a tail estimate.

    On each branch the ``x`` panels are the preimages of the image grid
    ``y_edges``, so ``g o T`` is as smooth on every panel as ``g`` is on the
    cells of that grid (a piecewise-constant ``g`` on those cells is
    integrated exactly).  Branches longer than a grid cell get extra panels
    so that ``f`` is resolved to the grid scale.  Short complete branches,
    which are the vast majority, are handled in one vectorised batch.
    """
    p = spec.parameter
    a, b = spec.domain
    h = (b - a) / n_cells
    two = spec.is_two_sided
    idx = range(-j_trunc, j_trunc + 1) if two else range(1, j_trunc + 1)
    total = 0.0
    batch = []
    for k in idx:
        br = make_branch(spec, k)
        if br is None:
            continue
        if br.complete and br.length <= h:
            batch.append(k)
            continue
        ye = y_edges[(y_edges > br.image_lo) & (y_edges < br.image_hi)]
        extra = int(math.ceil(br.length / h))
        fine = np.linspace(br.image_lo, br.image_hi, extra + 1)
        ye = np.unique(np.concatenate([ye, fine]))
        xe = np.sort(br.inverse(ye))
        mid, half = 0.5 * (xe[1:] + xe[:-1]), 0.5 * np.diff(xe)
        pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = f(pts) * g(br.forward(pts))
        total = total + np.sum(half * (vals @ _GL_WEIGHTS))
    ks = np.array(batch, dtype=float)
    for chunk in np.array_split(ks, max(1, ks.size * y_edges.size // 2_000_000 + 1)):
        if chunk.size == 0:
            continue
        c = chunk[:, None]
        # inverse branches y -> beta/(2u - y) and y -> gamma/(v + y)
        xe = p / (2.0 * c - y_edges[None, :]) if two else p / (c + y_edges[None, :])
        mid, half = 0.5 * (xe[:, 1:] + xe[:, :-1]), 0.5 * np.abs(np.diff(xe, axis=1))
        pts = mid[..., None] + half[..., None] * _GL_NODES
        ty = 2.0 * c[..., None] - p / pts if two else p / pts - c[..., None]
        vals = f(pts) * g(np.clip(ty, a, b))
        total = total + np.sum(half * (vals @ _GL_WEIGHTS))
    # omitted branches: each contributes about f(x_j) * int g(y) |inverse'(y)| dy
    ys = np.linspace(a, b, 2049)
    ym, yw = 0.5 * (ys[1:] + ys[:-1]), np.diff(ys)
    gy = g(ym)
    if two:
        for sign in (1.0, -1.0):
            x0 = sign * 1e-300
            w = p / (2.0 * (2 * j_trunc + 1 - sign * ym))
            total = total + f(np.array([x0]))[0] * np.sum(gy * w * yw)
    else:
        w = p / (j_trunc + 0.5 + ym)
        total = total + f(np.array([1e-300]))[0] * np.sum(gy * w * yw)
    return total


def duality_residual(spec: GaussMapSpec, f, g, j_trunc: int = 10_000,
                     n_cells: int = 2**14) -> float:
    """``|<P f, g> - <f, g o T>|`` with both pairings computed independently.

    ``<P f, g>`` integrates the exact series against ``g`` with composite
    Gauss-Legendre on ``n_cells`` panels; ``<f, g o T>`` integrates branch by
    branch in ``x``.  ``f`` and ``g`` are callables or :class:`GridDensity`
    objects.  A :class:`GridDensity` ``g`` whose cells refine into the
    ``n_cells`` grid is integrated exactly on both sides; a callable ``g``
    with kinks costs ``O(w^2)`` per kink, ``w`` the panel width.
    """
    a, b = spec.domain
    fr = f if isinstance(f, GridDensity) else _restricted(f, a, b)
    gr = g if isinstance(g, GridDensity) else _restricted(g, a, b)
    edges = np.linspace(a, b, n_cells + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    nodes, weights = np.polynomial.legendre.leggauss(4)
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    pf = apply_pf_exact(spec, fr, pts, j_trunc).value
    lhs = np.sum((pf * gr(pts)).reshape(-1, 4) @ weights * half)
    y_edges = g.edges if isinstance(g, GridDensity) else np.linspace(a, b, 65)
    rhs = _koopman_pairing(spec, fr, gr, j_trunc, n_cells, y_edges)
    return float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# Ulam discretisation
# ---------------------------------------------------------------------------

def _em_tail(M: float, a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    """``sum_{m >= M} 1 / ((c m + a)(c m + b))`` by Euler-Maclaurin.

    Accurate to roughly ``(c M)^-9`` relative; callers keep ``c M >= 64``.
    The derivative terms are written without cancellation between ``a`` and
    ``b`` so that nearly equal arguments cost no precision.
    """
    A = c * M + a
    B = c * M + b
    integral = np.log1p((b - a) / A) / (c * (b - a))
    g0 = 1.0 / (A * B)

    def deriv(k):
        s = sum(B**i * A ** (k - i) for i in range(k + 1))
        return (-1) ** k * math.factorial(k) * c**k * s / (A * B) ** (k + 1)

    return integral + 0.5 * g0 - deriv(1) / 12.0 + deriv(3) / 720.0 - deriv(5) / 30240.0


def _group_sum(u_a: int, u_b: float, a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    """``sum_{m=u_a}^{u_b} 1/((c m + a)(c m + b))``; ``u_b`` may be ``inf``."""
    em_start = max(u_a, int(math.ceil(64.0 / c)))
    direct_end = min(u_b, em_start - 1)
    out = np.zeros_like(a)
    for m in range(u_a, int(direct_end) + 1):
        out += 1.0 / ((c * m + a) * (c * m + b))
    if u_b >= em_start:
        out += _em_tail(em_start, a, b, c)
        if math.isfinite(u_b):
            out -= _em_tail(u_b + 1, a, b, c)
    return out


@dataclass(frozen=True)
class UlamOperator:
    """Row-stochastic Ulam matrix ``W[i, j] = m(C_i & T^-1 C_j) / m(C_i)``.

    A density with cell values ``v`` is pushed forward to ``W.T @ v``.
    """

    spec: GaussMapSpec
    n_cells: int
    matrix: sp.csr_matrix
    row_sum_error: float

    @property
    def domain(self):
        return self.spec.domain

    def grid(self, values) -> GridDensity:
        a, b = self.domain
        return GridDensity(a, b, values)

    def apply(self, f: GridDensity) -> GridDensity:
        """Discretised transfer operator on a grid density."""
        if f.n_cells != self.n_cells:
            raise ValueError("grid size mismatch")
        return f.with_values(self.matrix.T @ f.values)

    def uniform(self) -> GridDensity:
        a, b = self.domain
        return GridDensity(a, b, np.full(self.n_cells, 1.0 / (b - a)))


def _branch_pieces(spec, u, edges, h, a0):
    """Pieces ``(cell, lo, hi)`` of branch ``u`` cut along the cell edges."""
    br = make_branch(spec, u)
    if br is None:
        return None
    i0 = int(math.floor((br.lo - a0) / h))
    i1 = int(math.ceil((br.hi - a0) / h)) - 1
    i0, i1 = max(i0, 0), min(i1, edges.size - 2)
    cells = np.arange(i0, i1 + 1)
    lo = np.maximum(edges[cells], br.lo)
    hi = np.minimum(edges[cells + 1], br.hi)
    keep = hi > lo
    return cells[keep], lo[keep], hi[keep]


def build_ulam(spec: GaussMapSpec, n_cells: int) -> UlamOperator:
    """Assemble the Ulam matrix with exact preimage measures.

    Branches longer than a cell, and short branches straddling a cell edge,
    are cut into pieces whose images are intersected with the target cells
    in closed form.  Short branches lying wholly inside one cell (those near
    0, infinitely many) are summed per cell: the entry contributed to target
    ``[y0, y1]`` by branch ``u`` is ``beta (y1 - y0) / ((2u - y1)(2u - y0))``,
    and the sum over a run of consecutive ``u`` (possibly infinite) is done
    directly for small ``u`` and by Euler-Maclaurin beyond.  No index
    truncation is involved, so rows sum to 1 up to rounding.
    """
    n = int(n_cells)
    if n < 2:
        raise ValueError("n_cells must be at least 2")
    a0, b0 = spec.domain
    h = (b0 - a0) / n
    edges = np.linspace(a0, b0, n + 1)
    p = spec.parameter
    two = spec.is_two_sided
    c = 2.0 if two else 1.0
    # branches longer than h: 2p/(4u^2-1) > h  (two-sided), p/(v(v+1)) > h (one-sided)
    if two:
        u_long = int(math.ceil(math.sqrt((2 * p / h + 1) / 4))) + 1
    else:
        u_long = int(math.ceil(math.sqrt(p / h))) + 1
    u0 = spec.edge_index
    indices = set()
    for u in range(u0, u_long + 1):
        indices.add(u)
        if two:
            indices.add(-u)
    # short branches that straddle a cell edge
    inner = edges[(edges != 0.0) & (np.abs(edges) < (p / (c * u_long)))]
    for e in inner:
        br_idx = _branch_index_scalar(spec, e)
        if abs(br_idx) > u_long:
            # e is interior to that branch unless it is exactly an endpoint
            br = make_branch(spec, br_idx)
            if br is not None and br.lo < e < br.hi:
                indices.add(br_idx)
    rows, cols, vals = [], [], []
    for u in sorted(indices):
        pieces = _branch_pieces(spec, u, edges, h, a0)
        if pieces is None:
            continue
        cells, lo, hi = pieces
        if two:
            y_lo, y_hi = 2 * u - p / lo, 2 * u - p / hi
        else:
            y_lo, y_hi = p / hi - u, p / lo - u
        y_lo = np.maximum(y_lo, a0)
        y_hi = np.minimum(y_hi, b0)
        j0 = np.clip(np.floor((y_lo - a0) / h).astype(np.int64), 0, n - 1)
        j1 = np.clip(np.ceil((y_hi - a0) / h).astype(np.int64) - 1, 0, n - 1)
        counts = j1 - j0 + 1
        rep = np.repeat(np.arange(cells.size), counts)
        offs = np.arange(rep.size) - np.repeat(np.cumsum(counts) - counts, counts)
        jj = j0[rep] + offs
        ya = np.maximum(edges[jj], y_lo[rep])
        yb = np.minimum(edges[jj + 1], y_hi[rep])
        if two:
            w = p * (yb - ya) / ((2 * u - yb) * (2 * u - ya))
        else:
            w = p * (yb - ya) / ((u + yb) * (u + ya))
        good = yb > ya
        rows.append(cells[rep][good])
        cols.append(jj[good])
        vals.append(w[good] / h)
    # grouped short branches wholly inside a cell
    y0, y1 = edges[:-1], edges[1:]
    dy = y1 - y0
    for i in range(n):
        L, R = edges[i], edges[i + 1]
        runs = []
        if R > 0:
            Lp = max(L, 0.0)
            if two:
                ua = int(math.ceil((p / R + 1) / 2))
                ub = math.inf if Lp == 0.0 else math.floor((p / Lp - 1) / 2)
            else:
                ua = int(math.ceil(p / R))
                ub = math.inf if Lp == 0.0 else math.floor(p / Lp) - 1
            ua = max(ua, u_long + 1)
            if ub >= ua:
                if two:
                    runs.append((ua, ub, -y1, -y0))
                else:
                    runs.append((ua, ub, y1, y0))
        if two and L < 0:
            Rn = max(-R, 0.0)
            wa = int(math.ceil((p / (-L) + 1) / 2))
            wb = math.inf if Rn == 0.0 else math.floor((p / Rn - 1) / 2)
            wa = max(wa, u_long + 1)
            if wb >= wa:
                runs.append((wa, wb, y1, y0))
        if not runs:
            continue
        row = np.zeros(n)
        for ua, ub, A, B in runs:
            row += p * dy * _group_sum(ua, ub, A, B, c)
        rows.append(np.full(n, i))
        cols.append(np.arange(n))
        vals.append(row / h)
    W = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    W.sum_duplicates()
    err = float(np.max(np.abs(np.asarray(W.sum(axis=1)).ravel() - 1.0)))
    LOGGER.debug("Ulam %s n=%d nnz=%d row-sum error %.2e", spec.describe(), n, W.nnz, err)
    return UlamOperator(spec, n, W, err)


def _branch_index_scalar(spec: GaussMapSpec, x: float) -> int:
    p = spec.parameter
    if spec.is_two_sided:
        if x > 0:
            return int(math.floor((p / x + 1) / 2))
        return -int(math.floor((p / (-x) + 1) / 2))
    return int(math.floor(p / x))


# ---------------------------------------------------------------------------
# invariant density and spectrum
# ---------------------------------------------------------------------------

class ConvergenceError(RuntimeError):
    """An iteration did not reach its tolerance within the allowed steps."""


def power_iterate(U: UlamOperator, tol: float = 1e-12, max_iter: int = 10_000,
                  start: GridDensity | None = None) -> GridDensity:
    """Fixed density of the Ulam operator by power iteration.

    Returns a nonnegative density of unit mass with
    ``||W^T rho - rho||_1 <= tol``.
    """
    v = (start.values if start is not None else U.uniform().values).astype(float)
    h = (U.domain[1] - U.domain[0]) / U.n_cells
    WT = U.matrix.T.tocsr()
    v = v / (np.sum(v) * h)
    for it in range(int(max_iter)):
        nxt = WT @ v
        nxt /= np.sum(nxt) * h
        res = np.sum(np.abs(nxt - v)) * h
        v = nxt
        if res <= tol:
            LOGGER.debug("power iteration converged in %d steps (res %.2e)", it + 1, res)
            return U.grid(np.maximum(v, 0.0))
    raise ConvergenceError(f"power iteration did not reach {tol} in {max_iter} steps")


@dataclass(frozen=True)
class SpectralSummary:
    """Leading eigenvalues of an Ulam operator, largest modulus first."""

    eigenvalues: np.ndarray
    gap: float
    invariant_density: GridDensity
    residual: float
    second_modulus_power: float | None = None

    @property
    def n_peripheral(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) >= 1 - 1e-6))


def second_modulus(U: UlamOperator, rho0: GridDensity, n_iter: int = 400,
                   seed: int = 0) -> float:
    """``|lambda_2|`` by power iteration on the rank-one deflated matrix.

    The deflated operator is ``v -> W^T v - rho0 <v, 1>``; it kills the
    leading eigenvector and keeps the rest of the spectrum.  The growth rate
    is averaged over the second half of the run so that complex pairs (whose
    iterates rotate) are measured correctly.
    """
    rng = np.random.default_rng(seed)
    h = (U.domain[1] - U.domain[0]) / U.n_cells
    WT = U.matrix.T.tocsr()
    r = rho0.values
    v = rng.standard_normal(U.n_cells)
    v -= r * np.sum(v) * h
    logs = []
    for _ in range(int(n_iter)):
        w = WT @ v
        w -= r * np.sum(w) * h
        nv = np.linalg.norm(w)
        if nv == 0.0:
            return 0.0
        logs.append(math.log(nv / np.linalg.norm(v)))
        v = w / nv
    half = len(logs) // 2
    return float(math.exp(np.mean(logs[half:])))


def leading_spectrum(U: UlamOperator, k: int = 6, tol: float = 1e-12) -> SpectralSummary:
    """Largest-modulus eigenvalues of the Ulam matrix (ARPACK), plus the density.

    ``k = 1`` returns just the Perron eigenvalue found by power iteration.
    """
    rho = power_iterate(U, tol=tol)
    residual = U.apply(rho).distance_l1(rho)
    lam2 = second_modulus(U, rho)
    if k <= 1:
        return SpectralSummary(np.array([1.0 + 0j]), 1.0 - lam2, rho, residual, lam2)
    n = U.n_cells
    if k >= n - 1:
        vals = np.linalg.eigvals(U.matrix.toarray())
    else:
        rng = np.random.default_rng(0)
        ncv = min(n - 1, max(2 * k + 1, 64))
        try:
            vals = spla.eigs(U.matrix.T.tocsr(), k=k, which="LM", v0=rng.random(n),
                             ncv=ncv, return_eigenvectors=False, tol=1e-12, maxiter=20_000)
        except spla.ArpackNoConvergence as err:
            # clustered subdominant eigenvalues: keep the converged Ritz values
            if len(err.eigenvalues) < 2:
                raise
            vals = err.eigenvalues
    vals = np.asarray(vals, dtype=complex)
    vals = vals[np.argsort(-np.abs(vals), kind="stable")][:k]
    gap = 1.0 - float(np.abs(vals[1])) if vals.size > 1 else 1.0 - lam2
    return SpectralSummary(vals, gap, rho, residual, lam2)


def dense_spectrum(U: UlamOperator) -> np.ndarray:
    """All eigenvalues by a dense solve (small grids only), largest modulus first."""
    if U.n_cells > 2048:
        raise ValueError("dense spectrum is meant for n_cells <= 2048")
    vals = np.linalg.eigvals(U.matrix.toarray())
    return vals[np.argsort(-np.abs(vals), kind="stable")]


# ---------------------------------------------------------------------------
# deflated operator and Neumann series
# ---------------------------------------------------------------------------

def deflate_Z(U: UlamOperator, h: GridDensity, rho0: GridDensity) -> GridDensity:
    """``Z h = P h - <h, 1> rho0`` on the grid."""
    return U.apply(h) - rho0 * h.mass


@dataclass(frozen=True)
class NeumannResult:
    solution: GridDensity
    terms: int
    increments: np.ndarray = field(repr=False)

    @property
    def decay_ratio(self) -> float:
        """Average ratio of successive increment norms over the last half."""
        inc = self.increments[self.increments > 0]
        if inc.size < 4:
            return 0.0
        tail = inc[inc.size // 2:]
        return float((tail[-1] / tail[0]) ** (1.0 / (tail.size - 1)))


def neumann_inverse_Z2(U: UlamOperator, h: GridDensity, rho0: GridDensity,
                       tol: float = 1e-10, max_terms: int = 400) -> NeumannResult:
    """``(I - Z^2)^-1 h = h + Z^2 h + Z^4 h + ...`` for mean-zero ``h``.

    Stops when the L1 norm of the latest increment drops below ``tol``.
    """
    m = h.mass
    if abs(m) > max(tol, 1e-12) * max(1.0, h.l1_norm) * 1e3:
        raise ValueError(f"Neumann series needs a mean-zero input, got mass {m:.3e}")
    total = h
    term = h
    incs = []
    for k in range(1, int(max_terms) + 1):
        term = deflate_Z(U, deflate_Z(U, term, rho0), rho0)
        total = total + term
        nrm = term.l1_norm
        incs.append(nrm)
        if nrm < tol:
            return NeumannResult(total, k, np.array(incs))
    raise ConvergenceError(f"Neumann series not converged after {max_terms} terms")
