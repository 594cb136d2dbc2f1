"""Composite Gauss-Legendre grids on radial intervals.

A :class:`RadialGrid` is a union of panels, each carrying ``order`` Gauss
nodes.  Potential discontinuities are always panel edges, so every panel sees
a constant potential value.  Besides plain quadrature the module provides
:func:`nystrom_matrix`, a product-integration Nystrom rule for Green kernels
whose first derivative jumps on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

DEFAULT_ORDER = 16
DEFAULT_POINTS_PER_SEGMENT = 32
#: Gauss nodes used on each half of a kink-split panel.
SUBPANEL_EXTRA = 8


class GridError(ValueError):
    pass


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature on ``[0, r_max]``; ``edges`` are the panel boundaries."""

    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    order: int

    @property
    def r_max(self) -> float:
        return float(self.edges[-1])

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def n_panels(self) -> int:
        return self.edges.size - 1

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def to_basis(self, values: np.ndarray) -> np.ndarray:
        """Nodal values -> symmetrized (sqrt-weighted) coordinates."""
        return self.sqrt_weights * values

    def from_basis(self, vec: np.ndarray) -> np.ndarray:
        return vec / self.sqrt_weights

    def refine(self) -> "RadialGrid":
        """Split every panel in half."""
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        edges = np.empty(2 * self.edges.size - 1)
        edges[0::2] = self.edges
        edges[1::2] = mids
        return grid_from_edges(edges, self.order)

    def prefix(self, r: float) -> int:
        """Number of leading nodes lying in ``[0, r]`` (``r`` must be an edge)."""
        idx = np.flatnonzero(np.isclose(self.edges, r, rtol=1e-14, atol=0.0))
        if idx.size == 0:
            raise GridError(f"{r!r} is not a panel edge of this grid")
        return int(idx[0]) * self.order


def grid_from_edges(edges: Sequence[float], order: int = DEFAULT_ORDER) -> RadialGrid:
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise GridError("need at least one panel")
    if np.any(np.diff(edges) <= 0):
        raise GridError("panel edges must be strictly increasing")
    if edges[0] < 0:
        raise GridError("grid must start at r >= 0")
    if order < 2:
        raise GridError("quadrature order must be >= 2")
    x, w = gauss_legendre(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    for arr in (nodes, weights, edges):
        arr.setflags(write=False)
    return RadialGrid(nodes=nodes, weights=weights, edges=edges, order=order)


def _segment_edges(lo: float, hi: float, n_panels: int, scale: float | None) -> list[float]:
    """Panel edges for one segment, graded toward both ends if ``scale`` is short.

    ``scale`` is a boundary-layer width (e.g. the decay length inside a
    repulsive step).  Panels start at width ``scale`` next to each end and
    double inward; the remaining middle is split uniformly.
    """
    length = hi - lo
    if scale is None or length <= 8.0 * scale:
        return list(np.linspace(lo, hi, n_panels + 1))
    ladder = [0.0]
    h = scale
    while ladder[-1] + h < 0.5 * length - scale:
        ladder.append(ladder[-1] + h)
        h *= 2.0
    left = [lo + d for d in ladder]
    right = [hi - d for d in reversed(ladder)]
    n_mid = max(1, n_panels - 2 * (len(ladder) - 1))
    middle = list(np.linspace(left[-1], right[0], n_mid + 1))
    return left[:-1] + middle + right[1:]


def build_grid(
    breakpoints: Sequence[float],
    r_max: float,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    order: int = DEFAULT_ORDER,
    scales: Sequence[float | None] | None = None,
) -> RadialGrid:
    """Composite Gauss rule on ``[0, b1], [b1, b2], ..., [bk, r_max]``.

    Each segment receives ``ceil(points_per_segment / order)`` panels.
    ``scales`` optionally gives a boundary-layer width per segment (see
    :func:`_segment_edges`).
    """
    bps = [float(b) for b in breakpoints]
    if points_per_segment < 4:
        raise GridError("points_per_segment must be >= 4")
    if any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
        raise GridError("breakpoints must be strictly increasing")
    if bps and bps[0] <= 0:
        raise GridError("breakpoints must lie in (0, r_max)")
    if bps and bps[-1] >= r_max:
        raise GridError(f"breakpoint {bps[-1]!r} >= r_max {r_max!r}")
    if not r_max > 0:
        raise GridError("r_max must be positive")
    bounds = [0.0] + bps + [float(r_max)]
    if scales is None:
        scales = [None] * (len(bounds) - 1)
    if len(scales) != len(bounds) - 1:
        raise GridError("one scale per segment expected")
    n_panels = max(1, math.ceil(points_per_segment / order))
    edges: list[float] = [0.0]
    for lo, hi, sc in zip(bounds[:-1], bounds[1:], scales):
        edges.extend(_segment_edges(lo, hi, n_panels, sc)[1:])
    return grid_from_edges(edges, order)


def extend_grid(grid: RadialGrid, r_max: float, panel_width: float) -> RadialGrid:
    """Append uniform panels of width <= ``panel_width`` up to ``r_max``.

    The nodes of ``grid`` stay the leading nodes of the result, which lets
    operators built on the inner grid be embedded by slicing.
    """
    if r_max <= grid.r_max:
        raise GridError("extension radius must exceed the current r_max")
    n = max(1, math.ceil((r_max - grid.r_max) / panel_width))
    tail = np.linspace(grid.r_max, r_max, n + 1)[1:]
    return grid_from_edges(np.concatenate([grid.edges, tail]), grid.order)


def integrate(grid: RadialGrid, samples) -> complex | float:
    samples = np.asarray(samples)
    if samples.shape != grid.nodes.shape:
        raise GridError(f"expected {grid.size} samples, got shape {samples.shape}")
    return grid.weights @ samples


def _lagrange_basis(nodes: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``L[..., j] = l_j(t)`` for the interpolation nodes ``nodes``."""
    diff = t[..., None] - nodes
    n = nodes.size
    out = np.empty(t.shape + (n,))
    for j in range(n):
        others = np.delete(np.arange(n), j)
        out[..., j] = np.prod(diff[..., others], axis=-1) / np.prod(nodes[j] - nodes[others])
    return out


Green = Callable[[np.ndarray, np.ndarray], np.ndarray]


def nystrom_matrix(rows: np.ndarray, cols: RadialGrid, green: Green) -> np.ndarray:
    """Value-space Nystrom matrix ``A`` with ``(A f)_i ~ int green(r_i, s) f(s) ds``.

    Off-panel entries are the plain rule ``green(r_i, s_j) w_j``.  When a row
    point lies strictly inside a column panel the kernel has a kink there, so
    that block is replaced by product integration: the panel is split at the
    row point and ``green * l_j`` is integrated with a higher-order Gauss
    rule on each half.  Exact for piecewise-polynomial ``f`` of degree
    ``< order`` times any kernel smooth on each side of the diagonal.
    """
    rows = np.asarray(rows, dtype=float)
    A = green(rows[:, None], cols.nodes[None, :]) * cols.weights[None, :]
    A = np.array(A, dtype=np.result_type(A, float))

    edges = cols.edges
    pan = np.searchsorted(edges, rows, side="right") - 1
    inside = (pan >= 0) & (pan < cols.n_panels)
    inside[inside] &= (rows[inside] > edges[pan[inside]]) & (rows[inside] < edges[pan[inside] + 1])
    which = np.flatnonzero(inside)
    if which.size == 0:
        return A

    p = pan[which]
    lo, hi = edges[p], edges[p + 1]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x_ref = (rows[which] - mid) / half

    ref_nodes, _ = gauss_legendre(cols.order)
    xq, wq = gauss_legendre(cols.order + SUBPANEL_EXTRA)
    a1, b1 = 0.5 * (x_ref + 1.0), 0.5 * (x_ref - 1.0)  # [-1, x_ref]
    a2, b2 = 0.5 * (1.0 - x_ref), 0.5 * (1.0 + x_ref)  # [x_ref, 1]
    t_ref = np.concatenate([a1[:, None] * xq + b1[:, None], a2[:, None] * xq + b2[:, None]], axis=1)
    w_ref = np.concatenate([a1[:, None] * wq, a2[:, None] * wq], axis=1)

    t_phys = mid[:, None] + half[:, None] * t_ref
    g = green(rows[which][:, None], t_phys) * (half[:, None] * w_ref)
    L = _lagrange_basis(ref_nodes, t_ref)
    block = np.einsum("ms,msj->mj", g, L)
    cols_idx = p[:, None] * cols.order + np.arange(cols.order)[None, :]
    A[which[:, None], cols_idx] = block
    return A
