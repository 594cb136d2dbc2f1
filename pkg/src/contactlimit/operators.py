"""Reduced (s-wave) Birman-Schwinger kernels on Nystrom grids.

Radial functions f on R^3 are represented by u(r) = sqrt(4 pi) r f(r) in
L^2((0, inf), dr).  In this picture 1/(p^2 - k^2) has the kernel
``sin(k r<) exp(i k r>) / k`` (``min(r, r')`` at k = 0), and multiplication
operators act unchanged.  Matrices are stored in the symmetrized basis
``M_ij = sqrt(w_i) K(r_i, r_j) sqrt(w_j)`` so that Euclidean norms are L^2
norms; diagonal panels use the product-integration rule of
:func:`contactlimit.grid.nystrom_matrix`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla

from .grid import (DEFAULT_ORDER, DEFAULT_POINTS_PER_SEGMENT, RadialGrid, build_grid,
                   nystrom_matrix)
from .potential import RadialPotential

SQRT4PI = math.sqrt(4.0 * math.pi)
DEGENERACY_RTOL = 1e-8
SERIES_CUTOFF = 0.5  # |k| r> below which the R-kernel uses its Taylor series
SERIES_TERMS = 30


class OperatorError(ValueError):
    pass


class SingularOperatorError(OperatorError):
    pass


class DegenerateEigenvalueError(OperatorError):
    pass


# ---------------------------------------------------------------------------
# grids and nodal data


def potential_grid(
    V: RadialPotential,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    order: int = DEFAULT_ORDER,
) -> RadialGrid:
    """Inner grid on ``[0, R_V]`` with panel edges at every discontinuity.

    Repulsive segments much wider than their decay length ``1/sqrt(V)`` get
    panels graded toward both ends, where the zero-energy solution lives.
    """
    scales = [1.0 / math.sqrt(v) if v > 0 else None for _, _, v in V.segments]
    return build_grid(V.breakpoints, V.support_radius, points_per_segment, order, scales)


def node_values(V: RadialPotential, grid: RadialGrid) -> np.ndarray:
    return V(grid.nodes)


def sign_vector(V: RadialPotential, grid: RadialGrid) -> np.ndarray:
    """J on the nodes (+1 where V >= 0)."""
    return np.where(node_values(V, grid) >= 0, 1.0, -1.0)


def _check_grid(V: RadialPotential, grid: RadialGrid) -> None:
    if grid.r_max < V.support_radius * (1 - 1e-14):
        raise OperatorError(f"grid r_max {grid.r_max} does not cover supp V (R_V = {V.support_radius})")
    inner = grid.edges[grid.edges <= V.support_radius * (1 + 1e-14)]
    for b in V.breakpoints + [V.support_radius]:
        if not np.any(np.isclose(inner, b, rtol=1e-13, atol=0.0)):
            raise OperatorError(f"potential discontinuity r = {b} is not a panel edge")


# ---------------------------------------------------------------------------
# reduced Green kernels


def free_green(k: complex):
    """Reduced kernel of 1/(p^2 - k^2); real-valued when Re k = 0."""
    k = complex(k)
    if k == 0:
        return lambda r, s: np.minimum(r, s)
    if k.imag < 0:
        raise OperatorError(f"Im k must be >= 0, got k = {k}")

    def g(r, s):
        lo, hi = np.minimum(r, s), np.maximum(r, s)
        val = np.exp(1j * k * (hi - lo)) * np.expm1(2j * k * lo) / (2j * k)
        return val.real if k.real == 0 else val

    return g


def _free_series_remainder(lo, hi, k: complex, start: int):
    """sum_{j >= start} k^j c_j(lo, hi) of the Taylor series of sin(k lo) e^{ik hi} / k."""
    out = np.zeros(np.broadcast(lo, hi).shape, dtype=complex)
    for m in range(SERIES_TERMS // 2 + 1):
        sin_term = (-1) ** m * lo ** (2 * m + 1) / math.factorial(2 * m + 1)
        for n in range(SERIES_TERMS - 2 * m + 1):
            if 2 * m + n < start:
                continue
            out += sin_term * (1j * hi) ** n / math.factorial(n) * k ** (2 * m + n)
    return out


def r_kernel(k: complex):
    """Reduced kernel of the remainder ``g_k - g_0 - ik/4pi``.

    Equals ``sin(k r<) e^{ik r>}/k - r< - ik r< r>``; evaluated by Taylor
    series where ``|k| r>`` is small to avoid cancellation.
    """
    k = complex(k)
    g = free_green(k)

    def rk(r, s):
        lo, hi = np.minimum(r, s), np.maximum(r, s)
        lo, hi = np.broadcast_arrays(lo, hi)
        shape = lo.shape
        lo, hi = lo.ravel(), hi.ravel()
        direct = np.asarray(g(lo, hi), dtype=complex) - lo - 1j * k * lo * hi
        small = abs(k) * hi < SERIES_CUTOFF
        if np.any(small):
            direct[small] = _free_series_remainder(lo[small], hi[small], k, 2)
        direct = direct.reshape(shape)
        return direct.real if k.real == 0 else direct

    return rk


def p_wave_green(r, s):
    """Reduced kernel of 1/p^2 in the l = 1 sector: r<^2 / (3 r>)."""
    lo, hi = np.minimum(r, s), np.maximum(r, s)
    return lo**2 / (3.0 * hi)


def r_func(z):
    """r(z) = (e^z - 1 - z) / z, with a Taylor branch for |z| < 1e-2."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-2
    zs = z[small]
    out[small] = zs / 2 + zs**2 / 6 + zs**3 / 24 + zs**4 / 120 + zs**5 / 720 + zs**6 / 5040
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / zb
    return out


# ---------------------------------------------------------------------------
# kernel operators


@dataclass(frozen=True, eq=False)
class KernelOp:
    """Dense matrix in the symmetrized Nystrom basis."""

    matrix: np.ndarray
    grid: RadialGrid
    tag: str = "custom"
    col_grid: RadialGrid | None = None

    @property
    def cols(self) -> RadialGrid:
        return self.col_grid if self.col_grid is not None else self.grid

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, KernelOp):
            return KernelOp(self.matrix @ other.matrix, self.grid, "custom", other.cols)
        return self.matrix @ other

    def __add__(self, other: "KernelOp") -> "KernelOp":
        return KernelOp(self.matrix + other.matrix, self.grid, "custom", self.col_grid)

    def __sub__(self, other: "KernelOp") -> "KernelOp":
        return KernelOp(self.matrix - other.matrix, self.grid, "custom", self.col_grid)


def kernel_matrix(rows: RadialGrid, cols: RadialGrid, green, left=None, right=None) -> np.ndarray:
    """Symmetrized matrix of ``left(r) green(r, s) right(s)``.

    ``left``/``right`` are nodal multipliers, constant on each panel.
    """
    A = nystrom_matrix(rows.nodes, cols, green)
    if left is not None:
        A = left[:, None] * A
    if right is not None:
        A = A * right[None, :]
    return rows.sqrt_weights[:, None] * A / cols.sqrt_weights[None, :]


def build_X(V: RadialPotential, grid: RadialGrid, part: Literal["full", "minus", "plus"] = "full") -> KernelOp:
    """X = |V|^1/2 p^-2 |V|^1/2 (or its restriction to V+ / V-)."""
    _check_grid(V, grid)
    root = np.sqrt(np.abs(node_values(V, grid)))
    M = kernel_matrix(grid, grid, free_green(0), root, root)
    M = 0.5 * (M + M.T)
    if part != "full":
        vals = node_values(V, grid)
        if part == "minus":
            mask = vals < 0
        elif part == "plus":
            mask = vals > 0
        else:
            raise OperatorError(f"unknown part {part!r}")
        M = M * mask[:, None] * mask[None, :]
    return KernelOp(M, grid, "X" if part == "full" else "X" + part)


def build_Bk(V: RadialPotential, grid: RadialGrid, k: complex = 0) -> KernelOp:
    """B_k = V^1/2 (p^2 - k^2)^-1 |V|^1/2; at k = 0 this is J X."""
    k = complex(k)
    if k.imag < 0:
        raise OperatorError(f"Im k must be >= 0, got k = {k}")
    _check_grid(V, grid)
    if k == 0:
        X = build_X(V, grid)
        return KernelOp(sign_vector(V, grid)[:, None] * X.matrix, grid, "B0")
    root = np.sqrt(np.abs(node_values(V, grid)))
    M = kernel_matrix(grid, grid, free_green(k), sign_vector(V, grid) * root, root)
    return KernelOp(M, grid, f"Bk({k})")


def build_R(V: RadialPotential, grid: RadialGrid, k: complex) -> KernelOp:
    """Remainder operator R = B_k - B_0 - (ik/4pi) |V^1/2><|V|^1/2|."""
    k = complex(k)
    if not k.imag > 0:
        raise OperatorError(f"build_R needs Im k > 0, got k = {k}")
    _check_grid(V, grid)
    root = np.sqrt(np.abs(node_values(V, grid)))
    M = kernel_matrix(grid, grid, r_kernel(k), sign_vector(V, grid) * root, root)
    return KernelOp(M, grid, f"R({k})")


def build_X_p_wave(V: RadialPotential, grid: RadialGrid) -> KernelOp:
    _check_grid(V, grid)
    root = np.sqrt(np.abs(node_values(V, grid)))
    M = kernel_matrix(grid, grid, p_wave_green, root, root)
    return KernelOp(0.5 * (M + M.T), grid, "X1")


@dataclass(frozen=True, eq=False)
class ReducedVectors:
    v_sgn: np.ndarray
    v_abs: np.ndarray
    gk: np.ndarray | None


def reduced_vectors(V: RadialPotential, grid: RadialGrid, k: complex | None = None) -> ReducedVectors:
    """|V|^1/2, V^1/2 and g_k as L^2(dr) vectors (symmetrized basis).

    ``g_k`` is sampled on ``grid`` (which may extend past supp V); it is
    omitted when ``k`` is None.
    """
    r = grid.nodes
    vals = node_values(V, grid)
    root = np.sqrt(np.abs(vals))
    J = np.where(vals >= 0, 1.0, -1.0)
    v_abs = grid.to_basis(SQRT4PI * r * root)
    v_sgn = J * v_abs
    gk = None
    if k is not None:
        k = complex(k)
        if not k.imag > 0:
            raise OperatorError(f"g_k needs Im k > 0, got k = {k}")
        vals_g = np.exp(1j * k * r) / SQRT4PI
        gk = grid.to_basis(vals_g.real if k.real == 0 else vals_g)
    return ReducedVectors(v_sgn, v_abs, gk)


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Lowest eigen-data of 1 + J X and 1 - X^- on one grid.

    ``phi`` is the unit eigenvector of 1 + J X for ``e_ell`` in the
    symmetrized basis; ``spectrum`` holds all eigenvalues of 1 + J X
    (ascending), computed from the isospectral symmetric form.
    """

    e_ell: float
    e_ell_minus: float
    phi: np.ndarray
    gap: float
    residual: float
    spectrum: np.ndarray
    grid: RadialGrid
    n_negative: int


def _sqrt_psd(M: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(M)
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def lowest_eigenpairs(V: RadialPotential, grid: RadialGrid) -> SpectralData:
    if V.is_zero:
        raise OperatorError("lowest_eigenpairs needs a nonzero potential")
    X = build_X(V, grid).matrix
    J = sign_vector(V, grid)
    S = _sqrt_psd(X)
    A = np.eye(grid.size) + S @ (J[:, None] * S)
    A = 0.5 * (A + A.T)
    mu, psi = np.linalg.eigh(A)
    radius = max(np.abs(mu).max(), 1.0)
    if mu.size > 1 and mu[1] - mu[0] <= DEGENERACY_RTOL * radius:
        raise DegenerateEigenvalueError(
            f"lowest eigenvalue of 1 + B is degenerate: {mu[0]:.12g}, {mu[1]:.12g}")
    e = float(mu[0])

    B = J[:, None] * X
    phi = J * (S @ psi[:, 0])
    phi /= np.linalg.norm(phi)
    residual = float(np.linalg.norm(phi + B @ phi - e * phi))
    tol = 1e-8 * radius
    if residual > tol:
        # direct nonsymmetric solve on the eigenvalue closest to e
        ev, vecs = np.linalg.eig(np.eye(grid.size) + B)
        j = int(np.argmin(np.abs(ev - e)))
        cand = np.real(vecs[:, j])
        cand /= np.linalg.norm(cand)
        res2 = float(np.linalg.norm(cand + B @ cand - e * cand))
        if res2 < residual:
            phi, residual = cand, res2
    j = int(np.argmax(np.abs(phi)))
    if phi[j] < 0:
        phi = -phi

    vals = node_values(V, grid)
    if np.any(vals < 0):
        Xm = X * (vals < 0)[:, None] * (vals < 0)[None, :]
        e_minus = float(1.0 - np.linalg.eigvalsh(Xm)[-1])
    else:
        e_minus = 1.0
    absmu = np.sort(np.abs(mu))
    gap = float(absmu[1]) if absmu.size > 1 else math.inf
    return SpectralData(e, e_minus, phi, gap, residual, mu, grid, int(np.sum(mu < 0)))


def projector_P(spec: SpectralData, V: RadialPotential, grid: RadialGrid, tol: float = 1e-12) -> KernelOp:
    """Rank-one P = |phi><J phi| / <J phi|phi> (bilinear pairing)."""
    J = sign_vector(V, grid)
    phi = spec.phi
    Jphi = J * phi
    norm = phi @ Jphi
    if abs(norm) < tol:
        raise OperatorError(f"<J phi|phi> = {norm:.3e} vanishes: P undefined")
    return KernelOp(np.outer(phi, Jphi) / norm, grid, "P")


# ---------------------------------------------------------------------------
# algebra


def op_norm(A) -> float:
    M = A.matrix if isinstance(A, KernelOp) else np.asarray(A)
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        return float(np.linalg.norm(M))
    return float(sla.svdvals(M, check_finite=False)[0])


def hs_norm(A) -> float:
    M = A.matrix if isinstance(A, KernelOp) else np.asarray(A)
    return float(np.linalg.norm(M))


def solve_one_plus(B, rhs, rtol: float = 1e-10):
    """Solve (1 + B) x = rhs with a residual check."""
    M = B.matrix if isinstance(B, KernelOp) else np.asarray(B)
    A = np.eye(M.shape[0]) + M
    rhs = np.asarray(rhs)
    try:
        lu = sla.lu_factor(A, check_finite=False)
    except (sla.LinAlgError, ValueError) as exc:  # pragma: no cover - LAPACK-level failure
        raise SingularOperatorError("1 + B is singular (e_ell ~ 0)") from exc
    piv = np.abs(np.diag(lu[0]))
    if piv.min() <= 1e-14 * max(piv.max(), 1.0):
        raise SingularOperatorError(
            f"1 + B is numerically singular (pivot ratio {piv.min() / piv.max():.2e}): e_ell ~ 0")
    x = sla.lu_solve(lu, rhs, check_finite=False)
    res = np.linalg.norm(A @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > rtol * max(1.0, np.linalg.norm(A, 1)):
        raise SingularOperatorError(f"solve residual {res:.2e} too large: e_ell ~ 0")
    return x
