"""Resolvent-difference norms, proof-quantity diagnostics and rate fits."""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from .grid import RadialGrid, extend_grid, nystrom_matrix
from .operators import (KernelOp, OperatorError, SpectralData, build_Bk, build_R, build_X_p_wave,
                        free_green, kernel_matrix, lowest_eigenpairs, node_values, op_norm,
                        potential_grid, reduced_vectors, sign_vector)
from .potential import RadialPotential, loglog_fit, moment
from .scattering import bound_state_energy, point_bound_state

log = logging.getLogger(__name__)

DEFAULT_K = 2j
TAIL_FACTOR = 18.0
R2_DROP_THRESHOLD = 0.98


class LimitError(ValueError):
    pass


def _check_k(k: complex) -> complex:
    k = complex(k)
    if not k.imag > 0:
        raise LimitError(f"Im k must be > 0, got k = {k}")
    return k


def point_coefficient(a: float, k: complex) -> complex:
    """1 / (1/a + ik), read as 0 for a = 0; raises at the pole k = i/a."""
    if a == 0:
        return 0.0
    if math.isinf(a):
        return 1.0 / (1j * k)
    denom = 1.0 / a + 1j * k
    if abs(denom) <= 1e-12 * max(1.0, abs(1.0 / a)):
        raise LimitError(f"k = {k} coincides with the pole i/a (a = {a})")
    return 1.0 / denom


def _real_if(z: np.ndarray, k: complex) -> np.ndarray:
    return z.real if k.real == 0 and np.iscomplexobj(z) else z


def outer_grid(inner: RadialGrid, k: complex, tail_factor: float = TAIL_FACTOR) -> RadialGrid:
    """Extend ``inner`` to ``R_V + tail_factor / Im k`` with panels of width 1/|k|."""
    k = _check_k(k)
    return extend_grid(inner, inner.r_max + tail_factor / k.imag, 1.0 / abs(k))


def tail_bound(inner: RadialGrid, outer: RadialGrid, k: complex) -> float:
    """Relative size e^{-2 Im k (R_max - R_V)} of the truncated kernel tail."""
    return math.exp(-2.0 * complex(k).imag * (outer.r_max - inner.r_max))


def _rank_one(gk: np.ndarray) -> np.ndarray:
    return 4.0 * math.pi * np.outer(gk, gk)


def target_resolvent(k: complex, a: float, outer: RadialGrid) -> KernelOp:
    """Reduced point-interaction resolvent ``G_k(r, r') - e^{ik(r + r')} / (1/a + ik)``."""
    k = _check_k(k)
    M = kernel_matrix(outer, outer, free_green(k))
    coef = point_coefficient(a, k)
    if coef != 0:
        gk = outer.to_basis(np.exp(1j * k * outer.nodes) / math.sqrt(4 * math.pi))
        M = M - coef * _rank_one(_real_if(gk, k))
    return KernelOp(_real_if(np.asarray(M), k), outer, f"T({k},{a})")


@dataclass
class _Pieces:
    """Shared matrices for one (V, k) on an inner/outer grid pair."""

    one: np.ndarray  # (1) = G_k |V|^1/2, inner -> outer
    three: np.ndarray  # (3) = V^1/2 G_k, outer -> inner
    Bk: np.ndarray
    B0: np.ndarray
    v_sgn: np.ndarray
    v_abs: np.ndarray
    gk: np.ndarray  # on the outer grid


def _pieces(V: RadialPotential, inner: RadialGrid, outer: RadialGrid, k: complex) -> _Pieces:
    n = inner.size
    if not np.allclose(outer.nodes[:n], inner.nodes, rtol=0, atol=0):
        raise LimitError("outer grid must start with the inner grid nodes")
    root = np.sqrt(np.abs(node_values(V, inner)))
    J = sign_vector(V, inner)
    g = free_green(k)
    one = kernel_matrix(outer, inner, g, None, root)
    three = kernel_matrix(inner, outer, g, J * root, None)
    vec = reduced_vectors(V, inner)
    gk = reduced_vectors(V, outer, k).gk
    return _Pieces(one, three, build_Bk(V, inner, k).matrix, build_Bk(V, inner, 0).matrix,
                   vec.v_sgn, vec.v_abs, gk)


def _lu(M: np.ndarray):
    A = np.eye(M.shape[0]) + M
    lu = sla.lu_factor(A, check_finite=False)
    piv = np.abs(np.diag(lu[0]))
    if piv.min() <= 1e-14 * piv.max():
        raise OperatorError("1 + B is numerically singular")
    return lu


def resolvent_difference_norm(
    V: RadialPotential,
    inner: RadialGrid,
    outer: RadialGrid,
    k: complex = DEFAULT_K,
    a: float = 1.0,
) -> tuple[float, str]:
    """Operator norm of (p^2 + V - k^2)^-1 - (point resolvent with length a).

    Assembled as ``-(1) (1 + B_k)^-1 (3) + e^{ik(r+r')}/(1/a + ik)`` on the
    outer grid; the free resolvent cancels exactly.
    """
    k = _check_k(k)
    coef = point_coefficient(a, k)
    if V.is_zero:
        gk = reduced_vectors(V, outer, k).gk
        D = coef * _rank_one(gk)
    else:
        P = _pieces(V, inner, outer, k)
        D = -P.one @ sla.lu_solve(_lu(P.Bk), P.three, check_finite=False) + coef * _rank_one(P.gk)
    note = f"R_max={outer.r_max:.6g}, tail <= {tail_bound(inner, outer, k):.2e} (relative)"
    return op_norm(np.asarray(D)), note


@dataclass
class ConvergenceRecord:
    ell: float
    e_ell: float
    e_ell_minus: float
    a_bs: float
    D_norm: float
    Q_norm: float
    Q_solve_norm: float
    inv_proj_norm: float
    I_defect: float
    II_norm: float
    rank1_defect_a: float
    rank1_defect_b: float
    cor4_m1: float
    cor4_m2: float
    cor4_m3: float
    cor4_m4: float
    J_phi_phi: float
    bound_E: float
    eigfn_dist: float
    hw_bound: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Decomposition:
    a_bs: float
    Q_norm: float
    Q_solve_norm: float
    inv_proj_norm: float
    I_defect: float
    II_norm: float
    rank1_defect_a: float
    rank1_defect_b: float
    D_factorized: float  # ||I + II + point term|| with the same a as D_norm
    D_direct: float


def lemma_decomposition(
    V: RadialPotential,
    inner: RadialGrid,
    outer: RadialGrid,
    k: complex,
    spec: SpectralData,
    a: float | None = None,
) -> Decomposition:
    """Measure the pieces of the resolvent expansion around 1 + B.

    With c = 1/(4 pi/(ik) + 4 pi a(V)) and T = 1 - c (1+B)^-1 |V^1/2><|V|^1/2|:
    (1 + B_k)^-1 = T (1 + Q)^-1 (1 + B)^-1 with Q = (1+B)^-1 R T,
    I = -(1) T (1+B)^-1 (3) and II = (1) T (1+Q)^-1 Q (1+B)^-1 (3).
    ``a`` is the length in the comparison resolvent (defaults to a(V)).
    """
    k = _check_k(k)
    P = _pieces(V, inner, outer, k)
    n = inner.size
    lu0 = _lu(P.B0)
    inv_v = sla.lu_solve(lu0, P.v_sgn, check_finite=False)
    a_bs = float(P.v_abs @ inv_v) / (4.0 * math.pi)
    denom = 4 * math.pi / (1j * k) + 4 * math.pi * a_bs
    if abs(denom) <= 1e-12 * abs(4 * math.pi / k):
        raise LimitError("a(V) = i/k: the rank-one update is not invertible")
    c = 1.0 / denom
    T = np.eye(n) - c * np.outer(inv_v, P.v_abs)
    R = build_R(V, inner, k).matrix
    Q = sla.lu_solve(lu0, R, check_finite=False) @ T
    Q = _real_if(Q, k)
    T = _real_if(T, k)

    inv_three = sla.lu_solve(lu0, P.three, check_finite=False)  # (1+B)^-1 (3)
    Q_inv_three = Q @ inv_three
    I_op = -P.one @ (T @ inv_three)
    II_op = P.one @ (T @ np.linalg.solve(np.eye(n) + Q, Q_inv_three))

    coef_V = point_coefficient(a_bs, k)
    I_defect = op_norm(I_op + coef_V * _rank_one(P.gk))

    J = sign_vector(V, inner)
    phi = spec.phi
    Pl = np.outer(phi, J * phi) / (phi @ (J * phi))
    inv_proj = sla.lu_solve(lu0, np.eye(n) - Pl, check_finite=False)

    diff = P.one - np.outer(P.gk, P.v_abs)
    r1a = float(np.linalg.norm(diff @ inv_v))
    r1b = op_norm(diff @ inv_three)

    a_cmp = a_bs if a is None else a
    coef = point_coefficient(a_cmp, k)
    D_fact = op_norm(I_op + II_op + coef * _rank_one(P.gk))
    D_dir = op_norm(-P.one @ sla.lu_solve(_lu(P.Bk), P.three, check_finite=False) + coef * _rank_one(P.gk))
    return Decomposition(a_bs, op_norm(Q), op_norm(Q_inv_three), op_norm(inv_proj), I_defect,
                         op_norm(II_op), r1a, r1b, D_fact, D_dir)


def corollary_metrics(V: RadialPotential, spec: SpectralData, grid: RadialGrid) -> tuple[float, float, float, float, float]:
    """(int|x||V|, |<J phi|phi> + 1|, <|V|^1/2, |phi|>, int |x| |V|^1/2 |phi|, <J phi|phi>)."""
    J = sign_vector(V, grid)
    phi = spec.phi / np.linalg.norm(spec.phi)
    jpp = float(np.real(np.vdot(J * phi, phi)))
    v_abs = reduced_vectors(V, grid).v_abs
    m3 = float(v_abs @ np.abs(phi))
    m4 = float((grid.nodes * v_abs) @ np.abs(phi))
    return moment(V, 1, "full"), abs(jpp + 1.0), m3, m4, jpp


def higher_wave_bound(V: RadialPotential, grid: RadialGrid) -> float:
    """Operator norm of the l = 1 analogue of X."""
    if V.is_zero:
        return 0.0
    return op_norm(build_X_p_wave(V, grid))


def higher_wave_margin(V: RadialPotential, grid: RadialGrid) -> float:
    """Lowest eigenvalue of 1 + J X^(1); resonance in the p-wave sector would drive it to 0."""
    from .operators import _sqrt_psd

    X1 = build_X_p_wave(V, grid).matrix
    J = sign_vector(V, grid)
    S = _sqrt_psd(X1)
    return float(np.linalg.eigvalsh(np.eye(grid.size) + S @ (J[:, None] * S))[0])


# ---------------------------------------------------------------------------
# sweeps


def analyze(
    V: RadialPotential,
    ell: float,
    k: complex = DEFAULT_K,
    a_star: float = 1.0,
    points_per_segment: int | None = None,
    order: int | None = None,
    tail_factor: float = TAIL_FACTOR,
) -> ConvergenceRecord:
    """All diagnostics for one potential of a sweep."""
    k = _check_k(k)
    kw = {}
    if points_per_segment is not None:
        kw["points_per_segment"] = points_per_segment
    if order is not None:
        kw["order"] = order
    inner = potential_grid(V, **kw)
    outer = outer_grid(inner, k, tail_factor)
    spec = lowest_eigenpairs(V, inner)
    dec = lemma_decomposition(V, inner, outer, k, spec, a=a_star)
    D_norm, _ = resolvent_difference_norm(V, inner, outer, k, a_star)
    m1, m2, m3, m4, jpp = corollary_metrics(V, spec, inner)

    bound_E = eig_dist = math.nan
    bs = bound_state_energy(V, inner, tail_factor=tail_factor)
    if bs is not None:
        bound_E = bs.energy
        if a_star > 0:
            r_need = inner.r_max + tail_factor * max(a_star, 1.0 / bs.kappa)
            grid = bs.grid
            if grid.r_max < r_need:
                bs = bound_state_energy(V, inner, tail_factor=(r_need - inner.r_max) * bs.kappa)
                grid = bs.grid
            eig_dist = float(np.linalg.norm(bs.psi - point_bound_state(a_star, grid)))

    return ConvergenceRecord(
        ell=ell, e_ell=spec.e_ell, e_ell_minus=spec.e_ell_minus, a_bs=dec.a_bs, D_norm=D_norm,
        Q_norm=dec.Q_norm, Q_solve_norm=dec.Q_solve_norm, inv_proj_norm=dec.inv_proj_norm,
        I_defect=dec.I_defect, II_norm=dec.II_norm, rank1_defect_a=dec.rank1_defect_a,
        rank1_defect_b=dec.rank1_defect_b, cor4_m1=m1, cor4_m2=m2, cor4_m3=m3, cor4_m4=m4,
        J_phi_phi=jpp, bound_E=bound_E, eigfn_dist=eig_dist, hw_bound=higher_wave_bound(V, inner))


def _analyze_job(args) -> ConvergenceRecord:
    with threadpool_limits(limits=1):
        return analyze(*args)


def run_sweep(sweep, k: complex = DEFAULT_K, a_star: float | None = None, jobs: int = 1) -> list[ConvergenceRecord]:
    """Analyze every entry of a :class:`~contactlimit.tuner.TunedSweep`.

    Rows are independent; with ``jobs > 1`` they run in worker processes
    and are merged in ell order.  BLAS is pinned to one thread per row so
    the output does not depend on the worker count.
    """
    if a_star is None:
        if sweep.target.kind != "a":
            raise LimitError("a_star is required for sweeps not tuned to a fixed scattering length")
        a_star = sweep.target.value
    args = [(e.potential, e.ell, k, a_star, sweep.points_per_segment, sweep.order) for e in sweep.entries]
    if jobs <= 1:
        return [_analyze_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_analyze_job, args))


@dataclass
class RateFit:
    exponent: float
    intercept: float
    r_squared: float
    points: int
    dropped_first: bool = False


def fit_rate(records: Sequence[ConvergenceRecord], field: str, drop_transient: bool = True) -> RateFit:
    """Least-squares slope of log(field) against log|e_ell|."""
    if len(records) < 4:
        raise LimitError(f"fit_rate needs >= 4 records, got {len(records)}")
    if field not in ConvergenceRecord.columns():
        raise LimitError(f"unknown field {field!r}")
    pairs = [(abs(r.e_ell), getattr(r, field)) for r in records]
    good = [(x, y) for x, y in pairs if math.isfinite(y) and y > 0 and x > 0]
    if len(good) < len(pairs):
        warnings.warn(f"fit_rate({field}): excluded {len(pairs) - len(good)} non-positive values", stacklevel=2)
    if len(good) < 2:
        raise LimitError(f"fit_rate({field}): fewer than 2 positive values")
    fit = loglog_fit(*zip(*good))
    dropped = False
    if drop_transient and fit.r_squared < R2_DROP_THRESHOLD and len(good) > 4:
        fit = loglog_fit(*zip(*good[1:]))
        dropped = True
        log.info("fit_rate(%s): dropped largest-ell point (r2 < %.2f)", field, R2_DROP_THRESHOLD)
    return RateFit(fit.exponent, fit.intercept, fit.r_squared, fit.n, dropped)
