"""Closed-form kernels, the inequalities built on them, and a randomized self-test battery."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import gauss_legendre
from .operators import build_X, lowest_eigenpairs, potential_grid, r_func, sign_vector
from .potential import RadialPotential, random_potential

DEFAULT_SEED = 20240917
BOUND_RTOL = 1e-12


class BoundViolation(ArithmeticError):
    pass


def _check_k(k: complex) -> complex:
    k = complex(k)
    if not k.imag > 0:
        raise ValueError(f"Im k must be > 0, got k = {k}")
    return k


def f_k_closed(y: float, k: complex) -> float:
    """(2 pi / Im k) e^{-Im k y} sin(Re k y) / (Re k y)."""
    k = _check_k(k)
    y = abs(float(y))
    return 2 * math.pi / k.imag * math.exp(-k.imag * y) * float(np.sinc(k.real * y / math.pi))


def _panels(a: float, b: float, width: float, order: int = 24):
    n = max(1, math.ceil((b - a) / width))
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, n + 1)
    h = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    return (mid[:, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - e^{-x}) / x, stable near 0."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1 - x / 2 + x * x / 6, -np.expm1(-safe) / safe)


def f_k_numeric(y: float, k: complex) -> complex:
    """Int e^{ik|x|}/|x| e^{-i conj(k)|x-y|}/|x-y| d^3x by quadrature.

    In bipolar coordinates s = |x|, t = |x - y| the volume element is
    (2 pi / y) s t ds dt over |s - y| <= t <= s + y; the t integral is done
    in closed form and the s integral by composite Gauss-Legendre. The
    1/y prefactor is cancelled analytically so tiny y stays accurate.
    """
    k = _check_k(k)
    y = abs(float(y))
    kb = k.conjugate()
    width = min(1.0 / abs(k), 1.0 / k.imag)
    s_end = y + 40.0 / k.imag
    # s >= y: t runs over [s - y, s + y]
    s, w = _panels(y, s_end, width)
    total = 4 * math.pi * np.sum(w * np.exp(1j * k * s - 1j * kb * (s - y)) * _phi1(2j * kb * y))
    if y > 0.0:
        # s = y u, u in [0, 1]: t runs over [y - s, y + s]
        u, wu = _panels(0.0, 1.0, min(width / y, 0.5))
        s = y * u
        total += 4 * math.pi * y * np.sum(wu * u * np.exp(1j * k * s - 1j * kb * (y - s)) * _phi1(2j * kb * s))
    return complex(total)


@dataclass
class ClosedFormCheck:
    name: str
    analytic_value: complex
    numeric_value: complex
    abs_error: float = field(init=False)

    def __post_init__(self):
        self.abs_error = abs(self.analytic_value - self.numeric_value)


def _one_minus_sinc(x: float) -> float:
    if abs(x) < 1e-2:
        x2 = x * x
        return x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42))
    return 1.0 - math.sin(x) / x


def f_k_drop(y: float, k: complex) -> float:
    """F_k(0) - F_k(y) without cancellation at small |y|."""
    k = _check_k(k)
    y = abs(float(y))
    b = k.imag
    # 1 - e^{-by} sinc(ay) = (1 - e^{-by}) + e^{-by} (1 - sinc(ay))
    return 2 * math.pi / b * (-math.expm1(-b * y) + math.exp(-b * y) * _one_minus_sinc(k.real * y))


def f_k_check(y: float, k: complex) -> ClosedFormCheck:
    return ClosedFormCheck(f"F_k(y={y:g}, k={complex(k)})", f_k_closed(y, k), f_k_numeric(y, k))


def _slack(bound: float) -> float:
    return BOUND_RTOL * max(abs(bound), 1e-300) + 1e-300


def g_difference_l2(y: float, k: complex) -> tuple[float, float]:
    """||g_k(. - y) - g_k||^2 and its linear-in-|y| upper bound; raises on violation."""
    k = _check_k(k)
    y = abs(float(y))
    value = 2.0 / (4 * math.pi) ** 2 * f_k_drop(y, k)
    bound = (1 + abs(k.real) / (2 * k.imag)) * y / (4 * math.pi)
    if value > bound + _slack(bound):
        raise BoundViolation(f"g-difference {value:.17g} exceeds bound {bound:.17g} at y={y}, k={k}")
    return value, bound


def _dist(p) -> float:
    return float(np.linalg.norm(np.atleast_1d(np.asarray(p, dtype=float))))


def omega_bound(z_norm: float, w_norm: float, k: complex) -> float:
    """2 pi (1 + |Re k| / (2 Im k)) (|z| + |w|), from Cauchy-Schwarz and the g-difference bound."""
    k = complex(k)
    return 2 * math.pi * (1 + abs(k.real) / (2 * k.imag)) * (z_norm + w_norm)


def omega_k(z, w, k: complex) -> float:
    """F_k(w - z) + F_k(0) - F_k(w) - F_k(z); raises if the |z| + |w| bound fails.

    ``z`` and ``w`` are 3-vectors, or scalars read as points on one ray.
    """
    k = _check_k(k)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    nz, nw, nd = _dist(z), _dist(w), _dist(w - z)
    # F(w-z) + F(0) - F(w) - F(z) regrouped as differences from F(0)
    val = f_k_drop(nw, k) + f_k_drop(nz, k) - f_k_drop(nd, k)
    bound = omega_bound(nz, nw, k)
    if abs(val) > bound + _slack(bound):
        raise BoundViolation(f"|Omega_k| = {abs(val):.17g} exceeds bound {bound:.17g}")
    return val


def _plus_minus_X(V: RadialPotential, grid):
    X = build_X(V, grid).matrix
    J = sign_vector(V, grid)
    plus = (J > 0).astype(float)
    minus = 1.0 - plus
    return X, J, plus[:, None] * X * plus[None, :], minus[:, None] * X * minus[None, :]


def lemma1_check(V: RadialPotential, grid, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sqrt2 ||phi|| ||(J + X) phi||, <phi, (X+ + 1 - X-) phi>) for one vector or columns of ``phi``."""
    X, J, Xp, Xm = _plus_minus_X(V, grid)
    phi = np.asarray(phi)
    single = phi.ndim == 1
    P = phi[:, None] if single else phi
    norms = np.linalg.norm(P, axis=0)
    lhs = math.sqrt(2) * norms * np.linalg.norm(J[:, None] * P + X @ P, axis=0)
    rhs = np.real(np.sum(P.conj() * ((Xp - Xm) @ P), axis=0)) + norms**2
    return (lhs[0], rhs[0]) if single else (lhs, rhs)


# ---------------------------------------------------------------------------
# battery


@dataclass
class BatteryItem:
    name: str
    samples: int
    violations: int
    worst: float
    detail: str

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class BatteryReport:
    seed: int
    items: list[BatteryItem]

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def lines(self) -> list[str]:
        out = [f"seed = {self.seed}"]
        for it in self.items:
            out.append(f"{'PASS' if it.passed else 'FAIL'} {it.name}: {it.samples} samples, "
                       f"{it.violations} violations, {it.detail} {it.worst:.3e}")
        return out


def _random_k(rng: np.random.Generator, n: int, im_min: float = 0.3) -> np.ndarray:
    return rng.uniform(-2, 2, n) + 1j * rng.uniform(im_min, 2.0, n)


def run_battery(
    seed: int = DEFAULT_SEED,
    fk_samples: int = 10,
    bound_samples: int = 1000,
    r_samples: int = 1000,
    lemma_potentials: int = 10,
    lemma_vectors: int = 1000,
    fk_tol: float = 1e-8,
) -> BatteryReport:
    rng = np.random.default_rng(seed)
    items = []

    ks = _random_k(rng, fk_samples)
    ys = rng.uniform(0, 3, fk_samples)
    errs = [f_k_check(y, k).abs_error for y, k in zip(ys, ks)]
    items.append(BatteryItem("F_k closed form vs quadrature", fk_samples, int(np.sum(np.array(errs) > fk_tol)),
                             max(errs), "max abs error"))

    ks = _random_k(rng, bound_samples, 0.05)
    ys = rng.uniform(0, 10, bound_samples)
    bad, worst = 0, 0.0
    for y, k in zip(ys, ks):
        try:
            v, b = g_difference_l2(y, k)
            worst = max(worst, v / b if b > 0 else 0.0)
        except BoundViolation:
            bad += 1
    items.append(BatteryItem("g-difference bound", bound_samples, bad, worst, "max value/bound"))

    ks = _random_k(rng, bound_samples, 0.05)
    zs = rng.normal(size=(bound_samples, 3)) * rng.uniform(0, 5, (bound_samples, 1))
    ws = rng.normal(size=(bound_samples, 3)) * rng.uniform(0, 5, (bound_samples, 1))
    bad, worst = 0, 0.0
    for z, w, k in zip(zs, ws, ks):
        try:
            val = omega_k(z, w, k)
            b = omega_bound(_dist(z), _dist(w), k)
            worst = max(worst, abs(val) / b if b > 0 else 0.0)
        except BoundViolation:
            bad += 1
    items.append(BatteryItem("Omega_k bound", bound_samples, bad, worst, "max |Omega|/bound"))

    mod = 10.0 ** rng.uniform(-4, 2, r_samples)
    ang = rng.uniform(math.pi / 2, 3 * math.pi / 2, r_samples)
    z = mod * np.exp(1j * ang)
    ratio = np.abs(r_func(z)) / np.abs(z)
    items.append(BatteryItem("|r(z)| <= |z|/2 on Re z <= 0", r_samples,
                             int(np.sum(ratio > 0.5 * (1 + BOUND_RTOL))), float(ratio.max()), "max |r(z)|/|z|"))

    bad, worst = 0, -math.inf
    for _ in range(lemma_potentials):
        V = random_potential(rng)
        grid = potential_grid(V)
        phi = rng.normal(size=(grid.size, lemma_vectors)) + 1j * rng.normal(size=(grid.size, lemma_vectors))
        lhs, rhs = lemma1_check(V, grid, phi)
        slack = 1e-12 * np.linalg.norm(phi, axis=0) ** 2
        bad += int(np.sum(lhs < rhs - slack))
        worst = max(worst, float(np.max((rhs - lhs) / np.linalg.norm(phi, axis=0) ** 2)))
    items.append(BatteryItem("sign inequality for J + X", lemma_potentials * lemma_vectors, bad, worst,
                             "max (rhs - lhs)/||phi||^2"))
    return BatteryReport(seed, items)


def eigenvector_lemma1(V: RadialPotential) -> tuple[float, float, float]:
    """(lhs, rhs, sqrt2 |e| ||phi||^2) for the lowest eigenvector of 1 + J X."""
    grid = potential_grid(V)
    spec = lowest_eigenpairs(V, grid)
    lhs, rhs = lemma1_check(V, grid, spec.phi)
    return lhs, rhs, math.sqrt(2) * abs(spec.e_ell) * float(np.linalg.norm(spec.phi)) ** 2
