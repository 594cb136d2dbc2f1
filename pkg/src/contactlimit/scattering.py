"""Scattering length (two independent routes) and the bound-state energy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .grid import RadialGrid, extend_grid, nystrom_matrix
from .operators import (SQRT4PI, OperatorError, SingularOperatorError, _sqrt_psd, build_Bk,
                        build_X, free_green, node_values, potential_grid, reduced_vectors,
                        sign_vector, solve_one_plus)
from .potential import RadialPotential

IMAG_RTOL = 1e-8


class ResonanceError(ArithmeticError):
    """The potential is resonant: a(V) is infinite."""


@dataclass(frozen=True)
class ScatteringResult:
    a: float
    method: Literal["bs", "ode"]
    refinement_error: float
    imag_residue: float = 0.0


def _bs_value(V: RadialPotential, grid: RadialGrid) -> complex:
    B = build_Bk(V, grid, 0)
    vec = reduced_vectors(V, grid)
    try:
        x = solve_one_plus(B, vec.v_sgn)
    except SingularOperatorError as exc:
        raise ResonanceError(f"resonant potential: a infinite ({exc})") from exc
    return complex(vec.v_abs @ x) / (4.0 * math.pi)


def scattering_length_bs(V: RadialPotential, grid: RadialGrid | None = None) -> ScatteringResult:
    """a(V) = <|V|^1/2, (1 + B)^-1 V^1/2> / 4 pi on ``grid`` and on its refinement."""
    if V.is_zero:
        return ScatteringResult(0.0, "bs", 0.0)
    if grid is None:
        grid = potential_grid(V)
    a = _bs_value(V, grid)
    a_fine = _bs_value(V, grid.refine())
    if abs(a.imag) > IMAG_RTOL * max(abs(a.real), 1e-300):
        raise OperatorError(f"imaginary residue {a.imag:.3e} in a_bs: broken symmetrization")
    return ScatteringResult(a.real, "bs", abs(a.real - a_fine.real), abs(a.imag))


def zero_energy_state(V: RadialPotential) -> tuple[float, float]:
    """(u, u') at r = R_V for -u'' + V u = 0, u(0) = 0, u'(0) = 1, up to a positive factor.

    Exact per-segment transfer matrices; the state is renormalized after each
    segment so steep repulsive cores cannot overflow.
    """
    u, du = 0.0, 1.0
    for a, b, v in V.segments:
        h = b - a
        if v > 0:
            q = math.sqrt(v)
            x = q * h
            # cosh/sinh scaled by e^{-x}
            ch, sh = 0.5 * (1 + math.exp(-2 * x)), 0.5 * (-math.expm1(-2 * x))
            u, du = ch * u + sh / q * du, q * sh * u + ch * du
        elif v < 0:
            q = math.sqrt(-v)
            c, s = math.cos(q * h), math.sin(q * h)
            u, du = c * u + s / q * du, -q * s * u + c * du
        else:
            u = u + h * du
        scale = math.hypot(u / max(b, 1e-300), du)
        u, du = u / scale, du / scale
    return u, du


def scattering_length_ode(V: RadialPotential) -> ScatteringResult:
    if V.is_zero:
        return ScatteringResult(0.0, "ode", 0.0)
    R = V.support_radius
    u, du = zero_energy_state(V)
    if abs(du) * R <= 1e-14 * abs(u):
        raise ResonanceError(f"resonant potential: u'(R_V) = {du:.3e}, a infinite")
    return ScatteringResult(R - u / du, "ode", 0.0)


# ---------------------------------------------------------------------------
# bound state


@dataclass(frozen=True, eq=False)
class BoundState:
    energy: float
    kappa: float
    psi: np.ndarray  # unit vector on ``grid`` (symmetrized basis)
    grid: RadialGrid
    count: int


def _lowest_at_kappa(V: RadialPotential, grid: RadialGrid, kappa: float) -> tuple[float, np.ndarray]:
    Bk = build_Bk(V, grid, 1j * kappa).matrix
    J = sign_vector(V, grid)
    Xk = J[:, None] * Bk  # PSD: Green kernel of -d^2 + kappa^2
    S = _sqrt_psd(0.5 * (Xk + Xk.T))
    A = np.eye(grid.size) + S @ (J[:, None] * S)
    mu, psi = np.linalg.eigh(0.5 * (A + A.T))
    return float(mu[0]), J * (S @ psi[:, 0])


def bound_state_energy(
    V: RadialPotential,
    grid: RadialGrid | None = None,
    tail_factor: float = 18.0,
    panel_width: float | None = None,
) -> BoundState | None:
    """Ground state of -Delta + V, found as the kappa where 1 + B_{i kappa} is singular.

    Returns None when the zero-energy operator 1 + J X has no negative
    eigenvalue (no bound state).  The eigenfunction is rebuilt on
    ``[0, R_V + tail_factor / kappa]`` as psi = g_{i kappa} |V|^1/2 phi.
    """
    if grid is None:
        grid = potential_grid(V)
    if V.is_zero or np.all(node_values(V, grid) >= 0):
        return None
    X = build_X(V, grid).matrix
    J = sign_vector(V, grid)
    S = _sqrt_psd(X)
    mu0 = np.linalg.eigvalsh(np.eye(grid.size) + S @ (J[:, None] * S))
    count = int(np.sum(mu0 < 0))
    if count == 0:
        return None

    def f(log_kappa: float) -> float:
        return _lowest_at_kappa(V, grid, math.exp(log_kappa))[0]

    hi = 0.5 * math.log(float(np.max(np.abs(V.values))))
    while f(hi) <= 0:
        hi += 1.0
    lo = hi - 1.0
    while f(lo) > 0:
        lo -= 1.0
        if lo < -60:
            raise OperatorError("no sign change found in the bound-state bracket")
    log_kappa = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    kappa = math.exp(log_kappa)
    _, phi = _lowest_at_kappa(V, grid, kappa)

    R = V.support_radius
    outer = extend_grid(grid, R + tail_factor / kappa, panel_width or 1.0 / kappa)
    root = np.sqrt(np.abs(node_values(V, grid)))
    A = nystrom_matrix(outer.nodes, grid, free_green(1j * kappa))
    psi_vals = A @ (root * grid.from_basis(phi))
    psi = outer.to_basis(psi_vals)
    psi /= np.linalg.norm(psi)
    tail = outer.to_basis(np.exp(-kappa * outer.nodes))
    if psi @ tail < 0:
        psi = -psi
    return BoundState(-kappa * kappa, kappa, psi, outer, count)


def point_bound_state(a: float, grid: RadialGrid) -> np.ndarray:
    """Normalized bound state of the point interaction, sqrt(8 pi / a) g_{i/a}, reduced."""
    if not a > 0:
        raise ValueError("the point interaction has a bound state only for a > 0")
    vals = math.sqrt(8 * math.pi / a) * np.exp(-grid.nodes / a) / SQRT4PI
    return grid.to_basis(vals)
