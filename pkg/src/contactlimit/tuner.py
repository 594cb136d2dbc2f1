"""Tune the well depth of a potential family to a resonance target.

Two targets are supported: a fixed scattering length ``fix_a(a*)`` and a
prescribed lowest Birman-Schwinger eigenvalue ``fix_e(c)`` with
``e_ell = c * ell``.  Either way the root is taken on the branch next to the
first zero-energy resonance of the family.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq

from .grid import DEFAULT_ORDER, DEFAULT_POINTS_PER_SEGMENT
from .operators import SpectralData, lowest_eigenpairs, potential_grid
from .potential import PotentialFamily, RadialPotential, instantiate
from .scattering import scattering_length_ode, zero_energy_state

log = logging.getLogger(__name__)

PHASE_STEP = 0.05
MAX_PHASE = 40 * math.pi


class TuningError(RuntimeError):
    pass


@dataclass(frozen=True)
class Target:
    kind: Literal["a", "e"]
    value: float

    def describe(self) -> str:
        return f"fix_a({self.value:g})" if self.kind == "a" else f"fix_e({self.value:g})"


def fix_a(a_star: float) -> Target:
    return Target("a", float(a_star))


def fix_e(c: float) -> Target:
    return Target("e", float(c))


def _lam_of_phase(family: PotentialFamily, ell: float, phase: float) -> float:
    """Depth whose well alone accumulates ``phase`` radians across its width."""
    width = (family.c_minus - family.c_plus) * ell
    return (phase / width) ** 2 * ell**family.well_exp


def _slope(family: PotentialFamily, ell: float, lam: float) -> float:
    u, du = zero_energy_state(instantiate(family.with_lambda(lam), ell))
    return du


def resonance_depths(family: PotentialFamily, ell: float, count: int = 2) -> list[float]:
    """First ``count`` depths at which the family has a zero-energy resonance.

    A resonance is a zero of u'(R_V) of the zero-energy solution; depths are
    located by scanning the well phase and refined with Brent's method.
    """
    roots: list[float] = []
    prev_lam = _lam_of_phase(family, ell, PHASE_STEP)
    prev = _slope(family, ell, prev_lam)
    phase = PHASE_STEP
    while len(roots) < count:
        phase += PHASE_STEP
        if phase > MAX_PHASE:
            raise TuningError("no resonance found in the scanned depth range")
        lam = _lam_of_phase(family, ell, phase)
        cur = _slope(family, ell, lam)
        if prev == 0.0:
            roots.append(prev_lam)
        elif prev * cur < 0:
            roots.append(brentq(lambda x: _slope(family, ell, x), prev_lam, lam, xtol=1e-300, rtol=4 * np.finfo(float).eps))
        prev_lam, prev = lam, cur
    return roots


def _a_objective(family: PotentialFamily, ell: float, a_star: float):
    # zero exactly where R - u/u' = a*, with no pole at the resonances
    def h(lam: float) -> float:
        V = instantiate(family.with_lambda(lam), ell)
        u, du = zero_energy_state(V)
        return u - (V.support_radius - a_star) * du

    return h


def _bracket_root(h, lo: float, hi: float, what: str) -> float:
    flo, fhi = h(lo), h(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise TuningError(f"target unreachable: no sign change of the {what} objective on [{lo:.6g}, {hi:.6g}]")
    return brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def _eigen_objective(family, ell, c, points_per_segment, order):
    def h(lam: float) -> float:
        V = instantiate(family.with_lambda(lam), ell)
        if V.is_zero:
            return 1.0 - c * ell  # 1 + J X is the identity
        return lowest_eigenpairs(V, potential_grid(V, points_per_segment, order)).e_ell - c * ell

    return h


def tune_depth(
    family: PotentialFamily,
    ell: float,
    target: Target,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    order: int = DEFAULT_ORDER,
    near: float | None = None,
) -> float:
    """Depth ``lam*`` meeting ``target`` at this ``ell``.

    For ``fix_a`` the objective is the exact transfer-matrix scattering
    length; a* >= 0 is sought just above the first resonance (bound state
    present, e_ell < 0), a* < 0 just below it.  For ``fix_e`` the lowest
    eigenvalue of 1 + J X on the default grid is matched; the sign of c
    selects the side of the first resonance in the same way.  ``near`` is a
    warm-start guess used only to shrink the bracket.
    """
    lam1, lam2 = resonance_depths(family, ell, 2)
    if target.kind == "a":
        h = _a_objective(family, ell, target.value)
        if target.value >= 0:
            lo, hi = lam1 * (1 + 1e-13), lam2 * (1 - 1e-13)
        else:
            lo, hi = 0.0, lam1 * (1 - 1e-13)
        what = "scattering-length"
    elif target.kind == "e":
        h = _eigen_objective(family, ell, target.value, points_per_segment, order)
        if target.value > 0:
            lo, hi = 0.0, lam1
        elif target.value < 0:
            lo, hi = lam1, lam2
        else:
            lo, hi = 0.5 * lam1, 0.5 * (lam1 + lam2)
        what = "eigenvalue"
    else:
        raise TuningError(f"unknown target kind {target.kind!r}")

    if near is not None and lo < near < hi:
        # shrink the bracket around the warm start while the sign change persists
        fn = h(near)
        if fn == 0:
            return near
        step = 1e-3 * near
        while True:
            a_, b_ = max(lo, near - step), min(hi, near + step)
            if h(a_) * h(b_) < 0:
                lo, hi = a_, b_
                break
            if a_ == lo and b_ == hi:
                break
            step *= 4
    return _bracket_root(h, lo, hi, what)


@dataclass(frozen=True, eq=False)
class SweepEntry:
    ell: float
    lambda_star: float
    potential: RadialPotential
    spectral: SpectralData
    a: float


@dataclass(frozen=True, eq=False)
class TunedSweep:
    family: PotentialFamily
    target: Target
    entries: tuple[SweepEntry, ...]
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT
    order: int = DEFAULT_ORDER

    @property
    def ells(self) -> list[float]:
        return [e.ell for e in self.entries]


def build_sweep(
    family: PotentialFamily,
    ells: Sequence[float],
    target: Target,
    points_per_segment: int = DEFAULT_POINTS_PER_SEGMENT,
    order: int = DEFAULT_ORDER,
    warm_start: bool = True,
) -> TunedSweep:
    ells = [float(x) for x in ells]
    if not ells:
        raise TuningError("sweep.ells is empty")
    if any(x <= 0 for x in ells):
        raise TuningError("sweep.ells must be positive")
    if any(b >= a for a, b in zip(ells, ells[1:])):
        raise TuningError("sweep.ells must be strictly decreasing")
    entries = []
    prev = None
    for ell in ells:
        near = prev if warm_start else None
        try:
            lam = tune_depth(family, ell, target, points_per_segment, order, near=near)
        except TuningError as exc:
            raise TuningError(f"ell = {ell:g}: {exc}") from exc
        fam = family.with_lambda(lam)
        V = instantiate(fam, ell)
        spec = lowest_eigenpairs(V, potential_grid(V, points_per_segment, order))
        a = scattering_length_ode(V).a
        log.info("ell=%g lambda*=%.15g e=%.6e a=%.12g", ell, lam, spec.e_ell, a)
        entries.append(SweepEntry(ell, lam, V, spec, a))
        prev = lam
    return TunedSweep(family, target, tuple(entries), points_per_segment, order)
