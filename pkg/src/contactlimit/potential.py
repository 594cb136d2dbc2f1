"""Piecewise-constant radial potentials and the two-scale core+well family."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Literal, Sequence

import numpy as np

log = logging.getLogger(__name__)

Part = Literal["full", "plus", "minus", "signed"]


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class RadialPotential:
    """V(r) given as contiguous constant segments ``(r_lo, r_hi, value)`` from r = 0.

    V vanishes beyond the last segment.  ``J = sgn V`` with the convention
    J = +1 where V >= 0.
    """

    segments: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        segs = tuple((float(a), float(b), float(v)) for a, b, v in self.segments)
        if not segs:
            raise PotentialError("potential needs at least one segment")
        if segs[0][0] != 0.0:
            raise PotentialError("first segment must start at r = 0")
        for (a, b, v), nxt in zip(segs, segs[1:] + (None,)):
            if not (b > a):
                raise PotentialError(f"segment [{a}, {b}) has r_lo >= r_hi")
            if not math.isfinite(v) or not math.isfinite(b):
                raise PotentialError("segment values and radii must be finite")
            if nxt is not None and nxt[0] != b:
                raise PotentialError(f"segments not contiguous at r = {b}")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def from_steps(cls, radii: Sequence[float], values: Sequence[float]) -> "RadialPotential":
        """``radii`` are the outer radii of consecutive segments."""
        if len(radii) != len(values):
            raise PotentialError("radii and values differ in length")
        lo = [0.0] + list(radii[:-1])
        return cls(tuple(zip(lo, radii, values)))

    @property
    def support_radius(self) -> float:
        return self.segments[-1][1]

    @property
    def breakpoints(self) -> list[float]:
        """Interior discontinuity radii (segment boundaries except 0 and R_V)."""
        return [s[1] for s in self.segments[:-1]]

    @property
    def values(self) -> np.ndarray:
        return np.array([s[2] for s in self.segments])

    @property
    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        outer = np.array([s[1] for s in self.segments])
        idx = np.searchsorted(outer, r, side="right")
        vals = np.append(self.values, 0.0)
        return vals[np.minimum(idx, len(self.segments))]

    def part(self, which: Part) -> "RadialPotential":
        """V+ (``plus``), V- (``minus``, returned non-negative) or V itself."""
        if which in ("full", "signed"):
            return self
        if which == "plus":
            return RadialPotential(tuple((a, b, max(v, 0.0)) for a, b, v in self.segments))
        if which == "minus":
            return RadialPotential(tuple((a, b, max(-v, 0.0)) for a, b, v in self.segments))
        raise PotentialError(f"unknown part {which!r}")

    def scaled(self, factor: float) -> "RadialPotential":
        return RadialPotential(tuple((a, b, factor * v) for a, b, v in self.segments))


def moment(V: RadialPotential, q: int, part: Part = "full") -> float:
    """``4 pi sum_seg v_seg int r^(2+q) dr`` over the selected part.

    ``full`` integrates |V|, ``plus``/``minus`` integrate V+ / V-, and
    ``signed`` integrates V itself.
    """
    if q not in (0, 1, 2):
        raise PotentialError(f"unsupported moment order q={q!r}; expected 0, 1 or 2")
    total = 0.0
    p = q + 3
    for a, b, v in V.segments:
        if part == "full":
            c = abs(v)
        elif part == "plus":
            c = max(v, 0.0)
        elif part == "minus":
            c = max(-v, 0.0)
        elif part == "signed":
            c = v
        else:
            raise PotentialError(f"unknown part {part!r}")
        total += c * (b**p - a**p) / p
    return 4.0 * math.pi * total


@dataclass(frozen=True)
class PotentialFamily:
    """Repulsive core ``a_plus / ell^core_exp`` on ``[0, c_plus ell)`` and an
    attractive shell ``-lam / ell^well_exp`` on ``[c_plus ell, c_minus ell)``.

    The default exponents keep the core's integral fixed and make the well's
    integral proportional to ell.  ``c_plus = 0`` (allowed only without a
    core) puts the well on ``[0, c_minus ell)``.
    """

    a_plus: float = 1.0
    c_plus: float = 1.0
    lam: float = 0.0
    c_minus: float = 2.0
    core_exp: float = 3.0
    well_exp: float = 2.0

    def __post_init__(self):
        if self.a_plus < 0 or self.lam < 0:
            raise PotentialError("family.a_plus and family.lambda must be >= 0")
        if not (0 <= self.c_plus < self.c_minus):
            raise PotentialError("family needs 0 <= c_plus < c_minus")
        if self.c_plus == 0 and self.a_plus != 0:
            raise PotentialError("family.c_plus = 0 requires family.a_plus = 0")

    def with_lambda(self, lam: float) -> "PotentialFamily":
        return replace(self, lam=float(lam))

    def core_value(self, ell: float) -> float:
        return self.a_plus / ell**self.core_exp

    def well_value(self, ell: float) -> float:
        return -self.lam / ell**self.well_exp


def instantiate(family: PotentialFamily, ell: float) -> RadialPotential:
    if not ell > 0:
        raise PotentialError(f"ell must be positive, got {ell!r}")
    segs = []
    if family.c_plus > 0:
        segs.append((0.0, family.c_plus * ell, family.core_value(ell)))
    if family.lam != 0 or not segs:
        segs.append((family.c_plus * ell, family.c_minus * ell, family.well_value(ell)))
    return RadialPotential(tuple(segs))


# ---------------------------------------------------------------------------
# assumption audit


@dataclass
class LogFit:
    exponent: float
    intercept: float
    r_squared: float
    n: int


def loglog_fit(x: Iterable[float], y: Iterable[float]) -> LogFit:
    x = np.log(np.abs(np.asarray(list(x), dtype=float)))
    y = np.log(np.asarray(list(y), dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return LogFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), int(x.size))


@dataclass
class AssumptionItem:
    name: str
    passed: bool
    detail: str
    value: float | None = None
    target: float | None = None


@dataclass
class AssumptionReport:
    ells: list[float]
    e_ell: list[float]
    e_ell_minus: list[float]
    l1_norm: list[float]
    l1_minus: list[float]
    x2_full: list[float]
    x2_minus: list[float]
    gaps: list[float]
    items: list[AssumptionItem] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items)

    def item(self, name: str) -> AssumptionItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{'PASS' if it.passed else 'FAIL'} {it.name}: {it.detail}" for it in self.items]


def check_assumptions(
    family: PotentialFamily,
    ells: Sequence[float],
    spectra: Sequence,
    scattering_lengths: Sequence[float] | None = None,
    tolerance: float = 0.2,
    gap_floor: float = 0.5,
    bounded_factor: float = 3.0,
    potentials: Sequence[RadialPotential] | None = None,
) -> AssumptionReport:
    """Audit a sweep against the resonance-limit assumptions.

    ``spectra`` holds objects with ``e_ell``, ``e_ell_minus`` and ``gap``
    attributes (one per ell).  O(.) statements are judged by log-log fits
    against |e_ell| with exponent targets 1, 2, 3 and the given tolerance;
    a "bounded" sequence must not grow (fitted exponent >= -tolerance) and
    its last three values must agree within ``bounded_factor``.
    ``potentials`` gives the tuned potential per ell; without it the family
    is instantiated at its own depth.
    """
    ells = [float(x) for x in ells]
    if len(ells) < 4:
        raise PotentialError(f"insufficient points: need >= 4 sweep points, got {len(ells)}")
    if any(b >= a for a, b in zip(ells, ells[1:])):
        raise PotentialError("sweep.ells must be strictly decreasing")
    if len(spectra) != len(ells):
        raise PotentialError("one SpectralData per ell expected")
    e = np.array([s.e_ell for s in spectra], dtype=float)
    if np.any(e == 0.0):
        raise PotentialError("e_ell = 0 at some ell: 1 + B is not invertible")
    em = np.array([s.e_ell_minus for s in spectra], dtype=float)
    gaps = np.array([s.gap for s in spectra], dtype=float)

    if potentials is None:
        pots = [instantiate(family, ell) for ell in ells]
    elif len(potentials) != len(ells):
        raise PotentialError("one potential per ell expected")
    else:
        pots = list(potentials)
    l1 = np.array([moment(V, 0, "full") for V in pots])
    l1m = np.array([moment(V, 0, "minus") for V in pots])
    x2 = np.array([moment(V, 2, "full") for V in pots])
    x2m = np.array([moment(V, 2, "minus") for V in pots])
    rep = AssumptionReport(ells, e.tolist(), em.tolist(), l1.tolist(), l1m.tolist(),
                           x2.tolist(), x2m.tolist(), gaps.tolist())
    no_minus = bool(np.all(l1m == 0.0))

    def exponent_item(name, y, target):
        if np.all(y == 0.0):
            return AssumptionItem(name, True, "vacuous (identically zero)", None, target)
        fit = loglog_fit(np.abs(e), y)
        ok = abs(fit.exponent - target) <= tolerance
        return AssumptionItem(name, ok, f"exponent {fit.exponent:.3f} vs target {target} "
                                        f"(+-{tolerance}, r2={fit.r_squared:.3f})", fit.exponent, target)

    finite = all(math.isfinite(moment(V, q, "full")) for V in pots for q in (0, 1, 2))
    rep.items.append(AssumptionItem("A1 finite moments", finite, "int |V|(1+|x|^2) finite for every ell"))

    decreasing = bool(np.all(np.diff(np.abs(e)) < 0))
    rep.items.append(AssumptionItem(
        "A2 e_ell -> 0", decreasing, f"|e_ell| from {abs(e[0]):.3e} to {abs(e[-1]):.3e}"))
    if no_minus or np.all(np.abs(em) <= 0.0):
        rep.items.append(AssumptionItem("A2 e_minus = O(e)", True, "vacuous (V- = 0)"))
    else:
        ratio = np.abs(em / e)
        fit = loglog_fit(np.abs(e), np.abs(em))
        ok = fit.exponent >= 1.0 - tolerance
        rep.items.append(AssumptionItem(
            "A2 e_minus = O(e)", ok,
            f"|e_minus/e| from {ratio[0]:.3g} to {ratio[-1]:.3g}; exponent of |e_minus| "
            f"vs |e| = {fit.exponent:.3f} (need >= {1 - tolerance:.2f})", fit.exponent, 1.0))
    gap_ok = bool(np.all(gaps >= gap_floor))
    rep.items.append(AssumptionItem("A2 spectral gap", gap_ok,
                                    f"min gap {gaps.min():.3f} (floor {gap_floor})", float(gaps.min()), gap_floor))

    # bounded = no growth as e -> 0: exponent vs |e| not below -tolerance, tail within bounded_factor
    l1_fit = loglog_fit(np.abs(e), l1)
    tail_ratio = float(l1[-3:].max() / l1[-3:].min())
    l1_ok = l1_fit.exponent >= -tolerance and tail_ratio <= bounded_factor
    rep.items.append(AssumptionItem("A3 ||V||_1 bounded", bool(l1_ok),
                                    f"exponent vs |e| = {l1_fit.exponent:.3f} (need >= {-tolerance}); "
                                    f"last-3 max/min = {tail_ratio:.3f} (<= {bounded_factor}); "
                                    f"values {l1[0]:.4g} .. {l1[-1]:.4g}", l1_fit.exponent, 0.0))
    rep.items.append(exponent_item("A3 ||V-||_1 = O(e)", l1m, 1.0))
    rep.items.append(exponent_item("A4 int|V||x|^2 = O(e^2)", x2, 2.0))
    rep.items.append(exponent_item("A4 int|V-||x|^2 = O(e^3)", x2m, 3.0))

    if scattering_lengths is not None:
        a = np.asarray(scattering_lengths, dtype=float)
        tail = a[-3:]
        spread = float(np.ptp(tail) / max(1.0, np.abs(tail).max()))
        ok = bool(np.all(np.isfinite(a)) and spread <= tolerance)
        rep.items.append(AssumptionItem("A5 finite limit a", ok,
                                        f"a(V_ell) tail spread {spread:.3e}; last a = {a[-1]:.10g}"))
    return rep


def random_potential(
    rng: np.random.Generator,
    segments: tuple[int, int] = (2, 4),
    max_value: float = 10.0,
    max_radius: float = 2.0,
) -> RadialPotential:
    """Piecewise potential with a random segment count, values in [-max_value, max_value]
    and support radius at most ``max_radius``."""
    n = int(rng.integers(segments[0], segments[1] + 1))
    radii = np.sort(rng.uniform(0.05, max_radius, n))
    while np.any(np.diff(radii) < 1e-3):
        radii = np.sort(rng.uniform(0.05, max_radius, n))
    return RadialPotential.from_steps(radii.tolist(), rng.uniform(-max_value, max_value, n).tolist())
