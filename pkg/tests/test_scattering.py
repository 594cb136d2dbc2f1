import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from contactlimit.grid import build_grid
from contactlimit.operators import potential_grid
from contactlimit.potential import PotentialFamily, RadialPotential, instantiate
from contactlimit.scattering import (ResonanceError, bound_state_energy, point_bound_state,
                                     scattering_length_bs, scattering_length_ode)

# exact roots of q cot q = -kappa with q^2 + kappa^2 = 4 (50-digit reference)
KAPPA_V0_4 = 0.638045048285237717196408058573871382611


def test_closed_forms_well_and_barrier():
    well = RadialPotential(((0.0, 1.0, -1.0),))
    barrier = RadialPotential(((0.0, 1.0, 1.0),))
    for V, exact in [(well, 1 - math.tan(1)), (barrier, 1 - math.tanh(1))]:
        bs, ode = scattering_length_bs(V), scattering_length_ode(V)
        assert ode.a == pytest.approx(exact, rel=1e-13)
        assert bs.a == pytest.approx(exact, rel=1e-12)
        assert bs.refinement_error < 1e-12


def test_barrier_cli_example_value():
    V = instantiate(PotentialFamily(1, 1, 0, 2), 1.0)
    assert scattering_length_ode(V).a == pytest.approx(0.238405844044235, abs=1e-14)


def test_ode_against_numerical_integration():
    V = RadialPotential(((0.0, 0.4, 7.0), (0.4, 1.3, -3.5), (1.3, 1.7, 2.0)))

    def rhs(r, y):
        return [y[1], float(V(r)) * y[0]]

    sol = solve_ivp(rhs, (0, 1.7), [0.0, 1.0], rtol=1e-12, atol=1e-14, method="DOP853",
                    t_eval=[1.7], max_step=0.01)
    u, du = sol.y[0, -1], sol.y[1, -1]
    assert scattering_length_ode(V).a == pytest.approx(1.7 - u / du, rel=1e-8)
    assert scattering_length_bs(V).a == pytest.approx(scattering_length_ode(V).a, rel=1e-10)


def test_zero_potential():
    V = RadialPotential(((0.0, 1.0, 0.0),))
    assert scattering_length_bs(V).a == 0.0 and scattering_length_ode(V).a == 0.0
    assert bound_state_energy(V) is None


def test_resonance_raises():
    V = RadialPotential(((0.0, 1.0, -math.pi**2 / 4),))
    with pytest.raises(ResonanceError):
        scattering_length_ode(V)
    with pytest.raises(ResonanceError):
        scattering_length_bs(V)


def test_stiff_core_stays_finite():
    ell = 0.003125
    V = instantiate(PotentialFamily(1, 1, 0, 2), ell)
    assert scattering_length_ode(V).a == pytest.approx(ell * (1 - math.tanh(ell**-0.5) * ell**0.5), rel=1e-12)


def test_bound_state_square_well():
    oracle = brentq(lambda k: math.sqrt(4 - k * k) / math.tan(math.sqrt(4 - k * k)) + k, 0.1, 1.9, xtol=1e-15)
    assert oracle == pytest.approx(KAPPA_V0_4, rel=1e-14)
    bs = bound_state_energy(RadialPotential(((0.0, 1.0, -4.0),)))
    assert bs.count == 1
    assert bs.kappa == pytest.approx(KAPPA_V0_4, rel=1e-11)
    assert bs.energy == pytest.approx(-(KAPPA_V0_4**2), rel=1e-11)
    assert np.linalg.norm(bs.psi) == pytest.approx(1.0)


def test_bound_state_eigenfunction_shape():
    V = RadialPotential(((0.0, 1.0, -4.0),))
    bs = bound_state_energy(V)
    r = bs.grid.nodes
    q = math.sqrt(4 - bs.kappa**2)
    u = np.where(r < 1, np.sin(q * r), math.sin(q) * np.exp(-bs.kappa * (r - 1)))
    u = bs.grid.to_basis(u)
    u /= np.linalg.norm(u)
    assert np.linalg.norm(bs.psi - u) < 1e-10


def test_no_bound_state_for_shallow_well():
    assert bound_state_energy(RadialPotential(((0.0, 1.0, -2.0),))) is None
    assert bound_state_energy(RadialPotential(((0.0, 1.0, 3.0),))) is None


def test_point_bound_state_is_normalized():
    grid = build_grid([], 40.0, points_per_segment=400)
    for a in (0.5, 1.0, 2.0):
        assert np.linalg.norm(point_bound_state(a, grid)) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(ValueError):
        point_bound_state(-1.0, grid)


def test_bs_default_grid_reports_refinement():
    V = RadialPotential(((0.0, 0.5, 9.0), (0.5, 1.0, -5.0)))
    res = scattering_length_bs(V, potential_grid(V))
    assert res.method == "bs" and res.imag_residue == 0.0
    assert res.refinement_error < 1e-10
