import math

import pytest

from contactlimit.potential import PotentialFamily, instantiate
from contactlimit.scattering import scattering_length_ode
from contactlimit.tuner import TuningError, build_sweep, fix_a, fix_e, resonance_depths, tune_depth

# tuned depths from an independent 60-digit mpmath solve of the closed-form matching condition
LAMBDA_FIX_A1 = {0.2: 1.69868837878264964892, 0.1: 1.64749364147846889388, 0.003125: 2.21955058730863437336}
PURE_WELL = PotentialFamily(0, 0, 0, 1)


def test_pure_well_resonances():
    l1, l2 = resonance_depths(PURE_WELL, 1.0)
    assert l1 == pytest.approx(math.pi**2 / 4, rel=1e-13)
    assert l2 == pytest.approx(9 * math.pi**2 / 4, rel=1e-13)


def test_fix_e_zero_finds_resonance():
    assert tune_depth(PURE_WELL, 1.0, fix_e(0.0)) == pytest.approx(math.pi**2 / 4, rel=1e-8)


def test_fix_a_pure_well():
    # a = 1 - tan(q)/q = 1 at q = pi on the bound-state branch
    assert tune_depth(PURE_WELL, 1.0, fix_a(1.0)) == pytest.approx(math.pi**2, rel=1e-13)


def test_fix_a_negative_branch():
    lam = tune_depth(PURE_WELL, 1.0, fix_a(-2.0))
    assert lam < math.pi**2 / 4
    assert scattering_length_ode(instantiate(PURE_WELL.with_lambda(lam), 1.0)).a == pytest.approx(-2.0, rel=1e-12)


@pytest.mark.parametrize("ell", sorted(LAMBDA_FIX_A1))
def test_fix_a_core_well_against_reference(ell):
    lam = tune_depth(PotentialFamily(), ell, fix_a(1.0))
    assert lam == pytest.approx(LAMBDA_FIX_A1[ell], rel=1e-12)


def test_fix_e_matches_target():
    sweep = build_sweep(PURE_WELL, [0.4, 0.2], fix_e(-0.5))
    for e in sweep.entries:
        assert e.spectral.e_ell == pytest.approx(-0.5 * e.ell, rel=1e-9)


def test_build_sweep_validation():
    with pytest.raises(TuningError):
        build_sweep(PotentialFamily(), [], fix_a(1))
    with pytest.raises(TuningError):
        build_sweep(PotentialFamily(), [0.1, 0.2], fix_a(1))


def test_warm_start_does_not_change_result():
    ells = [0.2, 0.1, 0.05]
    a = build_sweep(PotentialFamily(), ells, fix_a(1.0), warm_start=True)
    b = build_sweep(PotentialFamily(), ells, fix_a(1.0), warm_start=False)
    for x, y in zip(a.entries, b.entries):
        assert x.lambda_star == pytest.approx(y.lambda_star, rel=1e-13)


def test_unreachable_target_reports():
    # e_ell <= 1 for every depth, so e_ell = 5 ell at ell = 1 is out of reach
    with pytest.raises(TuningError, match="unreachable"):
        tune_depth(PURE_WELL, 1.0, fix_e(5.0))
