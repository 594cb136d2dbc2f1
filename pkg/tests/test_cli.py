import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactlimit.cli import compute_fits, emit_reports, run_cli, to_json
from contactlimit.config import (ConfigError, RunConfig, emit_config, format_complex, parse_complex,
                                 parse_config)
from contactlimit.limit import ConvergenceRecord


@pytest.mark.parametrize("text,value", [("0+2i", 2j), ("2i", 2j), ("1.5-0.25i", 1.5 - 0.25j), ("3", 3 + 0j),
                                        ("-i", -1j), ("1e-3+4E1j", 0.001 + 40j), (" 0 + 2 i ", 2j)])
def test_parse_complex(text, value):
    assert parse_complex(text) == value


@pytest.mark.parametrize("text", ["", "abc", "1+", "2ii", "i2"])
def test_parse_complex_rejects(text):
    with pytest.raises(ConfigError, match="k"):
        parse_complex(text)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=200)
@given(finite, finite)
def test_complex_roundtrip(re, im):
    z = complex(re, im)
    assert parse_complex(format_complex(z)) == z


@st.composite
def configs(draw):
    ells = sorted(draw(st.lists(st.floats(1e-4, 10), min_size=1, max_size=8, unique=True)), reverse=True)
    c_plus = draw(st.floats(0.01, 3))
    return RunConfig(
        a_plus=draw(st.floats(0, 10)), c_plus=c_plus, lam=draw(st.floats(0, 10)),
        c_minus=c_plus + draw(st.floats(0.01, 3)), points_per_segment=draw(st.integers(4, 256)),
        order=draw(st.integers(2, 32)), ells=tuple(ells), ell=draw(st.floats(1e-3, 5)), jobs=draw(st.integers(1, 8)),
        k=complex(draw(st.floats(-5, 5)), draw(st.floats(0.01, 5))), target_kind=draw(st.sampled_from("ae")),
        target_value=draw(st.floats(-5, 5)), out=draw(st.sampled_from(["a.csv", "out/x y.csv"])),
        seed=draw(st.integers(0, 2**31)))


@settings(max_examples=100, deadline=None)
@given(configs())
def test_config_roundtrip(cfg):
    assert parse_config(emit_config(cfg)) == cfg


def test_config_errors_name_key():
    with pytest.raises(ConfigError, match="sweep.ells"):
        parse_config("[sweep]\nells = 0.1, 0.2\n")
    with pytest.raises(ConfigError, match="grid.order"):
        parse_config("[grid]\norder = x\n")
    with pytest.raises(ConfigError, match="family.bogus"):
        parse_config("[family]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="family"):
        parse_config("[family]\nc_plus = 3\nc_minus = 2\n")


def test_scatter_barrier(capsys):
    assert run_cli(["scatter", "--set", "family.lambda=0", "--ell", "1"]) == 0
    out = capsys.readouterr().out
    line = [l for l in out.splitlines() if l.startswith("a_ode")][0]
    assert float(line.split("=")[1]) == pytest.approx(1 - math.tanh(1), abs=1e-15)
    assert "0.2384058440442" in out


def test_verify_exits_zero(capsys):
    assert run_cli(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("seed = ")
    assert "FAIL" not in out


def test_spectrum(capsys):
    assert run_cli(["spectrum", "--set", "family.lambda=2", "--ell", "0.1"]) == 0
    assert "e_ell_minus" in capsys.readouterr().out


def test_tune_prints_lambda(capsys):
    assert run_cli(["tune", "--ells", "0.2,0.1", "--target-a", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1] == "ell,lambda_star,e_ell,a"
    assert float(out[2].split(",")[1]) == pytest.approx(1.6986883787826496, rel=1e-12)


@pytest.mark.parametrize("argv", [["nope"], ["scatter", "--bogus"], [], ["tune", "--target-a", "1", "--target-e", "1"]])
def test_usage_errors_exit_2(argv, capsys):
    assert run_cli(argv) == 2
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("argv,key", [(["tune", "--ells", "0.1,0.2"], "sweep.ells"), (["sweep", "--k", "1+0i"], "sweep.k"),
                                      (["sweep", "--jobs", "0"], "sweep.jobs"), (["scatter", "--set", "oops"], "--set"),
                                      (["scatter", "--config", "/nonexistent.ini"], "--config")])
def test_config_errors_exit_2(argv, key, capsys):
    assert run_cli(argv) == 2
    assert key in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[family]\nlambda = 0\n[sweep]\nell = 2.0\n")
    assert run_cli(["scatter", "--config", str(cfg), "--ell", "1"]) == 0
    assert "0.2384058440442" in capsys.readouterr().out


def _records(n):
    cols = ConvergenceRecord.columns()
    out = []
    for j in range(n):
        e = -0.5 * 2.0**-j
        vals = {c: abs(e) ** 0.5 * (1 + 0.01 * j) for c in cols}
        vals.update(ell=0.2 * 2.0**-j, e_ell=e, bound_E=float("nan"))
        out.append(ConvergenceRecord(**vals))
    return out


def test_emit_reports_shape_and_roundtrip(tmp_path):
    recs = _records(7)
    fits = compute_fits(recs)
    csv_path, json_path = emit_reports(recs, fits, str(tmp_path / "out" / "s.csv"))
    lines = open(csv_path).read().splitlines()
    assert len(lines) == 8
    assert lines[0].split(",") == ConvergenceRecord.columns()
    assert float(lines[3].split(",")[0]) == recs[2].ell
    data = json.loads(open(json_path).read())
    for name, fit in fits.items():
        assert data["fits"][name]["exponent"] == fit.exponent
        assert data["fits"][name]["r_squared"] == fit.r_squared


def test_emit_reports_requires_records(tmp_path):
    with pytest.raises(ValueError):
        emit_reports([], {}, str(tmp_path / "x.csv"))


def test_to_json_seventeen_digits():
    text = to_json({"x": 0.1, "n": 3, "nan": float("nan"), "l": [1.0, True]})
    assert '"x": 0.10000000000000001' in text
    assert json.loads(text) == {"x": 0.1, "n": 3, "nan": None, "l": [1.0, True]}


def test_check_reports_failing_assumptions(capsys):
    code = run_cli(["check"])
    out = capsys.readouterr().out
    assert code == (1 if "FAIL" in out else 0)
    assert "A1 finite moments" in out
