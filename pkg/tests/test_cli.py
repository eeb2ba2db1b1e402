import subprocess
import sys

import numpy as np
import pytest

from kannai.cli import (EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE, UsageError, main, parse_config,
                        parse_expression)


def _summary(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


def test_parse_defaults_and_aliases():
    cfg = parse_config(["heat", "--n_cells", "8", "--out-path", "x.csv"])
    assert cfg["n"] == 8 and cfg["out"] == "x.csv"
    assert cfg["rule"] == "theorem" and cfg["bc"] == "dirichlet" and cfg["T"] == 1.0
    assert parse_config(["bench-bounds", "--delta-off", "0.01"])["delta_off"] == 0.01


def test_config_file_and_override(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nn = 12\neps = 1e-3  # inline\nrule = trapezoid\n")
    cfg = parse_config(["heat", "--config", str(p), "--n", "6"])
    assert cfg["n"] == 6 and cfg["eps"] == 1e-3 and cfg["rule"] == "trapezoid"


@pytest.mark.parametrize("argv", [
    ["heat", "--rule", "simpson"],
    ["heat", "--n", "four"],
    ["heat", "--eps", "nan"],
    ["nosuch"],
    ["heat", "--bogus", "1"],
])
def test_parse_errors(argv):
    with pytest.raises(UsageError):
        parse_config(argv)


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("n = 4\nwidth = 3\n")
    assert main(["heat", "--config", str(p)]) == EXIT_USAGE
    assert "width" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["heat", "--config", str(tmp_path / "none.cfg")]) == EXIT_USAGE


def test_invalid_grid(capsys):
    assert main(["heat", "--n", "1"]) == EXIT_USAGE


def test_expression_whitelist():
    f = parse_expression("1 + cos(2*pi*x)**2 - -x/e")
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(f(x=x), 1 + np.cos(2 * np.pi * x) ** 2 + x / np.e)
    assert f(x=np.zeros(3)).shape == (3,)
    np.testing.assert_allclose(parse_expression("2")(x=np.zeros(4)), 2.0)


@pytest.mark.parametrize("text", [
    "__import__('os')", "x.real", "open('f')", "[x]", "x if x else 1", "'s'", "lambda: 1",
    "exp(", "w + 1",
])
def test_expression_rejects(text):
    with pytest.raises(UsageError):
        parse_expression(text)


def test_bad_expression_exit():
    assert main(["heat", "--n", "4", "--u0", "system(1)"]) == EXIT_USAGE


def test_heat_neumann_csv(tmp_path, capsys):
    out = tmp_path / "heat.csv"
    code = main(["heat", "--bc", "neumann", "--n", "8", "--T", "0.1", "--eps", "1e-6", "--out", str(out)])
    assert code == EXIT_OK
    s = _summary(capsys.readouterr().out)
    assert s["status"] == "ok"
    assert float(s["rel_error"]) <= 1e-6
    lines = out.read_text().splitlines()
    assert lines[0] == "x_index,u_kannai_re,u_kannai_im,u_ref_re,u_ref_im,abs_err"
    assert len(lines) == 9


def test_no_csv_without_out(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["heat", "--bc", "neumann", "--n", "4", "--T", "0.1"]) == EXIT_OK
    assert list(tmp_path.iterdir()) == []


def test_tolerance_failure(capsys):
    # the trapezoid rule on a coarse grid misses a tight tolerance
    code = main(["heat", "--bc", "neumann", "--n", "8", "--rule", "trapezoid", "--R", "3", "--M", "4",
                 "--tol", "1e-12"])
    assert code == EXIT_FAIL
    assert _summary(capsys.readouterr().out)["status"] == "tolerance_failure"


def test_io_error(tmp_path):
    assert main(["transport", "--out", str(tmp_path / "missing" / "t.csv")]) == EXIT_IO


def test_deterministic_output(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    outs = []
    for p in paths:
        assert main(["bench-bounds", "--factor", "random", "--seed", "3", "--out", str(p)]) == EXIT_OK
        outs.append(capsys.readouterr().out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert outs[0] == outs[1]
    header = paths[0].read_text().splitlines()[0]
    assert header == "T,R,h1,Q,delta_off,check,measured,bound,ok"


def test_bench_bounds_violation(capsys):
    assert main(["bench-bounds", "--noise_scale", "10", "--mode", "up"]) == EXIT_FAIL
    s = _summary(capsys.readouterr().out)
    assert int(s["violations"]) > 0


def test_verify_blockenc(tmp_path, capsys):
    out = tmp_path / "be.csv"
    assert main(["verify-blockenc", "--rows", "3", "--cols", "2", "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "check,residual" and len(lines) == 8


def test_transport_and_epd(capsys):
    assert main(["transport", "--d", "2", "--k_max", "4"]) == EXIT_OK
    assert main(["epd", "--d", "2"]) == EXIT_OK
    assert main(["epd", "--d", "1"]) == EXIT_USAGE


def test_linsolve(capsys):
    assert main(["linsolve", "--n", "4"]) == EXIT_OK
    s = _summary(capsys.readouterr().out)
    assert float(s["rel_error"]) <= 1e-4


def test_kernel_compare(tmp_path, capsys):
    out = tmp_path / "k.csv"
    assert main(["kernel-compare", "--n_R", "5", "--out", str(out)]) == EXIT_OK
    assert out.read_text().splitlines()[0] == "kernel,T,eps_param,R,tail_eps"
    s = _summary(capsys.readouterr().out)
    assert float(s["R_min_kannai"]) < float(s["R_min_opt-lchs"])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "kannai", "transport", "--T", "0.01"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("status=ok")
