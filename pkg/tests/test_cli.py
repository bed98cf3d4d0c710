import os
import subprocess
import sys

import pytest

from bertrand_edgeworth import config
from bertrand_edgeworth.cli import main
from bertrand_edgeworth.config import ConfigError

BINARY = """\
# two sellers, binary demand
n_sellers = 2
horizon = 3
reserve_price = 40
discount = 0.9
demand.kind = bernoulli
demand.q = 0.5
"""

POISSON = """\
n_sellers = 2
horizon = 1
demand.kind = poisson
demand.mean = 0.5   # trailing comment
"""


@pytest.fixture
def cfg(tmp_path):
    def write(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def read_rows(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    return lines[0], lines[1], [line.split(",") for line in lines[2:]]


def test_values_table(cfg, tmp_path, capsys):
    out = tmp_path / "v.csv"
    assert main(["values", "--config", cfg(BINARY), "--out", str(out)]) == 0
    header, cols, rows = read_rows(out)
    assert header.startswith(config.HEADER_PREFIX) and "command=values" in header
    assert cols == "n,t,value,reservation_price"
    assert ["2", "3", "17.1", "26.1"] in rows
    assert "V(2,3) = 17.1" in capsys.readouterr().out


def test_values_monopolist_has_empty_reservation(cfg, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["values", "--config", cfg(BINARY), "--set", "n_sellers=1", "--out", str(out)]) == 0
    _, _, rows = read_rows(out)
    assert all(r[3] == "" for r in rows)


def test_unwritable_output(cfg, tmp_path):
    assert main(["values", "--config", cfg(BINARY), "--out", str(tmp_path / "no" / "x.csv")]) == 2


def test_missing_config_file(tmp_path):
    assert main(["values", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_equilibrium_pure_rows(cfg, tmp_path):
    out = tmp_path / "e.csv"
    assert main(["equilibrium", "--config", cfg(BINARY), "--set", "horizon=2", "--out", str(out)]) == 0
    _, cols, rows = read_rows(out)
    assert cols == "seller,price"
    assert rows == [["1", "18.0"], ["2", "18.0"]]


def test_equilibrium_cdf_grid(cfg, tmp_path):
    out = tmp_path / "e.csv"
    assert main(["equilibrium", "--config", cfg(POISSON), "--out", str(out)]) == 0
    _, cols, rows = read_rows(out)
    assert cols == "p,cdf" and len(rows) == 512
    at20 = dict((float(p), float(f)) for p, f in rows)[20.0]
    assert at20 == pytest.approx(0.7026, abs=1e-4)


def test_equilibrium_condition_failure(cfg, capsys):
    text = "n_sellers = 2\nhorizon = 2\ndemand.kind = explicit\ndemand.probs = 0.5, 0.5\n"
    assert main(["equilibrium", "--config", cfg(text)]) == 3
    assert "P(D >= 2)" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--set", "horizon=2"],
    ["--set", "n_sellers=3"],
])
def test_verify_binary(cfg, tmp_path, extra):
    assert main(["verify", "--config", cfg(BINARY), "--out", str(tmp_path / "d.csv")] + extra) == 0


def test_verify_planted_profile(cfg, tmp_path):
    args = ["verify", "--config", cfg(POISSON), "--set", "horizon=3", "--out", str(tmp_path / "d.csv")]
    assert main(args) == 0
    assert main(args + ["--profile", "all-at-reserve"]) == 4
    _, cols, rows = read_rows(tmp_path / "d.csv")
    assert cols == "seller,price,payoff" and rows


@pytest.mark.parametrize("text", [
    "this is not a config\n",
    "n_sellers = two\ndemand.kind = bernoulli\ndemand.q = 0.5\nhorizon = 2\n",
    "colour = blue\n",
    "n_sellers = 2\nhorizon = 2\ndemand.kind = gamma\n",
    "n_sellers = 2\nhorizon = 2\ndemand.kind = bernoulli\n",
    "n_sellers = 2\ndemand.kind = bernoulli\ndemand.q = 0.5\n",
    "n_sellers = 2\nhorizon = 2\ndemand.kind = bernoulli\ndemand.q = 1.0\n",
])
def test_malformed_config(cfg, text):
    assert main(["verify", "--config", cfg(text)]) == 1


def test_bad_flags_exit_with_config_error(cfg):
    assert_exit(["verify", "--bogus"], 1)
    assert_exit(["nonsense"], 1)
    assert_exit(["verify", "--profile", "cheapest"], 1)


def assert_exit(argv, code):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == code


def test_simulate_and_zero_trials(cfg, tmp_path, capsys):
    out = tmp_path / "s.csv"
    path = cfg(BINARY)
    assert main(["simulate", "--config", path, "--trials", "0"]) == 1
    assert main(["simulate", "--config", path, "--set", "horizon=2", "--trials", "20000",
                 "--seed", "42", "--out", str(out)]) == 0
    _, cols, rows = read_rows(out)
    assert cols == "seller,mean,ci,trials,seed"
    for _, mean, ci, trials, seed in rows:
        assert abs(float(mean) - 9.0) <= 3 * float(ci)
        assert (trials, seed) == ("20000", "42")
    assert "V=9.000000" in capsys.readouterr().out


@pytest.mark.parametrize("command,extra", [
    ("values", []),
    ("equilibrium", ["--set", "demand.kind=poisson", "--set", "demand.mean=0.7"]),
    ("verify", ["--set", "n_sellers=3"]),
    ("simulate", ["--trials", "3000", "--seed", "5"]),
    ("converge", ["--tmax", "30"]),
])
def test_rerun_from_header_is_byte_identical(cfg, tmp_path, command, extra):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([command, "--config", cfg(BINARY), "--out", str(first)] + extra) in (0, 4)
    assert main([command, "--config", str(first), "--out", str(second)]) in (0, 4)
    assert first.read_bytes() == second.read_bytes()
    assert b"\r" not in first.read_bytes()


def test_converge_binary(cfg, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["converge", "--config", cfg(BINARY), "--out", str(out)]) == 0
    _, cols, rows = read_rows(out)
    assert cols == "T,pstar,pstar_inf,gap"
    assert rows[0][0] == "2" and rows[-1][0] == "1000"
    assert float(rows[-1][3]) < 1e-6
    assert float(rows[-1][2]) == pytest.approx(32.727272727273, abs=1e-12)


def test_converge_short_and_undiscounted(cfg, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["converge", "--config", cfg(BINARY), "--tmax", "2", "--out", str(out)]) == 0
    assert len(read_rows(out)[2]) == 1
    assert main(["converge", "--config", cfg(BINARY), "--set", "discount=1", "--out", str(out)]) == 3
    assert main(["converge", "--config", cfg(BINARY), "--tmax", "1"]) == 1


def test_converge_general(cfg, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["converge", "--config", cfg(POISSON), "--tmax", "60", "--out", str(out)]) == 0
    _, cols, rows = read_rows(out)
    names = cols.split(",")
    assert names[:6] == ["T", "value", "value_inf", "gap", "pstar", "pstar_inf"]
    assert len(names) == 9 and all(n.startswith("cdf_at_") for n in names[6:])
    gaps = [float(r[3]) for r in rows]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert [float(x) for x in rows[-1][6:]] == pytest.approx([0.25, 0.5, 0.75], abs=1e-6)


def test_converge_sweep(cfg, tmp_path):
    out = tmp_path / "panel.csv"
    assert main(["converge", "--config", cfg(BINARY), "--tmax", "50", "--out", str(out),
                 "--sweep-q", "0.2,0.4,0.6,0.8"]) == 0
    files = sorted(p.name for p in tmp_path.glob("panel_q*.csv"))
    assert files == ["panel_q0.2.csv", "panel_q0.4.csv", "panel_q0.6.csv", "panel_q0.8.csv"]
    assert "demand.q=0.6" in read_rows(tmp_path / "panel_q0.6.csv")[0]
    assert main(["converge", "--config", cfg(POISSON), "--out", str(out), "--sweep-q", "0.5"]) == 1


def test_config_grammar():
    parsed = config.parse_text(BINARY + "demand.probs = 0.1,0.9\ntrials = 10\n")
    assert parsed.n_sellers == 2 and parsed.horizon == 3 and parsed.demand_q == 0.5
    assert parsed.demand_probs == (0.1, 0.9) and parsed.trials == 10
    header = parsed.header("values")
    assert config.parse_text(header + "\nn,t\n1,2\n") == parsed
    with pytest.raises(ConfigError):
        config.parse_text("profile = everyone\n")


def test_module_entry_point(cfg, tmp_path):
    out = tmp_path / "v.csv"
    proc = subprocess.run([sys.executable, "-m", "bertrand_edgeworth", "values", "--config", cfg(BINARY),
                           "--out", str(out)], capture_output=True, text=True, env=dict(os.environ))
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
