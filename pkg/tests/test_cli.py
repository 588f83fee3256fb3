import filecmp
import os
import subprocess
import sys

import numpy as np
import pytest

from magrfk import cli
from magrfk.config import DEFAULTS, ConfigError, ExperimentConfig, load_config, parse_number

SMALL = """\
h = 0.2
n_levels = 60
n_grid = 400
n_max = 4
"""


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def small(tmp_path):
    return write(tmp_path / "small.cfg", SMALL)


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# ---------------------------------------------------------------- config

def test_defaults():
    cfg = load_config()
    assert cfg.h == (0.05,) and cfg.betas == (1.0,)
    assert cfg.domains[0].kind == "disk"
    assert cfg.pairs == (("4pi", "8pi"),)
    assert cfg.a_star == pytest.approx(np.pi)
    assert set(cfg.raw) == set(DEFAULTS)


def test_include_and_override(tmp_path, small):
    path = write(tmp_path / "sweep.cfg", "include = small.cfg\nn_grid = 800  # finer\nbetas = 1, 2; 3\n")
    cfg = load_config(path)
    assert cfg.h == (0.2,) and cfg.n_grid == 800 and cfg.betas == (1.0, 2.0, 3.0)


def test_later_keys_override_include(tmp_path, small):
    path = write(tmp_path / "a.cfg", "n_grid = 800\ninclude = small.cfg\n")
    assert load_config(path).n_grid == 400


def test_unknown_key(tmp_path):
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(write(tmp_path / "bad.cfg", "mesh_size = 0.1\n"))


def test_missing_equals(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "bad.cfg", "h 0.1\n"))


def test_include_cycle(tmp_path):
    write(tmp_path / "a.cfg", "include = b.cfg\n")
    write(tmp_path / "b.cfg", "include = a.cfg\n")
    with pytest.raises(ConfigError, match="cycle"):
        load_config(str(tmp_path / "a.cfg"))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.cfg"))


@pytest.mark.parametrize("bad", [{"h": "0"}, {"betas": "-1"}, {"bracket": "1"},
                                 {"domains": "square:1"}, {"n_grid": "many"},
                                 {"pairs": "4pi 8pi"}])
def test_invalid_values(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_parse_number():
    assert parse_number("4pi") == pytest.approx(4 * np.pi)
    assert parse_number("8.5 pi") == pytest.approx(8.5 * np.pi)
    assert parse_number("pi") == pytest.approx(np.pi)
    assert parse_number("1e-3") == 1e-3
    with pytest.raises(ConfigError):
        parse_number("four")


# ---------------------------------------------------------------- verdicts

def test_verdict_semantics():
    V = cli.Verdict
    assert V("a", "le", -0.5, 1.0).holds and not V("a", "le", -2.0, 1.0).holds
    assert V("a", "lt", 2.0, 1.0).holds and not V("a", "lt", 0.5, 1.0).holds
    assert V("a", "eq", -0.5, 1.0).holds and not V("a", "eq", 1.5, 1.0).holds
    assert V("a", "ge0", 0.0, 0.0).holds and not V("a", "ge0", -1e-16, 0.0).holds
    assert not V("a", "le", float("nan"), 1.0).holds
    assert V("x", "lt", 2.0, 1.0).line().startswith("PASS  x  [lt]")
    assert cli.range_verdict("p", 2.0, 1.7, 2.3).holds
    assert not cli.range_verdict("p", 2.4, 1.7, 2.3).holds


def test_orders():
    v = [1 + 2.0 ** (-2 * k) for k in range(4)]
    assert np.allclose(cli.orders(v), 2.0)


# ---------------------------------------------------------------- subcommands

def test_mesh_export(tmp_path, small, capsys):
    cfg = write(tmp_path / "m.cfg", "include = small.cfg\ndomains = disk:1; ellipse:2,0.5\nrefine = 1\n")
    out = tmp_path / "out"
    code, text, _ = run(["mesh-export", "--config", cfg, "--out", str(out)], capsys)
    assert code == cli.EXIT_OK
    assert "mesh export" in text
    rows = (out / "meshes.csv").read_text().splitlines()
    assert rows[0] == "file,nv,nt,nb,h,area_error" and len(rows) == 3
    for r in rows[1:]:
        assert (out / r.split(",")[0]).exists()


def test_beta_star_command_fails_on_coarse_grid(tmp_path, small, capsys):
    cfg = write(tmp_path / "b.cfg", "include = small.cfg\nn_grid = 60\ntol = 1e-3\ntable_betas = 0.5; 5\n")
    code, text, _ = run(["beta-star", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_FAIL
    assert "FAIL  beta* vs reference" in text
    assert (tmp_path / "o" / "beta_star_table.csv").exists()


def test_beta_star_command(tmp_path, small, capsys):
    cfg = write(tmp_path / "b.cfg", "include = small.cfg\nn_grid = 2000\nn_max = 3\ntol = 1e-3\n"
                                    "table_betas = 0.5; 1; 5\n")
    code, text, _ = run(["beta-star", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_OK
    assert "crossing mode at beta*+0.01: n = 1" in text


def test_reverse_fk_disk(tmp_path, small, capsys):
    cfg = write(tmp_path / "f.cfg", "include = small.cfg\nh = 0.1\n")
    out = tmp_path / "o"
    code, text, _ = run(["reverse-fk", "--config", cfg, "--out", str(out)], capsys)
    assert code in (cli.EXIT_OK, cli.EXIT_FAIL)
    assert "[theorem regime]" in text
    for suffix in ("level_profile", "g_profile", "fem_eigs"):
        assert (out / f"disk_R_1_beta1_h0.1__{suffix}.csv").exists()
    assert (out / "reverse_fk.csv").read_text().startswith("case,quantity,value")


def test_reverse_fk_outside_theorem_regime(tmp_path, small, capsys):
    cfg = write(tmp_path / "f.cfg", "include = small.cfg\nbetas = 5\n")
    code, text, _ = run(["reverse-fk", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code in (cli.EXIT_OK, cli.EXIT_FAIL)
    assert "outside-theorem regime" in text
    assert "not asserted" in text
    assert "lambda1(Omega*)" not in "".join(l for l in text.splitlines() if l.startswith(("PASS", "FAIL")))


def test_monotonicity_command(tmp_path, small, capsys):
    cfg = write(tmp_path / "m.cfg", "include = small.cfg\nn_grid = 800\nn_z = 5\ntruncation_n = 26\n")
    out = tmp_path / "o"
    code, text, _ = run(["monotonicity", "--config", cfg, "--out", str(out)], capsys)
    assert code == cli.EXIT_OK, text
    assert "strictly decreasing" in text
    assert (out / "sweep_0.csv").exists() and (out / "truncation.csv").exists()
    assert "slack=-0.000000e+00" not in text


def test_monotonicity_reversed_pair_is_pipeline_error(tmp_path, small, capsys):
    cfg = write(tmp_path / "m.cfg", "include = small.cfg\nn_z = 3\npairs = 8pi | 4pi\n")
    code, _, err = run(["monotonicity", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_ERROR
    assert "[riccati] HypothesisError" in err


def test_convergence_command(tmp_path, small, capsys):
    cfg = write(tmp_path / "c.cfg", "include = small.cfg\nh_levels = 0.2; 0.1; 0.05\n"
                                    "grid_levels = 250; 500; 1000\n")
    out = tmp_path / "o"
    code, text, _ = run(["convergence", "--config", cfg, "--out", str(out)], capsys)
    assert code in (cli.EXIT_OK, cli.EXIT_FAIL)
    assert "kappa1(4pi) grid order at n=1000" in text
    assert (out / "convergence_mesh.csv").read_text().startswith("h,nv,lambda1,G_dev,kappa1_G")
    assert len((out / "convergence_grid.csv").read_text().splitlines()) == 4


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "bad.cfg", "nonsense = 1\n")
    code, _, err = run(["mesh-export", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_ERROR and "[config]" in err


def test_bad_domain_exit_code(tmp_path, capsys):
    cfg = write(tmp_path / "bad.cfg", "domains = ellipse:1,-1\n")
    code, _, err = run(["mesh-export", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == cli.EXIT_ERROR


def test_deterministic_outputs(tmp_path, small, capsys):
    cfg = write(tmp_path / "f.cfg", "include = small.cfg\ndomains = ellipse:2,0.5\n")
    dirs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        run(["reverse-fk", "--config", cfg, "--out", str(out)], capsys)
        dirs.append(out)
    files = sorted(os.listdir(dirs[0]))
    assert files == sorted(os.listdir(dirs[1]))
    _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
    assert not mismatch and not errors


def test_console_entry_point(tmp_path, small):
    proc = subprocess.run([sys.executable, "-m", "magrfk.cli", "mesh-export", "--config", small,
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verdicts: 0  failed: 0" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "magrfk.cli", "nope"], capture_output=True)
    assert bad.returncode == 2
