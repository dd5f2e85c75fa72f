import csv
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from polybergman.cli import main
from polybergman.experiment import SUMMARY_COLUMNS, ConfigError, parse_config


def write_cfg(path, text):
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


GAUSS = """# gaussian run
weight.family = gaussian
space.k = 16, 64
grid.extent = 2
grid.res = 64
stochastic.batches = 3
stochastic.seed = 5
out.dir = out
"""


@pytest.fixture(scope="module")
def gauss_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("gauss")
    cfg = write_cfg(d / "g.cfg", GAUSS)
    assert main(["run", cfg]) == 0
    return d


# -- config parsing ----------------------------------------------------------

@pytest.mark.parametrize("text", [
    "weight.family = gaussian\nbogus.key = 1\n",
    "weight.family = nope\n",
    "weight.family = gaussian\nspace.k = 64, 16\n",
    "weight.family = gaussian\ngrid.res = 32\n",
    "weight.family = gaussian\nspace.k = 16\nspace.k = 32\n",
    "weight.family = hoelder\nweight.params = 2\n",
    "weight.family = gaussian\nquad.tol = 0.5\n",
    "space.k = 16\n",
    "weight.family gaussian\n",
])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_parse_all_keys():
    cfg = parse_config("""weight.family = toric-quadratic
weight.params =
space.n = 1
space.k = 8, 16
quad.radial = 40
quad.angular = 64
quad.tol = 1e-16
grid.extent = 2.5
grid.res = 80
polytope.vertices = 0.25, 0.75
stochastic.batches = 2
stochastic.seed = 7
out.dir = results
""", base_dir="/tmp/x")
    assert cfg.ks == (8, 16) and cfg.polytope == ((0.25,), (0.75,)) and cfg.seed == 7
    assert cfg.output_path == "/tmp/x/results"


@pytest.mark.parametrize("text", ["weight.family = gaussian\nspace.k = 16, 8\n", "weight.family = banana\n"])
def test_exit_code_config_error(tmp_path, capsys, text):
    assert main(["run", write_cfg(tmp_path / "c.cfg", text)]) == 1
    assert "config error" in capsys.readouterr().err


def test_exit_code_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "missing.cfg")]) == 3


def test_exit_code_unwritable_output(tmp_path):
    (tmp_path / "blocker").write_text("a file where a directory should go")
    cfg = write_cfg(tmp_path / "c.cfg", "weight.family = gaussian\nspace.k = 4\nout.dir = blocker\n")
    assert main(["envelope", cfg]) == 3
    assert main(["run", cfg]) == 3


def test_exit_code_conditioning_refusal(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.cfg", "weight.family = perturbed-gaussian\nweight.params = 0.9, 1\n"
                                        "space.k = 48\nout.dir = out\n")
    assert main(["run", cfg]) == 2
    assert "condition" in capsys.readouterr().err


# -- run ---------------------------------------------------------------------

def test_run_writes_tables(gauss_run):
    out = gauss_run / "out"
    header, rows = read_csv(out / "summary.csv")
    assert header == SUMMARY_COLUMNS and [r[0] for r in rows] == ["16", "64"]
    for k in (16, 64):
        h1, r1 = read_csv(out / f"k{k}" / "bergman_density.csv")
        h2, r2 = read_csv(out / f"k{k}" / "potential.csv")
        h3, r3 = read_csv(out / f"k{k}" / "samples.csv")
        assert h1 == ["re", "im", "Bk_over_kn", "target_density", "abs_diff"] and len(r1) == 64 * 64
        assert h2 == ["re", "im", "log_kernel_potential", "phi_e_oracle", "abs_err"] and len(r2) == 64 * 64
        assert h3 == ["re", "im", "batch", "kind"]
        assert {r[3] for r in r3} == {"dpp_eigenvalues", "polynomial_zeros"}


def test_run_l1_decreases(gauss_run):
    _, rows = read_csv(gauss_run / "out" / "summary.csv")
    l1 = [float(r[SUMMARY_COLUMNS.index("l1_error")]) for r in rows]
    assert l1[1] < l1[0]
    res = [float(r[SUMMARY_COLUMNS.index("dim_residual")]) for r in rows]
    assert max(res) <= 1e-8


def test_run_floats_have_17_digits(gauss_run):
    _, rows = read_csv(gauss_run / "out" / "k16" / "bergman_density.csv")
    for row in rows[:200]:
        for cell in row:
            x = float(cell)
            assert format(x, ".17g") == cell


def test_rerun_is_byte_identical(gauss_run, tmp_path):
    cfg = write_cfg(tmp_path / "g.cfg", GAUSS)
    assert main(["run", cfg]) == 0
    for sub in ("summary.csv", "k16/bergman_density.csv", "k16/potential.csv", "k16/samples.csv",
                "k64/samples.csv", "k64/potential.csv"):
        assert (gauss_run / "out" / sub).read_bytes() == (tmp_path / "out" / sub).read_bytes()


def test_seed_flag_overrides(tmp_path):
    text = "weight.family = gaussian\nspace.k = 8\nstochastic.batches = 2\nstochastic.seed = 5\nout.dir = out\n"
    cfg = write_cfg(tmp_path / "s.cfg", text)
    assert main(["sample", cfg]) == 0
    base = (tmp_path / "out" / "k8" / "samples.csv").read_bytes()
    assert main(["--seed", "6", "sample", cfg]) == 0
    other = (tmp_path / "out" / "k8" / "samples.csv").read_bytes()
    assert main(["sample", cfg, "--seed", "5"]) == 0
    again = (tmp_path / "out" / "k8" / "samples.csv").read_bytes()
    assert base != other and base == again


def test_sample_needs_batches(tmp_path):
    cfg = write_cfg(tmp_path / "s.cfg", "weight.family = gaussian\nspace.k = 8\n")
    assert main(["sample", cfg]) == 1


def test_run_nonradial_and_polytope(tmp_path):
    cfg = write_cfg(tmp_path / "p.cfg", "weight.family = perturbed-gaussian\nweight.params = 0.3, 2\n"
                                        "space.k = 8\nout.dir = p\n")
    assert main(["run", cfg]) == 0
    _, rows = read_csv(tmp_path / "p" / "k8" / "potential.csv")
    assert rows[0][3] == "" and rows[0][4] == ""  # no oracle for a non-radial weight
    cfg = write_cfg(tmp_path / "t.cfg", "weight.family = toric-quadratic\npolytope.vertices = 0.25, 0.75\n"
                                        "space.k = 8, 32\nout.dir = t\n")
    assert main(["run", cfg]) == 0
    _, rows = read_csv(tmp_path / "t" / "summary.csv")
    assert rows[0][1] == "5" and float(rows[1][6]) > float(rows[0][6])


def test_run_two_variables(tmp_path):
    cfg = write_cfg(tmp_path / "n2.cfg", "weight.family = gaussian\nspace.n = 2\nspace.k = 4\nout.dir = o\n")
    assert main(["run", cfg]) == 0
    header, rows = read_csv(tmp_path / "o" / "summary.csv")
    row = dict(zip(header, rows[0]))
    assert row["dim"] == "10" and row["offdiag_mass_eta0p3"] == "" and float(row["dim_residual"]) <= 1e-8


# -- table -------------------------------------------------------------------

def test_table_rate_column_bounded(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "t.cfg", "weight.family = gaussian\nspace.k = 8, 16, 32, 64\ngrid.extent = 3\n")
    assert main(["table", cfg]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    scaled = [float(line.split()[2]) for line in lines[1:]]
    assert len(scaled) == 4 and max(scaled) / min(scaled) <= 3


def test_table_identity_config(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "i.cfg", "weight.family = gaussian\nspace.k = 8, 16\ntarget.mode = self\n")
    assert main(["table", cfg]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [float(line.split()[3]) for line in lines[1:]] == [0.0, 0.0]


def test_table_hoelder_slope(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "h.cfg", "weight.family = hoelder\nweight.params = 0.5\n"
                                        "space.k = 16, 32, 64, 128, 256\n")
    assert main(["table", cfg]) == 0
    out = capsys.readouterr().out
    slope = float(out.strip().splitlines()[-1].split(":")[1])
    assert abs(slope - 4 / 3) <= 0.05


# -- envelope ----------------------------------------------------------------

def test_envelope_csv(tmp_path):
    cfg = write_cfg(tmp_path / "e.cfg", "weight.family = annulus\nout.dir = env\n")
    assert main(["envelope", cfg]) == 0
    header, rows = read_csv(tmp_path / "env" / "envelope.csv")
    assert header == ["v", "phi", "phi_e", "slope", "contact"]
    data = np.array([[float(x) for x in r] for r in rows])
    v, contact = data[:, 0], data[:, 4] == 1
    assert v[contact].min() == pytest.approx(0, abs=0.005)
    assert v[contact].max() == pytest.approx(math.log((1 + math.sqrt(3)) / 2), abs=0.005)
    assert np.all(data[:, 2] <= data[:, 1] + 1e-12)


def test_envelope_needs_radial_weight(tmp_path):
    cfg = write_cfg(tmp_path / "e.cfg", "weight.family = perturbed-gaussian\nweight.params = 0.3\n")
    assert main(["envelope", cfg]) == 1


def test_module_entry_point(tmp_path):
    cfg = write_cfg(tmp_path / "e.cfg", "weight.family = gaussian\nout.dir = env\n")
    proc = subprocess.run([sys.executable, "-m", "polybergman", "envelope", cfg], capture_output=True, text=True)
    assert proc.returncode == 0 and os.path.exists(tmp_path / "env" / "envelope.csv")
