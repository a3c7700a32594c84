import csv

import numpy as np
import pytest

from fourierfmm.cli import auto_levels, main
from fourierfmm.experiments import TOY_EXACT, random_cloud
from fourierfmm.oracle import direct_sum
from fourierfmm.particles import (ParticleFileError, read_particles, read_values,
                                  sample_path, write_particles)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_toy_integral_csv_and_png(tmp_path):
    out = tmp_path / "toy.csv"
    assert main(["toy-integral", "--nmin", "4", "--nmax", "40", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert [int(r["N"]) for r in rows] == list(range(4, 41))
    assert int(rows[0]["K"]) == 9
    # values round-trip at full precision
    r = rows[-1]
    assert float(r["trapezoid_error"]) > 0
    assert (tmp_path / "toy.png").stat().st_size > 1000
    assert (tmp_path / "toy_spectrum.csv").exists()
    assert abs(TOY_EXACT - np.sin(64) / 16) < 1e-16


def test_no_plot_flag(tmp_path):
    out = tmp_path / "toy.csv"
    assert main(["toy-integral", "--nmin", "4", "--nmax", "6", "-o", str(out), "--no-plot"]) == 0
    assert not (tmp_path / "toy.png").exists()


def test_apply_fmm_vs_direct(tmp_path):
    src = str(sample_path())
    a, b = tmp_path / "fmm.txt", tmp_path / "direct.txt"
    assert main(["apply", "-i", src, "-o", str(a), "--kappa", "40", "--eps", "1e-4"]) == 0
    assert main(["apply", "-i", src, "-o", str(b), "--kappa", "40", "--direct"]) == 0
    fa, fb = read_values(a), read_values(b)
    assert len(fa) == 1000
    assert np.linalg.norm(fa - fb) / np.linalg.norm(fb) < 1e-3
    pts, w = read_particles(src)
    assert np.allclose(fb, direct_sum(pts, w, 40.0), rtol=0, atol=1e-12)


def test_apply_reports_plan(tmp_path, capsys):
    out = tmp_path / "v.txt"
    main(["apply", "-i", str(sample_path()), "-o", str(out), "--kappa", "40"])
    text = capsys.readouterr().out
    assert "levels=2" in text and "level 2:" in text and "timings:" in text
    # kappa * a ~ 10 sits near the low-frequency limit; the run says so
    assert "warning: low-frequency breakdown" in text


def test_malformed_input_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("# header\n0 0 0 1 0\n\n0.5 0.5 x 1 0\n")
    assert main(["apply", "-i", str(bad), "-o", str(tmp_path / "o.txt"), "--kappa", "1"]) == 2
    assert f"{bad}:4:" in capsys.readouterr().err
    with pytest.raises(ParticleFileError) as ei:
        read_particles(bad)
    assert ei.value.line == 4
    short = tmp_path / "short.txt"
    short.write_text("0 0 0 1\n")
    with pytest.raises(ParticleFileError, match="expected 5 columns"):
        read_particles(short)


@pytest.mark.parametrize("argv", [
    ["single-level", "--kmin", "-1"],
    ["single-level", "--kmin", "10", "--kmax", "5"],
    ["multilevel", "--alpha", "1.5"],
    ["multilevel", "--eps", "2"],
    ["bench", "--nmax", "5000000"],
    ["apply", "--input", "x.txt"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_particle_file_roundtrip_and_seed(tmp_path):
    p1, w1 = random_cloud(50, 11)
    p2, w2 = random_cloud(50, 11)
    assert np.array_equal(p1, p2) and np.array_equal(w1, w2)
    assert not np.array_equal(random_cloud(50, 12)[0], p1)
    f = tmp_path / "c.txt"
    write_particles(f, p1, w1, header="test cloud")
    p3, w3 = read_particles(f)
    assert np.array_equal(p3, p1) and np.array_equal(w3, w1)


def test_single_level_small_sweep(tmp_path):
    out = tmp_path / "sl.csv"
    assert main(["single-level", "--kmin", "20", "--kmax", "40", "--kcount", "2",
                 "--axis", "z", "--dirs", "42", "-o", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2
    for r in rows:
        assert float(r["eps_T"]) <= 2 * float(r["epsilon"])
    assert (tmp_path / "sl.png").exists()


def test_auto_levels():
    assert auto_levels(1000, 40.0, 1.0) == 2
    assert auto_levels(10**6, 250.0, 1.0) >= 3
    assert auto_levels(10**6, 5.0, 1.0) == 2


@pytest.mark.parametrize("argv", [
    ["toy-integral", "--nmin", "4", "--nmax", "30"],
    ["multilevel", "--kappa", "20", "--levels", "3", "--eps", "1e-4"],
])
def test_csv_bytes_repeatable(tmp_path, argv):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        assert main(argv + ["-o", str(out), "--no-plot"]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
