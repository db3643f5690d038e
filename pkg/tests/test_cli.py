import pytest

from gv95sim.cli import BINS_HEADER, main


def _args(tmp_path, *extra):
    return ["--scenario", "paper-fig2", "--engine", "binned_rate", "--quiet",
            "--out", str(tmp_path), *extra]


def test_writes_all_outputs(tmp_path):
    assert main(_args(tmp_path)) == 0
    lines = (tmp_path / "bins.csv").read_text().splitlines()
    assert lines[0] == BINS_HEADER
    assert len(lines) == 841
    stats = dict(l.split(": ", 1) for l in (tmp_path / "stats.txt").read_text().splitlines())
    assert stats["scenario"] == "paper-fig2"
    assert "qber_dark_equalized" in stats
    assert (tmp_path / "fig2.dat").exists()
    assert "fig2.dat" in (tmp_path / "fig2.gnuplot").read_text()


def test_seed_changes_counts(tmp_path):
    main(_args(tmp_path / "a", "--seed", "1"))
    main(_args(tmp_path / "b", "--seed", "2"))
    assert (tmp_path / "a/bins.csv").read_text() != (tmp_path / "b/bins.csv").read_text()


def test_bad_config_exits_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nduration = -1\n")
    assert main(["--config", str(bad), "--out", str(tmp_path / "o")]) != 0
    assert "scenario.duration" in capsys.readouterr().err


def test_missing_config_file_exits_nonzero(tmp_path):
    assert main(["--config", str(tmp_path / "none.ini")]) != 0


def test_unwritable_output_exits_nonzero(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(_args(blocker)) != 0


def test_list(capsys):
    assert main(["--list"]) == 0
    assert "paper-fig2" in capsys.readouterr().out


def test_sweep_writes_table(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[scenario]\nduration = 4\nengine = binned_rate\n"
                   "[sweep]\nparameter = drift.sigma\nvalues = 0, 0.2\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 0
    rows = (tmp_path / "o/sweep.csv").read_text().splitlines()
    assert rows[0].startswith("drift.sigma,")
    assert len(rows) == 3
