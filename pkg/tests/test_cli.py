import csv
import subprocess
import sys

import pytest

from dmdqsim.cli import (
    CONVERGENCE_HEADER,
    DELAYS_HEADER,
    SUMMARY_HEADER,
    build_parser,
    config_from_args,
    main,
    parse_seeds,
)


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_headers_are_exact():
    assert ",".join(DELAYS_HEADER) == "scheduler,seed,class,mean_delay_ms,packets"
    assert ",".join(CONVERGENCE_HEADER) == "scheduler,seed,subframe,reward,metric"
    assert ",".join(SUMMARY_HEADER) == "scheduler,class,mean_delay_ms,ci95_low,ci95_high,n_seeds"


def test_parse_seeds():
    assert parse_seeds("3") == (0, 1, 2)
    assert parse_seeds("3,7") == (3, 7)
    assert parse_seeds("4 5") == (4, 5)
    for bad in ("", "0", "x"):
        with pytest.raises(ValueError):
            parse_seeds(bad)


def test_flags_override_file(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\nhorizon = 77\nseeds = 9\nout = fromfile\n[scheduler]\nname = qtab\n")
    args = build_parser().parse_args(["--config", str(ini), "--horizon", "12", "--scheduler", "rr"])
    cfg, names = config_from_args(args)
    assert cfg.run.horizon == 12 and cfg.run.seeds == (9,) and cfg.run.out == "fromfile"
    assert names == ("rr",)
    cfg, names = config_from_args(build_parser().parse_args(["--config", str(ini), "--scheduler", "all"]))
    assert names == ("rr", "qtab", "dmdq") and cfg.run.horizon == 77


def test_one_scheduler_one_seed(tmp_path):
    out = tmp_path / "res"
    assert main(["--scheduler", "rr", "--seeds", "1", "--horizon", "200", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["convergence.csv", "delays.csv", "summary.csv"]
    d = rows(out / "delays.csv")
    assert tuple(d[0]) == DELAYS_HEADER
    assert [r[2] for r in d[1:]] == ["MCD", "UE", "UNB"]
    conv = rows(out / "convergence.csv")
    assert tuple(conv[0]) == CONVERGENCE_HEADER and len(conv) == 201
    s = rows(out / "summary.csv")
    assert tuple(s[0]) == SUMMARY_HEADER and len(s) == 4
    by_class = {r[1]: r for r in s[1:]}
    # no MCD activates within 200 ms, so that class has no samples at all
    assert by_class["MCD"][2:] == ["nan", "nan", "nan", "0"]
    assert by_class["UE"][3] == "nan" and by_class["UE"][5] == "1"


def test_csvs_byte_identical_across_reruns(tmp_path):
    argv = ["--scheduler", "all", "--seeds", "0,3", "--horizon", "120"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    for name in ("delays.csv", "convergence.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_jobs_do_not_change_results(tmp_path):
    argv = ["--scheduler", "qtab", "--seeds", "2", "--horizon", "100"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_unwritable_output_fails(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--scheduler", "rr", "--seeds", "1", "--horizon", "10", "--out", str(blocker / "sub")]) != 0
    assert "error" in capsys.readouterr().err


def test_bad_config_exits_nonzero(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[learning]\nalpha = 2\n")
    assert main(["--config", str(ini)]) == 2
    assert "learning.alpha" in capsys.readouterr().err
    assert main(["--seeds", "0"]) == 2
    assert main(["--jobs", "0"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "dmdqsim", "--scheduler", "rr", "--seeds", "1", "--horizon", "20",
         "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "summary.csv").exists()
