import csv
import subprocess
import sys

import pytest

from cntsram.cli import EXIT_FAIL, EXIT_PASS, EXIT_SOLVER, EXIT_USAGE, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_device_card(capsys):
    assert main(["device", "--chirality", "19,0"]) == EXIT_PASS
    out = capsys.readouterr().out
    assert "diameter    1.505924 nm" in out
    assert "vth         0.289540 V" in out
    assert "i_on        2.000000e-05 A" in out


def test_device_tubes_scale_current(capsys):
    main(["device", "--tubes", "5"])
    assert "i_on        1.000000e-04 A" in capsys.readouterr().out


def test_device_pch(capsys):
    assert main(["device", "--polarity", "pch"]) == EXIT_PASS
    assert "i_on        -2.000000e-05 A" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["device", "--chirality", "0,0"],
    ["simulate", "--cell", "6t", "--op", "read9"],
    ["simulate", "--cell", "6t"],
    ["simulate", "--cell", "6t", "--op", "write0", "--duration", "1u"],
    ["simulate", "--cell", "4t", "--op", "hold", "--duration", "abc"],
    ["snm", "--cell", "6t"],
    ["snm", "--all", "--cell", "6t"],
    ["device", "--assist", "-0.1"],
    [],
])
def test_usage_errors_exit_64(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv else argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_simulate_writes_trace_and_energy(tmp_path, capsys):
    assert main(["simulate", "--cell", "6t", "--op", "write0", "--out", str(tmp_path)]) == EXIT_PASS
    assert capsys.readouterr().out.startswith("6t write0: PASS")
    trace = read_csv(tmp_path / "6t_write0_trace.csv")
    assert {"time", "Q", "QB", "BL", "BLB", "WL"} <= set(trace[0])
    assert float(trace[-1]["Q"]) < 0.09
    energy = read_csv(tmp_path / "6t_write0_energy.csv")
    labels = [r["source"] for r in energy]
    assert labels[-2:] == ["total", "bitline_fraction"]


def test_simulate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["simulate", "--cell", "7t", "--op", "read1", "--out", str(d)])
    for name in ("7t_read1_trace.csv", "7t_read1_energy.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_4t_long_hold(tmp_path, capsys):
    argv = ["simulate", "--cell", "4t", "--op", "hold", "--duration", "1u", "--out", str(tmp_path)]
    assert main(argv) == EXIT_PASS
    trace = read_csv(tmp_path / "4t_hold_trace.csv")
    assert float(trace[-1]["time"]) == pytest.approx(1e-6 + float(trace[0]["time"]), rel=0.5)


def test_simulate_failing_bench_exits_1(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("v_idle2 = 0.3\n")
    argv = ["simulate", "--cell", "4t", "--op", "write0", "--config", str(cfg), "--out", str(tmp_path)]
    assert main(argv) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


def test_snm_single(tmp_path, capsys):
    assert main(["snm", "--cell", "8t", "--mode", "read", "--out", str(tmp_path)]) == EXIT_PASS
    read_row = read_csv(tmp_path / "8t_read_report.csv")[0]
    main(["snm", "--cell", "8t", "--mode", "hold", "--out", str(tmp_path)])
    hold_row = read_csv(tmp_path / "8t_hold_report.csv")[0]
    assert abs(float(read_row["snm"]) - float(hold_row["snm"])) <= 2e-3
    assert len(read_csv(tmp_path / "8t_read_butterfly.csv")) == 901


def test_snm_assist_flag(tmp_path, capsys):
    argv = ["snm", "--cell", "10t", "--mode", "write", "--assist", "0.3", "--out", str(tmp_path)]
    assert main(argv) == EXIT_PASS
    assert "monostable=True" in capsys.readouterr().out


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nvdd = 0.8\nchirality = 13,0\n")
    main(["device", "--config", str(cfg)])
    low = capsys.readouterr().out
    assert "chirality   13,0" in low and "0.8 V" in low
    main(["device", "--config", str(cfg), "--vdd", "0.9", "--chirality", "19,0"])
    high = capsys.readouterr().out
    assert "chirality   19,0" in high and "0.9 V" in high


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("vdd = 0.9\nbogus = 1\n")
    assert main(["device", "--config", str(cfg)]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err


def test_netlist_operating_point_and_transient(tmp_path, capsys):
    net = tmp_path / "div.sp"
    net.write_text("V1 in 0 pwl (0 0 10p 0.9)\nR1 in mid 1k\nR2 mid 0 1k\nC1 mid 0 1f\n.end\n")
    assert main(["simulate", "--netlist", str(net)]) == EXIT_PASS
    assert "mid = 0 V" in capsys.readouterr().out
    argv = ["simulate", "--netlist", str(net), "--duration", "50p", "--dt", "1p", "--out", str(tmp_path)]
    assert main(argv) == EXIT_PASS
    rows = read_csv(tmp_path / "div_trace.csv")
    assert float(rows[-1]["mid"]) == pytest.approx(0.45, abs=1e-6)


def test_netlist_syntax_error_is_usage(tmp_path, capsys):
    net = tmp_path / "bad.sp"
    net.write_text("R1 a 0 1k\nQ1 a b c\n.end\n")
    assert main(["simulate", "--netlist", str(net)]) == EXIT_USAGE
    assert "line 2" in capsys.readouterr().err


def test_solver_error_exits_2(tmp_path, capsys):
    net = tmp_path / "clash.sp"
    net.write_text("V1 a 0 dc 1\nV2 a 0 dc 2\n.end\n")
    assert main(["simulate", "--netlist", str(net)]) == EXIT_SOLVER
    assert "solver error" in capsys.readouterr().err


def test_snm_all_table(tmp_path, capsys):
    assert main(["snm", "--all", "--jobs", "4", "--out", str(tmp_path)]) == EXIT_PASS
    table = (tmp_path / "snm_table.txt").read_text()
    assert table == capsys.readouterr().out
    assert len(read_csv(tmp_path / "snm_report.csv")) == 21
    assert table.count("SRAM Cell") == 3


def test_calibrate_writes_config(tmp_path, capsys):
    assert main(["calibrate", "--out", str(tmp_path)]) == EXIT_PASS
    text = (tmp_path / "default.cfg").read_text()
    assert "v_idle2=0.515" in text.splitlines()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cntsram", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "simulate" in res.stdout and "snm" in res.stdout
