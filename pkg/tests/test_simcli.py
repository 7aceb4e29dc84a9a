import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsapolar import simcli
from tsapolar.polar import read_profile_csv
from tsapolar.simcli import (CSV_COLUMNS, ConfigError, ReportRow, SimReport, config_from_dict,
                             data_bits, emit_csv, main, parse_csv, run, wilson_interval)

SMALL = """
experiment = "{exp}"
n = 64
alpha = {alpha}
list_size = 2
backoffs = [{backoffs}]
frames = {frames}
seed = 5
profile_samples = 1000
stream_blocks = 4
output = "{out}"
"""


def _cfg(tmp_path, exp="tsa", alpha=0.5, backoffs="0.3", frames=16, name="out.csv", extra=""):
    out = tmp_path / name
    p = tmp_path / (name + ".toml")
    p.write_text(SMALL.format(exp=exp, alpha=alpha, backoffs=backoffs, frames=frames, out=out) + extra)
    return p, out


def test_defaults():
    cfg = config_from_dict({})
    assert (cfg.n, cfg.list_size, cfg.frames, cfg.smoothing) == (1024, 8, 1000, 0.01)
    assert cfg.backoffs == [0.2, 0.3, 0.4] and cfg.n1 == 512


@pytest.mark.parametrize("bad", [
    {"nonsense": 1}, {"n": 100}, {"alpha": 1.5}, {"list_size": 0}, {"frames": -1},
    {"interleaver": "spiral"}, {"stage_order": "x"}, {"n": "64"}, {"experiment": "corner", "alpha": 0.5},
    {"experiment": "time-sharing", "alpha": 0.3, "stream_blocks": 4}, {"early_stop": 1},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_exit_codes(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("n = 64\nbogus = true\n")
    assert main(["run", str(p)]) == 2
    p.write_text("n = [\n")
    assert main(["run", str(p)]) == 2
    assert main(["run", str(tmp_path / "missing.toml")]) == 2
    # on a noisy channel a strict rx_cutoff leaves too few receiver-reliable indices
    law = []
    for y1, y2 in ((0, 0), (0, 1), (1, 0)):
        row = np.zeros(4)
        for f1 in (0, 1):
            for f2 in (0, 1):
                row[(y1 ^ f1) * 2 + (y2 ^ f2)] += (0.2 if f1 else 0.8) * (0.2 if f2 else 0.8)
        law.append(row.tolist())
    ch = tmp_path / "noisy.toml"
    ch.write_text(f"law = {law}\ny1_size = 2\ny2_size = 2\n"
                  "puv = [[0.3333333333333333, 0.3333333333333333], [0.3333333333333334, 0.0]]\n"
                  "symbol_map = [[0, 1], [2, 2]]\n")
    cfg, out = _cfg(tmp_path, backoffs="0.0", extra=f'channel_file = "{ch}"\nrx_cutoff = 0.001\n')
    assert main(["run", str(cfg)]) == 3
    assert out.read_text().strip() == ",".join(CSV_COLUMNS)


def test_zero_frames_header_only(tmp_path):
    cfg, out = _cfg(tmp_path, frames=0)
    assert main(["run", str(cfg)]) == 0
    assert out.read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_data_bits_rule():
    c = math.log2(3)
    r = 0.5 * c
    for b in (0.2, 0.3, 0.4):
        assert data_bits(1024, r, c, b) == math.floor(1024 * (c - b) / 2)
    assert data_bits(1024, r, c, c) == 0 and data_bits(1024, r, c, 2.0) == 0


def test_corner_at_capacity_never_fails(tmp_path):
    cfg, out = _cfg(tmp_path, exp="corner", alpha=0.0, backoffs=f"{math.log2(3)!r}", frames=8)
    assert main(["run", str(cfg)]) == 0
    row = parse_csv(out).rows[0]
    assert row.errors == 0 and row.fer == 0.0 and row.r1 == 0.0 and row.r2 == 0.0


def test_tsa_run_and_csv(tmp_path):
    cfg, out = _cfg(tmp_path, backoffs="0.3, 0.5", frames=8)
    assert main(["run", str(cfg)]) == 0
    rep = parse_csv(out)
    assert [r.backoff_bpcu for r in rep.rows] == [0.3, 0.5]
    for r in rep.rows:
        assert r.frames == 8 and r.scheme == "tsa" and r.n == 64 and r.L == 2
        assert r.ci_lo <= r.fer <= r.ci_hi
    assert rep.rows[0].r1 > rep.rows[1].r1


def test_time_sharing_run(tmp_path):
    cfg, out = _cfg(tmp_path, exp="time-sharing", frames=8)
    assert main(["run", str(cfg)]) == 0
    r = parse_csv(out).rows[0]
    assert r.scheme == "time-sharing" and r.frames == 8


def test_worker_count_does_not_change_output(tmp_path, monkeypatch):
    cfg, out = _cfg(tmp_path, frames=12, backoffs="0.1")
    monkeypatch.setenv("TSAPOLAR_WORKERS", "1")
    assert main(["run", str(cfg)]) == 0
    a = out.read_bytes()
    monkeypatch.setenv("TSAPOLAR_WORKERS", "3")
    assert main(["run", str(cfg)]) == 0
    assert out.read_bytes() == a


def test_csv_round_trip(tmp_path):
    rows = [ReportRow(0.2, 0.6, 0.6, 100, 3, 0.03, *wilson_interval(3, 100), "tsa", 1024, 0.5, 8)]
    p = tmp_path / "r.csv"
    emit_csv(SimReport(rows), p)
    assert parse_csv(p).rows == rows
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        parse_csv(p)


@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_properties(e, extra):
    f = e + extra - 1 if e + extra - 1 >= max(e, 1) else max(e, 1)
    lo, hi = wilson_interval(e, f)
    assert 0.0 <= lo <= e / f <= hi <= 1.0
    if e == 0:
        assert lo == 0.0
    lo2, hi2 = wilson_interval(4 * e, 4 * f)
    assert hi2 - lo2 <= hi - lo + 1e-12


def test_wilson_known_value():
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.05523, abs=1e-4) and hi == pytest.approx(0.17437, abs=1e-4)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_region_command(tmp_path, capsys):
    ch = tmp_path / "bw.toml"
    ch.write_text('channel = "blackwell"\n')
    assert main(["region", str(ch), "--points", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "alpha,r1,r2" and len(lines) == 4
    a, r1, r2 = map(float, lines[2].split(","))
    assert a == 0.5 and r1 == pytest.approx(0.792481, abs=1e-6) and r2 == pytest.approx(r1)
    out = tmp_path / "region.csv"
    assert main(["region", str(ch), "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "corner1 0.918296 0.666667" in text and "sum_rate 1.584962501" in text
    ch.write_text('channel = "other"\n')
    assert main(["region", str(ch)]) == 2


def test_generic_channel_file(tmp_path, capsys):
    # the Blackwell channel written out as a generic law
    law = np.zeros((3, 4))
    law[0, 0] = law[1, 1] = law[2, 2] = 1.0
    ch = tmp_path / "g.toml"
    ch.write_text(f"law = {law.tolist()}\ny1_size = 2\ny2_size = 2\n"
                  "puv = [[0.3333333333333333, 0.3333333333333333], [0.3333333333333334, 0.0]]\n"
                  "symbol_map = [[0, 1], [2, 2]]\n")
    assert main(["region", str(ch), "--points", "1"]) == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert float(last.split(",")[1]) == pytest.approx(0.792481, abs=1e-6)


def test_profile_command(tmp_path, capsys):
    cfg, out = _cfg(tmp_path, name="prof.csv")
    assert main(["profile", str(cfg)]) == 0
    for key in ("u", "v"):
        prof = read_profile_csv(tmp_path / f"prof_{key}.csv")
        assert prof.n == 64
        assert np.all((prof.h_state >= 0) & (prof.h_state <= 1))
        assert abs(prof.mean_state() - 0.792481) < 0.05


def test_oracle_experiment(tmp_path):
    cfg, out = _cfg(tmp_path, exp="oracle", frames=20, extra="oracle_sizes = [4, 8]\n")
    assert main(["run", str(cfg)]) == 0
    rows = parse_csv(out).rows
    assert [r.n for r in rows] == [4, 8] and all(r.scheme == "oracle" for r in rows)


def test_run_rejects_non_fer_experiment():
    with pytest.raises(ConfigError):
        run(config_from_dict({"experiment": "region"}))
