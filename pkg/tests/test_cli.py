import json
import subprocess
import sys

import pytest

from tailsig import cli
from tailsig.ingest import read_records
from tailsig.pipeline import AnalysisConfig

W = 300_000
EPOCH = 1_359_964_800_000


def run(*argv):
    return cli.main([str(a) for a in argv])


def simulate(tmp_path, name, windows, schedule=None, seed=0, extra=()):
    out = tmp_path / name
    argv = ["simulate", "--lambda", 0.02, "--mu", 0.05, "--duration", windows * W, "--seed", seed, "-o", out]
    if schedule is not None:
        argv += ["--schedule", json.dumps(schedule)]
    assert run(*argv, *extra) == 0
    return out


def analyze(tmp_path, log, name="report.json", *extra):
    out = tmp_path / name
    code = run("analyze", log, "-o", out, *extra)
    return code, (json.loads(out.read_text()) if out.exists() else None)


@pytest.fixture(scope="module")
def injected(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("injected")
    log = simulate(tmp, "inj.csv", 40, [{"start": 30 * W, "end": 31 * W, "mu_factor": 0.5}])
    code, report = analyze(tmp, log)
    assert code == 0
    return tmp, log, report


def test_simulate_then_analyze_reads_every_record(tmp_path):
    log = simulate(tmp_path, "s.csv", 5)
    lines = log.read_text().splitlines()
    parsed = read_records(log, "csv")
    assert parsed.reject_count == 0
    assert len(parsed.records) == len(lines) - 1
    code, report = analyze(tmp_path, log, "r.json", "--rejects", tmp_path / "rej.ndjson")
    assert code == 0
    assert report["input"]["records"] == len(parsed.records)
    assert (tmp_path / "rej.ndjson").read_text() == ""
    labels = (tmp_path / "s.csv.labels.csv").read_text().splitlines()
    assert labels[0] == "window_start,label"
    assert labels[1] == f"{EPOCH},normal" and len(labels) == 6


def test_simulate_is_byte_identical_per_seed(tmp_path):
    a = simulate(tmp_path, "a.csv", 2, seed=4)
    b = simulate(tmp_path, "b.csv", 2, seed=4)
    assert a.read_bytes() == b.read_bytes()


def test_simulate_ndjson_epoch(tmp_path):
    log = simulate(tmp_path, "a.ndjson", 1, extra=("--format", "ndjson", "--epoch-timestamps"))
    first = json.loads(log.read_text().splitlines()[0])
    assert isinstance(first["timestamp"], int)
    assert read_records(log, "ndjson").reject_count == 0


def test_simulate_errors_exit_1(tmp_path):
    bad = json.dumps([{"start": 0, "end": 2 * W, "mu_factor": 0.5}, {"start": W, "end": 3 * W, "mu_factor": 0.5}])
    assert run("simulate", "--lambda", 0.01, "--mu", 0.05, "--duration", 4 * W, "--schedule", bad,
               "-o", tmp_path / "x.csv") == 1
    assert run("simulate", "--lambda", 0.05, "--mu", 0.05, "--duration", W, "-o", tmp_path / "y.csv") == 1
    assert run("simulate", "--lambda", 0.01, "--duration", W, "-o", tmp_path / "z.csv") == 1


def test_analyze_unreadable_input_exits_1(tmp_path, capsys):
    assert run("analyze", tmp_path / "missing.csv") == 1
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    assert run("analyze", tmp_path / "bad.csv") == 1
    assert "error" in capsys.readouterr().err


def test_stationary_short_log_has_no_slowdowns(tmp_path):
    # ten windows: every occupied bin holds at least 1/9 of the changes
    log = simulate(tmp_path, "flat.csv", 10, seed=1)
    code, report = analyze(tmp_path, log, "r.json", "--gate")
    assert code == 0
    assert [e for e in report["events"] if e["kind"] == "SlowDown"] == []
    assert len(report["windows"]) == 10


def test_injected_slowdown_is_reported(injected):
    _, _, report = injected
    slow = [e for e in report["events"] if e["kind"] == "SlowDown" and e["alert"]]
    assert EPOCH + 30 * W in [e["window_start"] for e in slow]
    assert len(report["windows"]) == 40
    assert all(w["converged"] for w in report["windows"])


def test_gate_exit_code(injected, tmp_path):
    _, log, _ = injected
    assert run("analyze", log, "-o", tmp_path / "g.json", "--gate") == 2
    assert run("analyze", log, "-o", tmp_path / "g.json") == 0


def test_report_json_is_byte_identical(injected, tmp_path):
    tmp, log, _ = injected
    run("analyze", log, "-o", tmp_path / "a.json")
    run("analyze", log, "-o", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_report_renders_one_marker_per_event(injected, tmp_path):
    tmp, _, report = injected
    report["events"] = report["events"][:1] * 3
    path = tmp_path / "three.json"
    path.write_text(json.dumps(report))
    assert run("report", path, "--out-dir", tmp_path / "out") == 0
    svg = (tmp_path / "out" / "k_trend.svg").read_text()
    assert svg.count('id="event-') == 3
    rows = (tmp_path / "out" / "trend.csv").read_text().splitlines()
    assert len(rows) - 1 == len(report["windows"])
    assert (tmp_path / "out" / "distribution_k.csv").read_text().startswith("bin_low,bin_high,count,probability")
    assert len((tmp_path / "out" / "events.csv").read_text().splitlines()) == 4


def test_report_without_events_has_no_markers(injected, tmp_path):
    _, _, report = injected
    report["events"] = []
    path = tmp_path / "none.json"
    path.write_text(json.dumps(report))
    assert run("report", path, "--out-dir", tmp_path / "out") == 0
    assert 'id="event-' not in (tmp_path / "out" / "k_trend.svg").read_text()


def test_report_svg_is_deterministic(injected, tmp_path):
    _, _, report = injected
    path = tmp_path / "r.json"
    path.write_text(json.dumps(report))
    run("report", path, "--out-dir", tmp_path / "a")
    run("report", path, "--out-dir", tmp_path / "b")
    for name in ("k_trend.svg", "gos.svg", "distribution_j.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_malformed_report_exits_1(injected, tmp_path):
    _, _, report = injected
    (tmp_path / "junk.json").write_text("{not json")
    assert run("report", tmp_path / "junk.json", "--out-dir", tmp_path / "o") == 1
    report["events"] = [{"window_start": 1, "kind": "SlowDown"}]
    (tmp_path / "dangling.json").write_text(json.dumps(report))
    assert run("report", tmp_path / "dangling.json", "--out-dir", tmp_path / "o") == 1


def test_defaults_match_analysis_config():
    args = cli.build_parser().parse_args(["analyze", "x.csv"])
    d = AnalysisConfig()
    assert args.window_length * 1000 == d.window_length_ms == 300_000
    assert (args.significance, args.bin_width, args.stable_band) == (0.05, 0.1, 0.1)
    assert args.min_samples == d.min_samples and args.norm_mode == "full_period"
    assert not args.tail_alerts and not args.gate


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TAILSIG_SIGNIFICANCE", "0.06")
    monkeypatch.setenv("TAILSIG_TAIL_ALERTS", "true")
    args = cli.build_parser().parse_args(["analyze", "x.csv"])
    assert args.significance == 0.06 and args.tail_alerts
    args = cli.build_parser().parse_args(["analyze", "x.csv", "--significance", "0.07"])
    assert args.significance == 0.07


def test_bad_environment_value_exits_1(monkeypatch):
    monkeypatch.setenv("TAILSIG_SIGNIFICANCE", "lots")
    assert run("analyze", "x.csv") == 1


def test_usage_errors_exit_1():
    assert run("analyze", "x.csv", "--norm-mode", "weekly") == 1
    assert run() == 1
    assert run("analyze", "x.csv", "--significance", "0.7") == 1


def test_profile_command(tmp_path, capsys):
    log = simulate(tmp_path, "mix.csv", 1, extra=("--tx-mix", "login:0.6,pay:0.3,misc:0.1"))
    assert run("profile", log) == 0
    prof = json.loads(capsys.readouterr().out)
    assert prof["n_types"] == 3
    assert prof["types_to_cover"]["100"] == 3


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "tailsig.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "analyze" in out.stdout
    out = subprocess.run([sys.executable, "-m", "tailsig.cli", "analyze", str(tmp_path / "nope.csv")],
                         capture_output=True, text=True)
    assert out.returncode == 1
