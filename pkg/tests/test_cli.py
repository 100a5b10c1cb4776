"""CLI flows, exercised in-process through main(argv)."""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

import httpx
import pytest
import uvicorn

from tapeloop.cli import EXIT_ABORTED, EXIT_FAILURE, EXIT_OK, main
from tapeloop.server import create_app
from tapeloop.tooling import load_scenario

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
SPECS = ROOT / "specs"


def write_config(tmp_path, **overrides):
    doc = {"temperature": 0.2, **overrides}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run_crc(tmp_path, data_dir):
    return main([
        "run", "--local",
        "--config", write_config(tmp_path),
        "--spec", str(SPECS / "crc.spec"),
        "--scenario", str(SCENARIOS / "crc.json"),
        "--data-dir", str(data_dir),
    ])


def make_aborting_scenario(tmp_path):
    """A crc copy whose resolution script is empty: first ticket aborts."""
    doc = json.loads((SCENARIOS / "crc.json").read_text(encoding="utf-8"))
    doc["resolutions"] = []
    doc["spec_file"] = "crc.spec"
    (tmp_path / "crc.spec").write_text(
        (SPECS / "crc.spec").read_text(encoding="utf-8"), encoding="utf-8")
    path = tmp_path / "crc-giveup.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


# -- run ------------------------------------------------------------------------------

def test_local_run_signs_off(tmp_path, capsys):
    data = tmp_path / "data"
    assert run_crc(tmp_path, data) == EXIT_OK
    out = capsys.readouterr().out
    assert "run crc-low-s0: signed-off" in out
    assert "coverage 100.00%" in out
    assert (data / "runs" / "crc-low-s0" / "events.jsonl").is_file()
    assert (data / "runs" / "crc-low-s0" / "signoff.json").is_file()


def test_local_run_exhausted_script_aborts(tmp_path, capsys):
    scenario = make_aborting_scenario(tmp_path)
    rc = main([
        "run", "--local",
        "--config", write_config(tmp_path),
        "--spec", str(tmp_path / "crc.spec"),
        "--scenario", str(scenario),
        "--data-dir", str(tmp_path / "data"),
    ])
    assert rc == EXIT_ABORTED
    assert "aborted" in capsys.readouterr().out


def test_run_rejects_bad_config(tmp_path, capsys):
    rc = main([
        "run", "--local",
        "--config", write_config(tmp_path, temperature=3.0),
        "--spec", str(SPECS / "crc.spec"),
        "--scenario", str(SCENARIOS / "crc.json"),
    ])
    assert rc == EXIT_FAILURE
    assert "target-out-of-range" in capsys.readouterr().err


def test_run_rejects_unparseable_spec(tmp_path, capsys):
    bad = tmp_path / "bad.spec"
    bad.write_text("not a spec at all", encoding="utf-8")
    rc = main([
        "run", "--local",
        "--config", write_config(tmp_path),
        "--spec", str(bad),
        "--scenario", str(SCENARIOS / "crc.json"),
    ])
    assert rc == EXIT_FAILURE
    assert "spec:" in capsys.readouterr().err


def test_run_rejects_design_mismatch(tmp_path, capsys):
    rc = main([
        "run", "--local",
        "--config", write_config(tmp_path),
        "--spec", str(SPECS / "fifo.spec"),
        "--scenario", str(SCENARIOS / "crc.json"),
    ])
    assert rc == EXIT_FAILURE
    assert "scenario is for" in capsys.readouterr().err


def test_run_rejects_spec_drift(tmp_path, capsys):
    # same design id, but not the text the scenario was scripted against
    original = (SPECS / "crc.spec").read_text(encoding="utf-8")
    drifted = tmp_path / "crc.spec"
    drifted.write_text(
        original.replace("[requirements]\n", "[requirements]\nan extra drifted requirement\n", 1),
        encoding="utf-8")
    rc = main([
        "run", "--local",
        "--config", write_config(tmp_path),
        "--spec", str(drifted),
        "--scenario", str(SCENARIOS / "crc.json"),
    ])
    assert rc == EXIT_FAILURE
    assert "refusing" in capsys.readouterr().err


# -- replay / report -------------------------------------------------------------------

@pytest.fixture()
def finished_run(tmp_path):
    data = tmp_path / "data"
    assert run_crc(tmp_path, data) == EXIT_OK
    return data


def test_replay_verifies_hashes(finished_run, capsys):
    capsys.readouterr()
    rc = main(["replay", "crc-low-s0", "--data-dir", str(finished_run)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "hashes verified" in out
    assert "state hash " in out
    assert "event digest " in out


def test_replay_accepts_direct_paths_and_prints_events(finished_run, capsys):
    capsys.readouterr()
    log = finished_run / "runs" / "crc-low-s0" / "events.jsonl"
    rc = main(["replay", str(log), "--events"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "run-created" in out
    assert "signed-off" in out


def tamper(log_path):
    lines = log_path.read_text(encoding="utf-8").splitlines()
    row = json.loads(lines[10])
    row["sender"] = "intruder"
    lines[10] = json.dumps(row, sort_keys=True)
    log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_replay_flags_tampered_logs(finished_run, capsys):
    log = finished_run / "runs" / "crc-low-s0" / "events.jsonl"
    tamper(log)
    capsys.readouterr()
    assert main(["replay", str(log)]) == EXIT_FAILURE
    assert "hash" in capsys.readouterr().err.lower()
    # and the escape hatch really skips verification
    assert main(["replay", str(log), "--no-verify"]) == EXIT_OK


def test_replay_unknown_run(tmp_path, capsys):
    rc = main(["replay", "ghost", "--data-dir", str(tmp_path)])
    assert rc == EXIT_FAILURE
    assert "no event log" in capsys.readouterr().err


def test_report_prints_verified_json(finished_run, capsys):
    capsys.readouterr()
    rc = main(["report", "crc-low-s0", "--data-dir", str(finished_run)])
    assert rc == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["run_id"] == "crc-low-s0"
    assert doc["design_id"] == "crc"


def test_report_refuses_runs_without_signoff(tmp_path, capsys):
    scenario = make_aborting_scenario(tmp_path)
    data = tmp_path / "data"
    main(["run", "--local",
          "--config", write_config(tmp_path),
          "--spec", str(tmp_path / "crc.spec"),
          "--scenario", str(scenario),
          "--data-dir", str(data)])
    capsys.readouterr()
    rc = main(["report", "crc-low-s0", "--data-dir", str(data)])
    assert rc == EXIT_FAILURE
    assert "no signed-off event" in capsys.readouterr().err


# -- metrics ----------------------------------------------------------------------------

def test_metrics_table_with_baseline(finished_run, tmp_path, capsys):
    baseline = tmp_path / "baseline.json"
    baseline.write_text('{"crc": 55.2}', encoding="utf-8")
    capsys.readouterr()
    rc = main(["metrics", "table", "crc-low-s0",
               "--data-dir", str(finished_run), "--zero-shot", str(baseline)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "crc" in out and "mean" in out
    assert "+17.88" in out

    rc = main(["metrics", "table", "crc-low-s0",
               "--data-dir", str(finished_run), "--zero-shot", str(baseline), "--json"])
    assert rc == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0]["design_id"] == "crc"
    assert doc["zero_shot"]["mean_delta_pct"] == pytest.approx(17.88)


def test_metrics_rejects_mismatched_baseline(finished_run, capsys):
    capsys.readouterr()
    rc = main(["metrics", "table", "crc-low-s0",
               "--data-dir", str(finished_run),
               "--zero-shot", str(ROOT / "data" / "zero_shot.json")])
    assert rc == EXIT_FAILURE
    assert "design sets differ" in capsys.readouterr().err


def test_metrics_rejects_incomplete_logs(tmp_path, capsys):
    scenario = make_aborting_scenario(tmp_path)
    data = tmp_path / "data"
    main(["run", "--local",
          "--config", write_config(tmp_path),
          "--spec", str(tmp_path / "crc.spec"),
          "--scenario", str(scenario),
          "--data-dir", str(data)])
    capsys.readouterr()
    rc = main(["metrics", "table", "crc-low-s0", "--data-dir", str(data)])
    assert rc == EXIT_FAILURE
    assert "incomplete log" in capsys.readouterr().err


# -- scenario validate --------------------------------------------------------------------

def test_scenario_validate_passes_shipped_file(capsys):
    rc = main(["scenario", "validate", str(SCENARIOS / "crc.json")])
    assert rc == EXIT_OK
    assert capsys.readouterr().out.startswith("ok")


def test_scenario_validate_fails_incomplete_file(tmp_path, capsys):
    doc = json.loads((SCENARIOS / "crc.json").read_text(encoding="utf-8"))
    doc["responses"] = [r for r in doc["responses"] if r["task_id"] != "review#1"]
    doc["spec_file"] = "crc.spec"
    (tmp_path / "crc.spec").write_text(
        (SPECS / "crc.spec").read_text(encoding="utf-8"), encoding="utf-8")
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(doc), encoding="utf-8")
    rc = main(["scenario", "validate", str(broken)])
    assert rc == EXIT_FAILURE
    assert capsys.readouterr().out.startswith("FAIL")


# -- remote mode --------------------------------------------------------------------------

@pytest.fixture()
def live_server():
    app = create_app(scenario_dir=SCENARIOS)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        assert time.monotonic() < deadline, "gateway did not come up"
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10.0)


def feed_resolutions(base_url, run_id, wires):
    """Background reviewer: answers tickets as the blocked run opens them.

    The run summary is a fold over the log, so a just-resolved ticket can
    linger in open_tickets for a moment after the POST returns; a wire is
    consumed only on a confirmed 200, and answered tickets are never
    targeted twice.  On deadline the run is aborted so a broken engine
    fails the test instead of hanging it.
    """
    queue = list(wires)
    answered: set[str] = set()
    with httpx.Client(base_url=base_url, timeout=30.0) as client:
        deadline = time.monotonic() + 60.0
        while queue and time.monotonic() < deadline:
            reply = client.get(f"/runs/{run_id}")
            if reply.status_code != 200:
                time.sleep(0.05)
                continue
            summary = reply.json()
            if summary["status"] in ("signed-off", "aborted"):
                return
            fresh = [t for t in summary.get("open_tickets") or [] if t not in answered]
            if not fresh:
                time.sleep(0.05)
                continue
            wire = dict(queue[0]["resolution"])
            reply = client.post(
                f"/runs/{run_id}/escalations/{fresh[0]}/resolution", json=wire)
            if reply.status_code == 200:
                answered.add(fresh[0])
                queue.pop(0)
            elif reply.status_code == 409:
                answered.add(fresh[0])
        if queue:
            client.post(f"/runs/{run_id}/abort")


def test_remote_run_streams_to_sign_off(live_server, tmp_path, capsys):
    scripted = [dict(r) for r in load_scenario(SCENARIOS / "crc.json").resolutions]
    reviewer = threading.Thread(
        target=feed_resolutions, args=(live_server, "crc-low-s0", scripted), daemon=True)
    reviewer.start()
    rc = main([
        "run",
        "--config", write_config(tmp_path),
        "--spec", str(SPECS / "crc.spec"),
        "--scenario", str(SCENARIOS / "crc.json"),
        "--server", live_server,
    ])
    reviewer.join(timeout=30.0)
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert f"started on {live_server}" in out
    assert "run crc-low-s0: signed-off" in out
