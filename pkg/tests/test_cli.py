import json

import pytest

from src.rtos_verifier.config import make_config
from src.rtos_verifier.explorer import SearchLimits, dfs_safety, replay
from src.rtos_verifier.main import (
    EXIT_CONFIG,
    EXIT_INCOMPLETE,
    EXIT_PASS,
    EXIT_VIOLATION,
    build_parser,
    main,
)
from src.rtos_verifier.model import KernelModel
from src.rtos_verifier.reports import CYCLE_MARKER, RunManifest, parse_trace
from src.rtos_verifier.workload import Mutation


def run_cli(capsys, *argv):
    """Run the CLI; stdout must hold the manifest alone. Returns the stderr lines too."""
    status = main(list(argv))
    captured = capsys.readouterr()
    out = captured.out.strip().splitlines()
    assert len(out) == 1, out
    manifest = RunManifest.model_validate_json(out[0])
    return status, manifest, captured.err.splitlines()


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_depth_bound_exits_incomplete(capsys):
    status, manifest, _ = run_cli(capsys, "verify-safety", "--max-depth", "1")
    assert status == EXIT_INCOMPLETE
    assert manifest.exit_status == EXIT_INCOMPLETE
    assert manifest.verdict == "pass"
    assert manifest.complete is False
    assert manifest.limits["max_depth"] == 1
    assert manifest.config["n_user_tasks"] == 2
    assert manifest.stats["truncated"] > 0


def test_manifest_and_stats_outputs(capsys, tmp_path):
    manifest_path = tmp_path / "run.json"
    status, manifest, err_lines = run_cli(
        capsys, "verify-safety", "--max-depth", "1", "--stats", "kv",
        "--manifest-out", str(manifest_path))
    assert status == EXIT_INCOMPLETE
    assert any(line.startswith("states_stored=") for line in err_lines)
    written = RunManifest.model_validate_json(manifest_path.read_text())
    assert written == manifest
    assert manifest.artifacts["manifest"] == str(manifest_path)
    assert json.loads(manifest.model_dump_json())["command"] == "verify-safety"


def test_unknown_property_exits_with_config_status(capsys):
    status, manifest, _ = run_cli(capsys, "verify-ltl", "--prop", "nosuch")
    assert status == EXIT_CONFIG
    assert manifest.verdict == "error"
    assert "nosuch" in manifest.detail


def test_bad_config_exits_with_config_status(capsys, tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("systick_priority=15\n")
    status, _, _ = run_cli(capsys, "verify-safety", str(path))
    assert status == EXIT_CONFIG


def test_unknown_mutation_exits_with_config_status(capsys):
    status, _, _ = run_cli(capsys, "verify-safety", "--mutate", "drop-everything")
    assert status == EXIT_CONFIG


def test_coverage_report_totals(capsys, tmp_path):
    report = tmp_path / "coverage.txt"
    status, manifest, _ = run_cli(capsys, "coverage", "--max-depth", "1", "--coverage-out", str(report))
    assert status == EXIT_INCOMPLETE
    assert manifest.artifacts["coverage"] == str(report)
    total = len(KernelModel(make_config()).statements())
    assert report.read_text().splitlines()[-1].startswith(f"# total={total} ")


@pytest.mark.slow
def test_base_config_passes_safety(capsys):
    status, manifest, _ = run_cli(capsys, "verify-safety")
    assert status == EXIT_PASS
    assert manifest.complete is True
    _, stats, _ = dfs_safety(KernelModel(make_config()), SearchLimits())
    assert manifest.stats["states_stored"] == stats.states_stored


@pytest.mark.slow
def test_drop_lock_races(capsys, tmp_path):
    trace = tmp_path / "race.trail"
    status, manifest, _ = run_cli(capsys, "verify-safety", "--mutate", "drop-lock",
                                  "--trace-out", str(trace))
    assert status == EXIT_VIOLATION
    assert manifest.check == "race_condition"
    assert manifest.mutation == "drop-lock"
    path, cycle = parse_trace(trace.read_text())
    assert cycle == []
    final, _ = replay(KernelModel(make_config(), Mutation.DROP_LOCK), path)
    assert final.cs_c == final.cs_p == 1


@pytest.mark.slow
def test_drop_signal_starves_the_consumer(capsys, tmp_path):
    status, _, _ = run_cli(capsys, "verify-ltl", "--prop", "consu_starv")
    assert status == EXIT_PASS

    trace = tmp_path / "starve.trail"
    status, manifest, _ = run_cli(capsys, "verify-ltl", "--prop", "consu_starv", "--mutate", "drop-signal",
                                  "--trace-out", str(trace))
    assert status == EXIT_VIOLATION
    assert manifest.verdict == "acceptance-cycle"
    assert manifest.property == "consu_starv"
    assert CYCLE_MARKER in trace.read_text().splitlines()
    prefix, cycle = parse_trace(trace.read_text())
    assert cycle


@pytest.mark.slow
@pytest.mark.parametrize("prop", ["consu_starv", "produ_starv", "deadlock_free"])
def test_base_config_ltl_properties(capsys, prop):
    status, manifest, _ = run_cli(capsys, "verify-ltl", "--prop", prop)
    assert status == EXIT_PASS
    assert manifest.formula is not None


@pytest.mark.slow
def test_coverage_matches_the_unreached_list(capsys, tmp_path):
    report = tmp_path / "coverage.txt"
    status, _, _ = run_cli(capsys, "coverage", "--coverage-out", str(report))
    assert status == EXIT_PASS
    unreached = {line.split()[1] for line in report.read_text().splitlines() if not line.startswith("#")}
    # both mutex-unlock scheduling points, and the preempt points nothing can take
    assert {"svc.mutex_unlock.sched_blocked.elect", "svc.mutex_unlock.sched_preempt.enqueue",
            "svc.cond_wait.sched_preempt.enqueue", "svc.cond_signal.sched_preempt.enqueue"} <= unreached
    assert {"svc.mutex_unlock.sched_preempt.swap", "svc.cond_wait.sched_preempt.swap",
            "svc.cond_signal.sched_preempt.swap", "svc.mutex_unlock.sched_blocked.swap"} <= unreached
    # idle is never elected
    assert {name for name in unreached if name.endswith(".idle")} == {
        "pendsv.sched.idle", "svc.mutex_lock.sched.idle", "svc.mutex_unlock.sched_blocked.idle",
        "svc.mutex_unlock.sched_preempt.idle", "svc.cond_wait.sched_blocked.idle",
        "svc.cond_wait.sched_preempt.idle", "svc.cond_wait.relock.sched.idle",
        "svc.cond_signal.sched_preempt.idle", "svc.pthread_yield.sched.idle"}
    assert {"svc.mutex_lock.sched.stay", "svc.cond_wait.relock.sched.stay",
            "svc.cond_wait.sched_blocked.stay"} <= unreached
    for reached in ("svc.cond_wait.sched_blocked.elect", "svc.mutex_lock.acquire",
                    "svc.cond_wait.relock.acquire", "svc.cond_wait.relock.sched.elect",
                    "svc.cond_wait.relock.sched.swap", "consumer0.relock",
                    "consumer0.take", "producer0.put", "svc.cond_signal.signal"):
        assert reached not in unreached
