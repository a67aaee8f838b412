"""Command-line surface: exit codes, frozen output formats, data plumbing."""

from __future__ import annotations

import io
import json
import shutil
from pathlib import Path

import pytest

from agentrep import evidence as ev
from agentrep.cli import EXIT_DOMAIN, EXIT_NO_AGENT, EXIT_OK, EXIT_USAGE, run_command

from conftest import BASE_TIME, make_event

REPO = Path(__file__).parent.parent
NOW = str(BASE_TIME + 10)


def run(argv: list[str]) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    code = run_command(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture()
def data_dir(tmp_path):
    target = tmp_path / "data"
    target.mkdir()
    shutil.copytree(REPO / "regimes", target / "regimes")
    return target


def ingest_fixture_events(data_dir: Path, count: int = 6) -> list[ev.EvidenceEvent]:
    events = [
        make_event(task=f"task-{i:04d}", timestamp=BASE_TIME + i) for i in range(count)
    ]
    batch = data_dir / "batch.jsonl"
    batch.write_text(
        "".join(ev.event_to_json_line(e) + "\n" for e in events), encoding="utf-8"
    )
    code, out, err = run(
        ["--data", str(data_dir), "evidence", "ingest", str(batch),
         "--now", str(BASE_TIME + count + 10)]
    )
    assert code == EXIT_OK, out + err
    return events


class TestUsage:
    def test_no_arguments_is_usage_error(self):
        code, _, err = run([])
        assert code == EXIT_USAGE
        assert "usage:" in err

    def test_unknown_group(self):
        code, _, err = run(["frobnicate"])
        assert code == EXIT_USAGE


class TestGlobalConfig:
    def test_env_data_dir_fallback(self, data_dir, monkeypatch):
        ingest_fixture_events(data_dir, count=2)
        monkeypatch.setenv("AGENTREP_DATA", str(data_dir))
        code, out, _ = run(["evidence", "query"])
        assert code == EXIT_OK
        assert out.splitlines()[0] == "count: 2"

    def test_config_file_overrides(self, data_dir, tmp_path):
        conf = tmp_path / "global.conf"
        conf.write_text(
            f"data_dir: {data_dir}\n"
            "policy.eligibility_threshold: 0.2\n"
            "aggregation.strength_discount: 0.25\n"
            "epoch_cadence: 8\n",
            encoding="utf-8",
        )
        ingest_fixture_events(data_dir, count=2)
        code, out, _ = run(["--config", str(conf), "evidence", "query"])
        assert code == EXIT_OK
        assert out.splitlines()[0] == "count: 2"

    def test_unknown_config_key_is_domain_error(self, tmp_path):
        conf = tmp_path / "global.conf"
        conf.write_text("mystery: 1\n", encoding="utf-8")
        code, _, err = run(["--config", str(conf), "ledger", "verify"])
        assert code == EXIT_DOMAIN
        assert "unknown key" in err


class TestRegimeCli:
    def test_shipped_corpus_validates(self):
        for path in sorted((REPO / "regimes").glob("*.regime")):
            code, out, _ = run(["regime", "validate", str(path)])
            assert code == EXIT_OK, f"{path} failed: {out}"

    def test_invalid_document_lists_violations(self, tmp_path):
        bad = tmp_path / "bad.regime"
        bad.write_text("id: x\nnot a kv line\n", encoding="utf-8")
        code, out, _ = run(["regime", "validate", str(bad)])
        assert code == EXIT_DOMAIN
        lines = [l for l in out.splitlines() if l]
        assert len(lines) >= 2
        assert all(":" in line for line in lines)


class TestEvidenceCli:
    def test_ingest_reports_receipts(self, data_dir):
        events = ingest_fixture_events(data_dir, count=3)
        code, out, _ = run(["--data", str(data_dir), "evidence", "query"])
        assert code == EXIT_OK
        assert out.splitlines()[0] == "count: 3"
        assert (data_dir / "events.jsonl").exists()

    def test_ingest_rejects_unknown_keys(self, data_dir):
        record = ev.event_to_json(make_event())
        record["extra"] = True
        batch = data_dir / "bad.jsonl"
        batch.write_text(json.dumps(record) + "\n", encoding="utf-8")
        code, out, _ = run(
            ["--data", str(data_dir), "evidence", "ingest", str(batch), "--now", NOW]
        )
        assert code == EXIT_DOMAIN
        assert "unknown keys" in out

    def test_query_filters(self, data_dir):
        ingest_fixture_events(data_dir, count=4)
        code, out, _ = run(
            ["--data", str(data_dir), "evidence", "query", "--agent", "agent-alpha",
             "--task-class", "debugging", "--min-strength", "3"]
        )
        assert code == EXIT_OK
        assert out.splitlines()[0] == "count: 0"


class TestCardCli:
    def test_assessment_line_format_frozen(self, data_dir):
        ingest_fixture_events(data_dir, count=1)
        code, out, _ = run(
            ["--data", str(data_dir), "card", "show", "--agent", "agent-alpha",
             "--context", "debugging", "--strength", "2", "--at", str(BASE_TIME)]
        )
        assert code == EXIT_OK
        assert out == (
            "score=0.666667 lcb=0.218954 uncertainty=0.447712 "
            "n_eff=1.000000 scrutiny=false\n"
        )

    def test_empty_card_prior(self, data_dir):
        code, out, _ = run(
            ["--data", str(data_dir), "card", "show", "--agent", "nobody",
             "--context", "debugging", "--strength", "4"]
        )
        assert code == EXIT_OK
        assert out.startswith("score=0.500000 lcb=0.000000 ")


class TestAllocateCli:
    def write_task(self, data_dir: Path, sandbox: str = "false") -> Path:
        path = data_dir / "task.conf"
        path.write_text(
            "task: job-1\nowner: owner-1\ntask_class: debugging\n"
            "regime: debugging-ci\nbase_stake: 50\nvalue_at_risk: 10\n"
            f"sandbox: {sandbox}\n",
            encoding="utf-8",
        )
        return path

    def test_established_agent_wins(self, data_dir):
        ingest_fixture_events(data_dir, count=12)
        task = self.write_task(data_dir)
        code, out, _ = run(
            ["--data", str(data_dir), "allocate", "--task", str(task),
             "--agents", "agent-alpha,agent-upstart", "--seed", "7",
             "--now", str(BASE_TIME + 20)]
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "winner: agent-alpha"
        assert lines[1].startswith("decision: ")
        assert lines[2].startswith("stake: ")
        assert lines[3].startswith("panel: ")

    def test_no_eligible_agent_exit_two(self, data_dir):
        task = self.write_task(data_dir)
        code, _, err = run(
            ["--data", str(data_dir), "allocate", "--task", str(task),
             "--agents", "rookie", "--verifiers", "v1,v2,v3"]
        )
        assert code == EXIT_NO_AGENT
        assert "no eligible agent" in err


class TestLedgerCli:
    def test_commit_verify_prove_cycle(self, data_dir):
        events = ingest_fixture_events(data_dir, count=6)
        code, out, _ = run(
            ["--data", str(data_dir), "ledger", "commit", "--now", NOW]
        )
        assert code == EXIT_OK
        assert out.splitlines()[0] == "epoch: 0"
        assert "events: 6" in out

        code, out, _ = run(["--data", str(data_dir), "ledger", "verify"])
        assert code == EXIT_OK
        assert out == "Ok\n"

        digest = ev.event_id(events[2])
        code, out, _ = run(["--data", str(data_dir), "ledger", "prove", "--event", digest])
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == f"event: {digest}"
        assert lines[1] == "epoch: 0"
        assert lines[2] == "index: 2"
        assert all(line.split()[0] in ("left", "right") for line in lines[3:])

    def test_commit_with_nothing_pending_fails(self, data_dir):
        code, _, err = run(["--data", str(data_dir), "ledger", "commit", "--now", NOW])
        assert code == EXIT_DOMAIN

    def test_bulk_ingest_auto_commits_at_cadence(self, data_dir):
        # 70 events with the default cadence of 64: one epoch commits on
        # ingest, the remaining 6 wait for an explicit commit.
        ingest_fixture_events(data_dir, count=70)
        log = (data_dir / "commitments.log").read_text().splitlines()
        assert len(log) == 1
        assert log[0].split("\t")[3] == "64"
        code, out, _ = run(
            ["--data", str(data_dir), "ledger", "commit",
             "--now", str(BASE_TIME + 100)]
        )
        assert code == EXIT_OK
        assert "epoch: 1" in out
        assert "events: 6" in out
        code, out, _ = run(["--data", str(data_dir), "ledger", "verify"])
        assert code == EXIT_OK and out == "Ok\n"

    def test_mutated_log_detected(self, data_dir):
        ingest_fixture_events(data_dir, count=6)
        run(["--data", str(data_dir), "ledger", "commit", "--now", NOW])
        log_path = data_dir / "commitments.log"
        epoch, root, prev, count, ts = log_path.read_text().strip().split("\t")
        tampered_root = ("0" if root[0] != "0" else "1") + root[1:]
        log_path.write_text(
            "\t".join([epoch, tampered_root, prev, count, ts]) + "\n", encoding="utf-8"
        )
        code, out, _ = run(["--data", str(data_dir), "ledger", "verify"])
        assert code == EXIT_DOMAIN
        assert out == "Broken{0}\n"


class TestSimCli:
    def test_run_writes_artifacts(self, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run(
            ["sim", "run", "--config", str(REPO / "scenarios" / "demo.scenario"),
             "--out", str(out_dir)]
        )
        assert code == EXIT_OK
        assert (out_dir / "metrics.txt").exists()
        assert (out_dir / "commitments.log").exists()
        assert (out_dir / "objects").is_dir()
        metrics = (out_dir / "metrics.txt").read_text()
        assert metrics.startswith("rounds: 500\n")

    def test_run_twice_is_byte_identical(self, tmp_path):
        args = ["sim", "run", "--config", str(REPO / "scenarios" / "demo.scenario")]
        run(args + ["--out", str(tmp_path / "a")])
        run(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "metrics.txt").read_bytes() == (
            tmp_path / "b" / "metrics.txt"
        ).read_bytes()

    def test_refuses_nonempty_out_dir(self, tmp_path):
        out_dir = tmp_path / "out"
        out_dir.mkdir()
        (out_dir / "leftover").write_text("x")
        code, _, err = run(
            ["sim", "run", "--config", str(REPO / "scenarios" / "demo.scenario"),
             "--out", str(out_dir)]
        )
        assert code == EXIT_DOMAIN
        assert "not empty" in err

    def test_paper_scenario_output(self):
        for successes in ("0", "10"):
            code, out, _ = run(
                ["sim", "paper-scenario", "--alpha-security-successes", successes]
            )
            assert code == EXIT_OK
            lines = out.splitlines()
            assert lines[0] == "winner: beta"
            assert lines[1].startswith("alpha_decision: ")
            assert lines[2] == "beta_decision: eligible stake=100.000000"
