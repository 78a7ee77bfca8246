import json
import random
from datetime import date, timedelta

import pytest

from landtriage.engine import Engine, ServiceConfig
from landtriage.errors import ValidationError
from landtriage.eventlog import EventLog, EventRecord
from landtriage import fixtures


def make_log(tmp_path, fsync=False):
    return EventLog(tmp_path / "events.jsonl", fsync=fsync)


class TestEventLog:
    def test_empty_log_replays_to_nothing(self, tmp_path):
        assert make_log(tmp_path).read_all() == []

    def test_append_then_read(self, tmp_path):
        log = make_log(tmp_path)
        log.read_all()
        log.append("run_registered", {"run": {"run_id": "R1"}}, "2023-02-01T00:00:00Z")
        log.append("run_registered", {"run": {"run_id": "R2"}}, "2023-02-01T00:00:01Z")
        log.close()
        records = make_log(tmp_path).read_all()
        assert [r.seq for r in records] == [1, 2]
        assert records[0].payload == {"run": {"run_id": "R1"}}

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValidationError):
            EventRecord(seq=1, recorded_at="t", kind="mystery", payload={})

    def test_sequence_gap_rejected(self, tmp_path):
        path = tmp_path / "events.jsonl"
        records = [EventRecord(1, "t", "run_registered", {}),
                   EventRecord(3, "t", "run_registered", {})]
        path.write_text("".join(r.to_json() + "\n" for r in records))
        with pytest.raises(ValidationError, match="gap"):
            EventLog(path).read_all()

    def test_corrupt_tail_truncated_with_warning(self, tmp_path, caplog):
        log = make_log(tmp_path)
        log.read_all()
        log.append("run_registered", {"run": {"run_id": "R1"}}, "t")
        log.close()
        path = tmp_path / "events.jsonl"
        good = path.read_bytes()
        path.write_bytes(good + b'{"seq": 2, "recorded_at": "t", "kin')
        with caplog.at_level("WARNING"):
            records = EventLog(path).read_all()
        assert [r.seq for r in records] == [1]
        assert path.read_bytes() == good
        assert any("truncating" in message for message in caplog.messages)

    def test_mid_file_corruption_is_fatal(self, tmp_path):
        log = make_log(tmp_path)
        log.read_all()
        log.append("run_registered", {"run": {"run_id": "R1"}}, "t")
        log.append("run_registered", {"run": {"run_id": "R2"}}, "t")
        log.close()
        path = tmp_path / "events.jsonl"
        lines = path.read_bytes().splitlines(keepends=True)
        path.write_bytes(b"garbage\n" + lines[1])
        with pytest.raises(ValidationError, match="corrupt"):
            EventLog(path).read_all()

    def test_append_after_reload_continues_sequence(self, tmp_path):
        log = make_log(tmp_path)
        log.read_all()
        log.append("run_registered", {}, "t")
        log.close()
        log2 = make_log(tmp_path)
        log2.read_all()
        record = log2.append("run_registered", {}, "t")
        assert record.seq == 2


def drive_random_commands(engine: Engine, rng: random.Random, n_events: int) -> None:
    """Issue a random but always-valid command sequence."""
    engine.load_registry(
        [{"facility_id": "F1", "lat": 43.0, "lon": -89.0, "kind": "cafo"}],
        {"features": [{"type": "Feature",
                       "properties": {"field_id": "N1", "permittee_facility_id": "F1"},
                       "geometry": {"type": "Polygon", "coordinates": [[
                           [-89.05, 42.95], [-88.95, 42.95], [-88.95, 43.05],
                           [-89.05, 43.05], [-89.05, 42.95]]]}}]},
        [{"verifier_id": "V1", "lat": 43.0, "lon": -89.0, "org": "elpc",
          "active": True}])
    det_seq = 0
    run_seq = 0
    pending: list[str] = []
    unresponded: list[str] = []
    undetermined: list[str] = []
    for _ in range(n_events):
        choice = rng.random()
        if choice < 0.25 or run_seq == 0:
            run_seq += 1
            dispatched = date(2023, 2, 1) + timedelta(days=run_seq)
            engine.register_run(f"R{run_seq}", dispatched - timedelta(days=1), dispatched)
            lines = []
            for _ in range(rng.randint(1, 6)):
                det_seq += 1
                lat = 43.0 + rng.uniform(-0.04, 0.04)
                lon = -89.0 + rng.uniform(-0.04, 0.04)
                lines.append(json.dumps({
                    "detection_id": f"D{det_seq:04d}", "run_id": f"R{run_seq}",
                    "score": round(rng.random(), 3),
                    "bbox": {"min_lat": lat, "min_lon": lon,
                             "max_lat": lat + 0.002, "max_lon": lon + 0.002},
                    "image_uri": f"img://D{det_seq:04d}.png"}))
            engine.ingest_detections(f"R{run_seq}", "\n".join(lines))
            for item in engine.route_wdnr(f"R{run_seq}"):
                pending.append(item.detection_id)
            for assignment in engine.route_elpc(f"R{run_seq}"):
                unresponded.append(assignment.assignment_id)
        elif choice < 0.5 and pending:
            det_id = pending.pop(rng.randrange(len(pending)))
            if rng.random() < 0.5:
                _, assignment = engine.record_screening(det_id, "accept")
                undetermined.append(assignment.assignment_id)
            else:
                engine.record_screening(det_id, "reject", reason="vegetation")
        elif choice < 0.75 and unresponded:
            assignment_id = unresponded.pop(rng.randrange(len(unresponded)))
            assignment = engine.assignments[assignment_id]
            visible = rng.random() < 0.7
            payload = {"assignment_id": assignment_id,
                       "visited_on": (assignment.dispatched_on
                                      + timedelta(days=rng.randint(0, 3))).isoformat(),
                       "location_visible": visible}
            if visible:
                payload["manure_present"] = rng.random() < 0.4
            engine.submit_response(payload)
        elif undetermined:
            assignment_id = undetermined.pop(rng.randrange(len(undetermined)))
            assignment = engine.assignments[assignment_id]
            manure = rng.random() < 0.5
            payload = {"assignment_id": assignment_id,
                       "decided_on": (assignment.dispatched_on
                                      + timedelta(days=1)).isoformat(),
                       "manure_present": manure}
            if manure:
                payload["compliance"] = rng.choice(
                    ["violation", "compliant_pre_window",
                     "compliant_unregulated_entity"])
            engine.submit_determination(payload)
        else:
            engine.report_incidental({
                "observed_on": "2023-02-20",
                "reporter_verifier_id": "V1",
                "lat": 43.0 + rng.uniform(-0.5, 0.5),
                "lon": -89.0 + rng.uniform(-0.5, 0.5),
                "notes": "fuzz report"})


class TestEngineReplay:
    def test_replay_reproduces_state_digest(self, tmp_path):
        engine = Engine.open(tmp_path / "data", config=ServiceConfig(fsync=False))
        drive_random_commands(engine, random.Random(5), 40)
        digest = engine.state_digest()
        engine.close()
        replayed = Engine.open(tmp_path / "data", config=ServiceConfig(fsync=False))
        assert replayed.state_digest() == digest

    def test_fuzzed_logs_replay_deterministically(self, tmp_path):
        for seed in range(25):
            data_dir = tmp_path / f"fuzz{seed}"
            engine = Engine.open(data_dir, config=ServiceConfig(fsync=False))
            drive_random_commands(engine, random.Random(seed), 30)
            digest = engine.state_digest()
            engine.close()
            once = Engine.open(data_dir, config=ServiceConfig(fsync=False))
            digest_once = once.state_digest()
            once.close()
            twice = Engine.open(data_dir, config=ServiceConfig(fsync=False))
            assert digest_once == digest == twice.state_digest()

    def test_snapshot_plus_tail_equals_full_replay(self, tmp_path):
        data_dir = tmp_path / "data"
        engine = Engine.open(data_dir, config=ServiceConfig(fsync=False))
        rng = random.Random(9)
        drive_random_commands(engine, rng, 25)
        engine.save_snapshot()
        drive_random_commands(
            Engine(config=ServiceConfig(fsync=False)), random.Random(1), 1)  # unrelated
        # Append more events after the snapshot point.
        engine.report_incidental({"observed_on": "2023-03-01",
                                  "reporter_verifier_id": "V1",
                                  "notes": "after snapshot"})
        digest = engine.state_digest()
        engine.close()
        reopened = Engine.open(data_dir, config=ServiceConfig(fsync=False))
        assert (data_dir / "snapshot.json").exists()
        assert reopened.state_digest() == digest

    def test_truncated_tail_behaves_like_uninterrupted_prefix(self, tmp_path):
        data_dir = tmp_path / "data"
        engine = Engine.open(data_dir, config=ServiceConfig(fsync=False))
        drive_random_commands(engine, random.Random(13), 20)
        engine.close()
        log_path = data_dir / "events.jsonl"
        whole = log_path.read_bytes()
        lines = whole.splitlines(keepends=True)
        prefix = b"".join(lines[:-1])
        # Simulate a crash mid-append: final record half-written.
        log_path.write_bytes(prefix + lines[-1][: len(lines[-1]) // 2])
        crashed = Engine.open(data_dir, config=ServiceConfig(fsync=False))
        crashed_digest = crashed.state_digest()
        crashed.close()
        log_path.write_bytes(prefix)
        clean = Engine.open(data_dir, config=ServiceConfig(fsync=False))
        assert crashed_digest == clean.state_digest()

    def test_trial_fixture_persists_and_replays(self, tmp_path):
        engine = fixtures.build_trial_engine(tmp_path / "trial")
        digest = engine.state_digest()
        engine.close()
        replayed = Engine.open(tmp_path / "trial", config=ServiceConfig(fsync=False))
        assert replayed.state_digest() == digest
        in_memory = fixtures.build_trial_engine()
        assert in_memory.state_digest() == digest
