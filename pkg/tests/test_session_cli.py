import json
import shutil

import numpy as np
import pytest

import mtvbo.session
from mtvbo.cli import main
from mtvbo.session import MalformedSessionError, Session


def make_session(tmp_path, name="s.json", bounds="0:10,-5:5", batch=3, seed=1):
    path = tmp_path / name
    assert main(["new", str(path), "--bounds", bounds, "--batch", str(batch),
                 "--seed", str(seed)]) == 0
    return path


class TestSessionPersistence:
    def test_save_load_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        session = Session(bounds=[[0.0, 2.5], [-1.0, 1.0]], batch_size=2,
                          observations_x=[[0.1, -0.9], [2.0, 0.5]],
                          observations_y=[1.234567890123456, -7.5e-3],
                          pending_batch=[[1.0, 0.0], [2.0, -0.25]])
        session.store_rng(rng)
        path = tmp_path / "round.json"
        session.save(path)
        assert Session.load(path) == session
        # a second save of the loaded session is byte-identical
        loaded = Session.load(path)
        loaded.save(tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()

    def test_pending_batch_size_is_validated(self):
        with pytest.raises(MalformedSessionError):
            Session(bounds=[[0, 1]], batch_size=2, pending_batch=[[0.5]])

    def test_out_of_bounds_observations_rejected(self):
        with pytest.raises(MalformedSessionError):
            Session(bounds=[[0, 1]], batch_size=1,
                    observations_x=[[2.0]], observations_y=[0.0])

    def test_interrupted_save_leaves_old_file_intact(self, tmp_path, monkeypatch):
        path = tmp_path / "s.json"
        session = Session(bounds=[[0, 1]], batch_size=1)
        session.save(path)
        before = path.read_bytes()

        def crash(src, dst):
            raise RuntimeError("killed mid-save")

        monkeypatch.setattr(mtvbo.session.os, "replace", crash)
        grown = Session(bounds=[[0, 1]], batch_size=1,
                        observations_x=[[0.5]], observations_y=[1.0])
        with pytest.raises(RuntimeError):
            grown.save(path)
        monkeypatch.undo()
        assert path.read_bytes() == before
        assert Session.load(path) == session
        assert not list(tmp_path.glob(".session-*"))


class TestCliFlow:
    def test_new_refuses_to_overwrite(self, tmp_path):
        path = make_session(tmp_path)
        assert main(["new", str(path), "--bounds", "0:1", "--batch", "1"]) == 2

    def test_fresh_suggest_is_reproducible(self, tmp_path):
        path = make_session(tmp_path)
        copy = tmp_path / "copy.json"
        shutil.copy(path, copy)
        assert main(["suggest", str(path)]) == 0
        assert main(["suggest", str(copy)]) == 0
        a = Session.load(path)
        b = Session.load(copy)
        np.testing.assert_array_equal(a.pending_batch, b.pending_batch)
        for arm in a.pending_batch:
            assert 0 <= arm[0] <= 10 and -5 <= arm[1] <= 5

    def test_second_suggest_requires_force(self, tmp_path, capsys):
        path = make_session(tmp_path)
        assert main(["suggest", str(path)]) == 0
        assert main(["suggest", str(path)]) == 2
        before = Session.load(path)
        assert main(["suggest", str(path), "--force"]) == 0
        after = Session.load(path)
        assert len(after.pending_batch) == before.batch_size
        assert len(after.observations_y) == len(before.observations_y) == 0

    def test_tell_then_suggest_round_trip(self, tmp_path):
        path = make_session(tmp_path)
        assert main(["suggest", str(path)]) == 0
        pending = Session.load(path).pending_batch.copy()
        assert main(["tell", str(path), "1.5", "2.5", "0.25"]) == 0
        session = Session.load(path)
        assert session.pending_batch is None
        np.testing.assert_array_equal(session.observations_x, pending)
        np.testing.assert_array_equal(session.observations_y, [1.5, 2.5, 0.25])
        # next suggest keeps every observation and uses the fitted surrogate
        assert main(["suggest", str(path)]) == 0
        again = Session.load(path)
        np.testing.assert_array_equal(again.observations_x, pending)
        assert again.kernel is not None

    def test_tell_without_pending_fails(self, tmp_path):
        path = make_session(tmp_path)
        assert main(["tell", str(path), "1", "2", "3"]) == 2

    def test_tell_twice_fails_and_preserves_file(self, tmp_path):
        path = make_session(tmp_path)
        main(["suggest", str(path)])
        assert main(["tell", str(path), "1", "2", "3"]) == 0
        before = path.read_bytes()
        assert main(["tell", str(path), "4", "5", "6"]) == 2
        assert path.read_bytes() == before

    def test_tell_count_mismatch_fails(self, tmp_path):
        path = make_session(tmp_path)
        main(["suggest", str(path)])
        before = path.read_bytes()
        assert main(["tell", str(path), "1", "2"]) == 2
        assert path.read_bytes() == before

    def test_tell_non_numeric_exits_2_without_touching_file(self, tmp_path):
        path = make_session(tmp_path)
        main(["suggest", str(path)])
        before = path.read_bytes()
        with pytest.raises(SystemExit) as err:
            main(["tell", str(path), "1", "two", "3"])
        assert err.value.code == 2
        assert path.read_bytes() == before

    def test_malformed_session_exits_3(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert main(["suggest", str(path)]) == 3
        path.write_text(json.dumps({"bounds": [[0, 1]]}), encoding="utf-8")
        assert main(["suggest", str(path)]) == 3

    def test_informed_suggestions_move_toward_the_peak(self, tmp_path):
        peak = np.array([0.7, 0.3])
        rng = np.random.default_rng(5)
        obs = np.clip(peak + 0.08 * rng.standard_normal((8, 2)), 0, 1)
        values = 5.0 - 20.0 * np.sum((obs - peak) ** 2, axis=1)
        informed_path = tmp_path / "informed.json"
        informed = Session(bounds=[[0, 1], [0, 1]], batch_size=4,
                           observations_x=obs, observations_y=values)
        informed.store_rng(np.random.default_rng(6))
        informed.save(informed_path)
        fresh_path = make_session(tmp_path, "fresh.json", bounds="0:1,0:1",
                                  batch=4, seed=6)
        assert main(["suggest", str(informed_path)]) == 0
        assert main(["suggest", str(fresh_path)]) == 0
        informed_arms = Session.load(informed_path).pending_batch
        fresh_arms = Session.load(fresh_path).pending_batch
        dist = lambda arms: np.linalg.norm(arms - peak, axis=1).mean()
        assert dist(informed_arms) < dist(fresh_arms)


class TestCliBench:
    def test_bench_writes_expected_rows(self, tmp_path):
        results = tmp_path / "results.csv"
        report = tmp_path / "report.csv"
        code = main(["bench", "--function", "sphere", "--dim", "2",
                     "--methods", "sobol,random", "--rounds", "2",
                     "--batch", "3", "--reps", "2", "--seed", "3",
                     "--results", str(results), "--report", str(report)])
        assert code == 0
        lines = results.read_text().splitlines()
        assert len(lines) == 1 + 2 * 2 * 2
        assert report.read_text().startswith("method,round,mean_normalized")

    def test_unknown_method_lists_valid_ids(self, tmp_path, capsys):
        code = main(["bench", "--function", "sphere", "--methods", "qnei",
                     "--results", str(tmp_path / "x.csv"),
                     "--report", str(tmp_path / "y.csv")])
        assert code == 2
        err = capsys.readouterr().err
        assert "mtv" in err and "sobol" in err

    def test_unknown_function_lists_valid_names(self, tmp_path, capsys):
        code = main(["bench", "--function", "hartmann6", "--methods", "sobol",
                     "--results", str(tmp_path / "x.csv"),
                     "--report", str(tmp_path / "y.csv")])
        assert code == 2
        assert "mountain_car" in capsys.readouterr().err
