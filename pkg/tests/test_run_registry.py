from datetime import datetime

import pytest

from utils.run_registry import RunRegistry


@pytest.fixture
def registry(temp_db_path):
    return RunRegistry(db_path=temp_db_path)


class TestRegister:
    def test_register_returns_id(self, registry):
        run_id = registry.register("demo", "run", "/tmp/demo")
        assert run_id is not None and run_id > 0

    def test_new_run_is_running(self, registry):
        run_id = registry.register("demo", "run", "/tmp/demo",
                                   created=datetime(2026, 5, 9, 12, 0))
        record = registry.get_run(run_id)
        assert record["status"] == "running"
        assert record["created"] == "2026-05-09T12:00:00"
        assert record["finished"] is None
        assert record["summary"] is None

    def test_get_missing_run(self, registry):
        assert registry.get_run(999) is None


class TestStatus:
    def test_update_with_summary(self, registry):
        run_id = registry.register("demo", "run", "/tmp/demo")
        assert registry.update_status(run_id, "finished", {"max_l2_error": 0.01}) is True
        record = registry.get_run(run_id)
        assert record["status"] == "finished"
        assert record["summary"] == {"max_l2_error": 0.01}
        assert record["finished"] is not None

    def test_update_missing_run(self, registry):
        assert registry.update_status(42, "failed") is False


class TestList:
    def test_newest_first_with_filter_and_limit(self, registry):
        first = registry.register("a", "run", "/tmp/a")
        registry.register("b", "sweep", "/tmp/b")
        third = registry.register("c", "run", "/tmp/c")
        runs = registry.list_runs(kind="run")
        assert [r["id"] for r in runs] == [third, first]
        assert len(registry.list_runs(limit=1)) == 1

    def test_delete(self, registry):
        run_id = registry.register("a", "run", "/tmp/a")
        assert registry.delete_run(run_id) is True
        assert registry.list_runs() == []


class TestFailures:
    def test_errors_are_logged_not_raised(self, registry, mocker):
        mocker.patch.object(registry, "get_connection", side_effect=Exception("disk full"))
        assert registry.register("a", "run", "/tmp/a") is None
        assert registry.update_status(1, "finished") is False
        assert registry.get_run(1) is None
        assert registry.list_runs() == []
        assert registry.delete_run(1) is False
