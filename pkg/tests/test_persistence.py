import json

import numpy as np
import pytest

from campaign import CampaignLog
from errors import ConfigError
from map_loader import TaxiMapLoader
from mdp import EvalResult, SolutionInput
from persistence import PersistenceManager, load_frame, load_q_table, save_frame, save_q_table
from policies import N_TAXI_ACTIONS, QTable, taxi_state_count

SMALL_MAP = """\
+-----+
|R: |G|
|Y:B: |
+-----+
"""


class TestQTableFiles:

    def setup_method(self):
        """Setup test fixtures."""
        self.world = TaxiMapLoader().load_world()
        values = np.random.default_rng(0).normal(size=(taxi_state_count(self.world), N_TAXI_ACTIONS))
        self.table = QTable(values, self.world, {"seed": 0, "episodes": 10})

    def test_round_trip_is_exact(self, tmp_path):
        path = save_q_table(self.table, tmp_path / "q.txt")
        loaded = load_q_table(path, self.world)
        assert loaded == self.table
        assert loaded.params == {"seed": 0, "episodes": 10}

    def test_equal_tables_give_equal_bytes(self, tmp_path):
        first = save_q_table(self.table, tmp_path / "a.txt")
        second = save_q_table(QTable(self.table.values.copy(), self.world, dict(self.table.params)),
                              tmp_path / "b.txt")
        assert first.read_bytes() == second.read_bytes()

    def test_creates_parent_directories(self, tmp_path):
        path = save_q_table(self.table, tmp_path / "policies" / "nested" / "q.txt")
        assert path.exists()

    def test_other_map_is_rejected(self, tmp_path):
        path = save_q_table(self.table, tmp_path / "q.txt")
        with pytest.raises(ConfigError, match="trained on map"):
            load_q_table(path, TaxiMapLoader.parse(SMALL_MAP))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="train-policy"):
            load_q_table(tmp_path / "none.txt", self.world)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text("not json\n1 2 3\n")
        with pytest.raises(ConfigError):
            load_q_table(path, self.world)

    def test_wrong_format_tag(self, tmp_path):
        path = save_q_table(self.table, tmp_path / "q.txt")
        lines = path.read_text().splitlines(keepends=True)
        header = json.loads(lines[0])
        header["format"] = "qtable-v0"
        path.write_text(json.dumps(header) + "\n" + "".join(lines[1:]))
        with pytest.raises(ConfigError, match="unsupported"):
            load_q_table(path, self.world)


class TestPersistenceManager:

    def setup_method(self):
        """Setup test fixtures."""
        self.log = CampaignLog(method="map-elites", seed=2, env="lander", behavior_space="touchdown")
        for i in range(5):
            self.log.append(EvalResult(
                behavior=np.array([0.1 * i, -1.0]),
                fitness=-float(i),
                oracle=i % 2 == 0,
                final_state=np.arange(6, dtype=float) * i,
                input=SolutionInput("lander", (10.0 * i, -3.5)),
            ))

    def test_log_layout(self, tmp_path):
        manager = PersistenceManager(tmp_path)
        path = manager.save_campaign_log(self.log)
        assert path == tmp_path / "logs" / "touchdown" / "map-elites-seed2.csv"
        assert manager.list_campaign_logs() == [path]

    def test_log_round_trip(self, tmp_path):
        manager = PersistenceManager(tmp_path)
        manager.save_campaign_log(self.log)
        loaded = manager.load_campaign_log("map-elites", 2, "lander", "touchdown")
        assert len(loaded) == 5
        assert loaded.to_frame().equals(self.log.to_frame())

    def test_csv_text_is_stable(self, tmp_path):
        manager = PersistenceManager(tmp_path)
        path = manager.save_campaign_log(self.log)
        first = path.read_bytes()
        manager.save_campaign_log(self.log)
        assert path.read_bytes() == first
        assert b"\r\n" not in first

    def test_missing_log(self, tmp_path):
        with pytest.raises(ConfigError):
            PersistenceManager(tmp_path).load_campaign_log("random", 0, "lander", "touchdown")

    def test_empty_cells_stay_text(self, tmp_path):
        frame = load_frame(save_frame(self.log.to_frame().assign(fitness=""), tmp_path / "x.csv"))
        assert set(frame["fitness"]) == {""}

    def test_manifest_round_trip(self, tmp_path):
        manager = PersistenceManager(tmp_path)
        manager.save_campaign_log(self.log)
        assert manager.save_manifest({"version": "test", "incomplete": False})
        manifest = manager.load_manifest()
        assert manifest["version"] == "test"
        assert list(manifest["artifacts"]) == ["logs/touchdown/map-elites-seed2.csv"]

    def test_missing_manifest(self, tmp_path):
        assert PersistenceManager(tmp_path).load_manifest() is None

    def test_unreadable_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{broken")
        assert PersistenceManager(tmp_path).load_manifest() is None

    def test_save_failure_returns_false(self, tmp_path):
        assert PersistenceManager(tmp_path).save_manifest({"bad": object()}) is False
