import numpy as np
import pytest

from campaign import (CampaignConfig, CampaignLog, EvaluationRecord, RandomStreams, as_streams, campaign_seed,
                      default_novelty_threshold, faults_from_log)
from errors import ConfigError
from mdp import EvalResult, SolutionInput


def result(values, oracle=False, fitness=-1.0, behavior=(0.5, -1.0)):
    return EvalResult(
        behavior=np.array(behavior),
        fitness=fitness,
        oracle=oracle,
        final_state=np.array([0.1, 0.2, 0.3]),
        input=SolutionInput("lander", tuple(values)),
    )


class TestCampaignConfig:

    def test_defaults_are_valid(self):
        CampaignConfig().validate()
        CampaignConfig().validate("novelty-search")

    def test_init_budget_above_budget(self):
        with pytest.raises(ConfigError):
            CampaignConfig(budget=10, init_budget=20).validate()

    def test_negative_budget(self):
        with pytest.raises(ConfigError):
            CampaignConfig(budget=-1, init_budget=0).validate()

    def test_novelty_search_product(self):
        config = CampaignConfig(budget=100, init_budget=10, population_size=10, iterations=5)
        config.validate("map-elites")
        with pytest.raises(ConfigError, match="population_size x iterations"):
            config.validate("novelty-search")

    def test_empty_population_with_iterations(self):
        with pytest.raises(ConfigError, match="population_size"):
            CampaignConfig(budget=0, init_budget=0, population_size=0, iterations=3).validate("novelty-search")
        CampaignConfig(budget=0, init_budget=0, population_size=0, iterations=0).validate("novelty-search")

    def test_negative_iterations(self):
        with pytest.raises(ConfigError, match="iterations"):
            CampaignConfig(iterations=-1).validate()

    def test_freshness_percentile_range(self):
        with pytest.raises(ConfigError):
            CampaignConfig(freshness_percentile=120.0).validate()

    def test_threshold_defaults_per_environment(self):
        config = CampaignConfig()
        assert config.threshold_for("taxi") == default_novelty_threshold("taxi") == 0.9
        assert config.threshold_for("walker") == 0.005
        assert CampaignConfig(novelty_threshold=0.3).threshold_for("taxi") == 0.3


class TestCampaignLog:

    def setup_method(self):
        """Setup test fixtures."""
        self.log = CampaignLog(method="random", seed=3, env="lander", behavior_space="touchdown")
        self.log.append(result((1.5, -2.0)))
        self.log.append(result((100.0, 250.25), oracle=True, fitness=-120.5))

    def test_indices_start_at_one(self):
        assert [record.index for record in self.log] == [1, 2]

    def test_frame_columns(self):
        frame = self.log.to_frame()
        assert list(frame.columns) == [
            "index", "method", "seed", "input_0", "input_1", "behavior_0", "behavior_1",
            "fitness", "oracle", "final_state_0", "final_state_1", "final_state_2",
        ]
        assert frame["oracle"].tolist() == ["0", "1"]
        assert frame["fitness"].iloc[1] == "-1.20500000e+02"

    def test_frame_round_trip(self):
        restored = CampaignLog.from_frame(self.log.to_frame(), env="lander", behavior_space="touchdown")
        assert restored.method == "random" and restored.seed == 3
        assert len(restored) == 2
        for original, loaded in zip(self.log, restored):
            assert loaded.index == original.index
            assert loaded.input.values == pytest.approx(original.input.values)
            assert loaded.oracle == original.oracle
            assert loaded.fitness == pytest.approx(original.fitness)
            np.testing.assert_allclose(loaded.behavior, original.behavior)
            np.testing.assert_allclose(loaded.final_state, original.final_state)

    def test_integer_inputs_stay_integers(self):
        log = CampaignLog(method="random", seed=0, env="taxi")
        log.append(EvalResult(np.array([3.0, 4.0]), -7.0, False, np.zeros(4), SolutionInput("taxi", (1, 2, 3, 4))))
        restored = CampaignLog.from_frame(log.to_frame(), env="taxi")
        assert restored.records[0].input.values == (1, 2, 3, 4)

    def test_empty_log(self):
        frame = CampaignLog(method="random", seed=0).to_frame()
        assert list(frame.columns) == ["index", "method", "seed"]
        assert len(CampaignLog.from_frame(frame)) == 0


class TestFaults:

    def test_duplicate_fault_inputs_count_once(self):
        log = CampaignLog(method="random", seed=0)
        log.append(result((1.0, 1.0), oracle=True))
        log.append(result((1.0, 1.0), oracle=True))
        log.append(result((2.0, 1.0), oracle=False))
        log.append(result((3.0, 1.0), oracle=True))
        faults = faults_from_log(log)
        assert [record.index for record in faults] == [1, 4]

    def test_accepts_record_lists(self):
        records = [EvaluationRecord(1, SolutionInput("lander", (0.0, 0.0)), np.zeros(2), 0.0, True, np.zeros(2))]
        assert len(faults_from_log(records)) == 1


class TestRandomStreams:

    def test_campaign_seed_is_stable(self):
        assert campaign_seed(0, "map-elites", 1, "touchdown") == campaign_seed(0, "map-elites", 1, "touchdown")
        assert campaign_seed(0, "map-elites", 1, "touchdown") != campaign_seed(0, "map-elites", 2, "touchdown")

    def test_sampling_is_shared_across_behavior_spaces(self):
        first = RandomStreams(0, "map-elites", 0, "distance_hull_angle")
        second = RandomStreams(0, "map-elites", 0, "jump_hip_angle")
        np.testing.assert_array_equal(first.sampling.random(10), second.sampling.random(10))
        assert not np.array_equal(first.search.random(10), second.search.random(10))

    def test_methods_get_different_sampling(self):
        first = RandomStreams(0, "random", 0, "touchdown")
        second = RandomStreams(0, "mdpfuzz", 0, "touchdown")
        assert not np.array_equal(first.sampling.random(10), second.sampling.random(10))

    def test_generator_wrapping(self):
        rng = np.random.default_rng(1)
        streams = as_streams(rng)
        assert streams.sampling is rng and streams.search is rng
        assert as_streams(streams) is streams
