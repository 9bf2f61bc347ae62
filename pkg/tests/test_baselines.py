import numpy as np
import pytest

from baselines import (MDPFUZZ, RANDOM_TESTING, SeedPool, mdpfuzz_run, random_testing_run,
                       trajectory_features)
from behavior import get_behavior_space
from campaign import CampaignConfig, RandomStreams
from lander_env import LanderEnv
from mdp import SolutionInput
from policies import heuristic_lander_policy


class TestRandomTesting:

    def setup_method(self):
        """Setup test fixtures."""
        self.env = LanderEnv()
        self.bspace = get_behavior_space("lander")

    def test_inputs_follow_the_sampling_stream(self):
        config = CampaignConfig(budget=15, init_budget=0)
        log = random_testing_run(self.env, heuristic_lander_policy, self.bspace, config,
                                 RandomStreams(0, RANDOM_TESTING, 2, self.bspace.name))
        sampling = RandomStreams(0, RANDOM_TESTING, 2, self.bspace.name).sampling
        assert [record.input for record in log] == [self.env.sample_input(sampling) for _ in range(15)]
        assert log.seed == 2 and log.method == RANDOM_TESTING

    def test_zero_budget(self):
        config = CampaignConfig(budget=0, init_budget=0)
        log = random_testing_run(self.env, heuristic_lander_policy, self.bspace, config, np.random.default_rng(0))
        assert len(log) == 0


class TestSeedPool:

    def test_select_from_empty(self):
        with pytest.raises(ValueError):
            SeedPool().select(np.random.default_rng(0))

    def test_select_is_uniform(self):
        pool = SeedPool()
        for i in range(4):
            pool.add(SolutionInput("lander", (float(i), 0.0)), fitness=-i)
        rng = np.random.default_rng(0)
        counts = np.zeros(4)
        for _ in range(4000):
            counts[int(pool.select(rng).input.values[0])] += 1
        assert np.all(np.abs(counts - 1000) < 150)
        assert len(pool) == 4


class TestMdpFuzz:

    def setup_method(self):
        """Setup test fixtures."""
        self.env = LanderEnv()
        self.bspace = get_behavior_space("lander")
        self.config = CampaignConfig(budget=30, init_budget=10, gmm_components=2, gmm_iterations=5,
                                     refit_period=7)

    def run(self, config=None, rng=None):
        rng = rng if rng is not None else RandomStreams(0, MDPFUZZ, 0, self.bspace.name)
        return mdpfuzz_run(self.env, heuristic_lander_policy, self.bspace, config or self.config, rng)

    def test_budget_is_exact(self):
        log = self.run()
        assert len(log) == 30
        assert log.records[-1].index == 30

    def test_is_deterministic(self):
        assert self.run().to_frame().equals(self.run().to_frame())

    def test_without_fuzzing_phase_matches_random_testing(self):
        config = CampaignConfig(budget=10, init_budget=10)
        fuzz_log = self.run(config, np.random.default_rng(9))
        random_log = random_testing_run(self.env, heuristic_lander_policy, self.bspace, config,
                                        np.random.default_rng(9))
        assert [r.input for r in fuzz_log] == [r.input for r in random_log]

    def test_features_are_final_state_then_behavior(self):
        log = self.run()
        record = log.records[0]
        features = trajectory_features(record)
        assert len(features) == len(record.final_state) + len(record.behavior)
        np.testing.assert_array_equal(features[-2:], record.behavior)

    @pytest.mark.parametrize("threshold, expected_fresh", [(float("-inf"), 0), (float("inf"), 20)])
    def test_threshold_controls_pool_growth(self, monkeypatch, threshold, expected_fresh):
        added = []
        original_add = SeedPool.add

        def recording_add(pool, solution, fitness, fresh=False):
            added.append(fresh)
            original_add(pool, solution, fitness, fresh)

        monkeypatch.setattr(SeedPool, "add", recording_add)
        config = CampaignConfig(budget=30, init_budget=10, gmm_components=2, gmm_iterations=5,
                                refit_period=7, freshness_threshold=threshold)
        self.run(config)
        assert added.count(False) == 10
        assert added.count(True) == expected_fresh

    def test_without_initialisation_phase(self):
        config = CampaignConfig(budget=5, init_budget=0, gmm_components=2, gmm_iterations=3)
        log = self.run(config)
        assert len(log) == 5
