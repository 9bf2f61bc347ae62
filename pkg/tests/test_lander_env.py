from pathlib import Path

import numpy as np
import pytest

from errors import ParameterError
from lander_env import (MAIN_ENGINE, NOOP, LanderEnv, LanderState, LanderWorld, initial_state, lander_mutate,
                        lander_step, shaping_potential)
from mdp import SolutionInput, TerminalReason, run_episode, trajectory_from_text, trajectory_to_text
from policies import heuristic_lander_policy

GOLDEN_TRACE = Path(__file__).parent / "golden" / "lander_zero_force.txt"


class TestLanderStep:

    def setup_method(self):
        """Setup test fixtures."""
        self.world = LanderWorld()

    def test_resting_on_pad_is_goal(self):
        state = LanderState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        next_state, reward, terminal, fault = lander_step(self.world, state, NOOP)
        assert terminal and not fault
        assert next_state.y == 0.0
        assert reward > 0

    def test_maximal_downward_force_crashes(self):
        env = LanderEnv()
        trajectory = run_episode(env, lambda obs: NOOP, SolutionInput("lander", (0.0, -1000.0)))
        assert trajectory.terminated_by == TerminalReason.FAULT
        assert trajectory.final_state[1] == 0.0

    def test_free_fall_crashes(self):
        trajectory = run_episode(LanderEnv(), lambda obs: NOOP, SolutionInput("lander", (0.0, 0.0)))
        assert trajectory.terminated_by == TerminalReason.FAULT

    def test_vertical_speed_non_increasing_in_free_fall(self):
        trajectory = run_episode(LanderEnv(), lambda obs: NOOP, SolutionInput("lander", (0.0, 0.0)))
        vy = [state[3] for state in trajectory.states]
        assert all(b <= a for a, b in zip(vy, vy[1:]))

    def test_leaving_viewport_sideways_is_fault(self):
        trajectory = run_episode(LanderEnv(), lambda obs: MAIN_ENGINE, SolutionInput("lander", (1000.0, 1000.0)))
        assert trajectory.terminated_by == TerminalReason.FAULT
        final = trajectory.final_state
        assert abs(final[0]) > 10.0 or final[1] > 14.0

    def test_landing_off_pad_is_fault(self):
        state = LanderState(3.0, 0.001, 0.0, 0.0, 0.0, 0.0)
        _, _, terminal, fault = lander_step(self.world, state, NOOP)
        assert terminal and fault

    def test_shaping_rewards_approach(self):
        far = LanderState(5.0, 8.0, 0.0, 0.0, 0.0, 0.0)
        near = LanderState(2.0, 3.0, 0.0, 0.0, 0.0, 0.0)
        assert shaping_potential(near) < shaping_potential(far)

    def test_main_engine_pushes_up(self):
        state = initial_state(self.world, (0.0, 0.0))
        after_noop, _, _, _ = lander_step(self.world, state, NOOP)
        after_main, _, _, _ = lander_step(self.world, state, MAIN_ENGINE)
        assert after_main.vy > after_noop.vy

    def test_step_is_deterministic(self):
        state = LanderState(1.0, 5.0, 0.3, -1.0, 0.1, 0.0)
        assert lander_step(self.world, state, MAIN_ENGINE) == lander_step(self.world, state, MAIN_ENGINE)


class TestHeuristicLanding:

    def setup_method(self):
        """Setup test fixtures."""
        self.env = LanderEnv()
        self.trajectory = run_episode(self.env, heuristic_lander_policy, SolutionInput("lander", (0.0, 0.0)))

    def test_lands_without_fault(self):
        assert self.trajectory.terminated_by == TerminalReason.GOAL
        assert abs(self.trajectory.final_state[0]) <= 1.0
        assert abs(self.trajectory.final_state[3]) <= 4.0

    def test_matches_golden_trace(self):
        assert GOLDEN_TRACE.exists(), f"missing reference trace {GOLDEN_TRACE}"
        golden = trajectory_from_text(GOLDEN_TRACE.read_text(encoding="utf-8"))
        assert golden.terminated_by == self.trajectory.terminated_by
        assert golden.actions == self.trajectory.actions
        np.testing.assert_allclose(np.array(self.trajectory.states), np.array(golden.states), rtol=1e-8, atol=1e-12)
        np.testing.assert_allclose(self.trajectory.rewards, golden.rewards, rtol=1e-8, atol=1e-12)

    def test_golden_trace_shape(self):
        golden = trajectory_from_text(GOLDEN_TRACE.read_text(encoding="utf-8"))
        assert golden.terminated_by == TerminalReason.GOAL
        assert len(golden) == 338
        assert golden.final_state[1] == 0.0
        assert golden.final_state[3] == pytest.approx(-0.248)

    def test_text_round_trip(self):
        restored = trajectory_from_text(trajectory_to_text(self.trajectory))
        assert restored.terminated_by == TerminalReason.GOAL
        assert len(restored) == len(self.trajectory)


class TestLanderMutate:

    def setup_method(self):
        """Setup test fixtures."""
        self.rng = np.random.default_rng(7)

    def test_boundary_clip(self):
        solution = SolutionInput("lander", (1000.0, 0.0))
        for _ in range(200):
            mutated = lander_mutate(solution, self.rng, sigma=100.0)
            assert -1000.0 <= mutated.values[0] <= 1000.0
            assert -1000.0 <= mutated.values[1] <= 1000.0

    def test_zero_sigma_is_identity(self):
        solution = SolutionInput("lander", (12.5, -300.0))
        assert lander_mutate(solution, self.rng, sigma=0.0) == solution

    def test_unbiased_in_the_interior(self):
        solution = SolutionInput("lander", (0.0, 0.0))
        n = 100_000
        deltas = np.array([lander_mutate(solution, self.rng, sigma=100.0).values for _ in range(n)])
        standard_error = 100.0 / np.sqrt(n)
        assert np.all(np.abs(deltas.mean(axis=0)) < 3 * standard_error)

    def test_negative_sigma(self):
        with pytest.raises(ParameterError):
            lander_mutate(SolutionInput("lander", (0.0, 0.0)), self.rng, sigma=-1.0)
