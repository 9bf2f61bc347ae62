"""
Deterministic policies under test.

Taxi uses a tabular Q-learning agent; the lander and the walker use scripted
heuristic controllers that are imperfect on purpose, so that a non-trivial
fault region exists.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from errors import ParameterError, TrainingFailureError
from lander_env import LEFT_ENGINE, MAIN_ENGINE, NOOP, RIGHT_ENGINE
from map_loader import TaxiWorld
from mdp import Mdp, TerminalReason, run_episode
from taxi_env import TaxiEnv, TaxiState, taxi_step
from walker_env import PIT

logger = logging.getLogger(__name__)

N_TAXI_ACTIONS = 6


# ---------------------------------------------------------------------------
# Taxi: Q-learning
# ---------------------------------------------------------------------------

def taxi_state_count(world: TaxiWorld) -> int:
    n_landmarks = len(world.landmarks)
    return world.height * world.width * (n_landmarks + 1) * n_landmarks


def taxi_state_index(world: TaxiWorld, row: int, col: int, passenger: int, destination: int) -> int:
    """Enumerate (row, col, passenger location incl. in-taxi, destination) densely."""
    n_landmarks = len(world.landmarks)
    return ((row * world.width + col) * (n_landmarks + 1) + passenger) * n_landmarks + destination


def taxi_state_from_index(world: TaxiWorld, index: int) -> TaxiState:
    n_landmarks = len(world.landmarks)
    index, destination = divmod(index, n_landmarks)
    index, passenger = divmod(index, n_landmarks + 1)
    row, col = divmod(index, world.width)
    return TaxiState(row, col, passenger, destination)


@dataclass
class QLearningParams:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    decay_fraction: float = 0.8
    episodes: int = 200_000
    seed: int = 0
    max_steps: int = 200
    solve_rate_gate: float = 0.9
    gate_instances: int = 1000
    max_retries: int = 2

    def validate(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 < self.gamma <= 1.0):
            raise ParameterError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ParameterError(
                f"epsilon schedule must be non-increasing within [0, 1], "
                f"got {self.epsilon_start} -> {self.epsilon_end}"
            )
        if not (0.0 < self.decay_fraction <= 1.0):
            raise ParameterError(f"decay_fraction must lie in (0, 1], got {self.decay_fraction}")
        if self.episodes <= 0 or self.max_steps <= 0 or self.gate_instances <= 0:
            raise ParameterError("episodes, max_steps and gate_instances must be positive")
        if self.max_retries < 0:
            raise ParameterError(f"max_retries must be non-negative, got {self.max_retries}")

    def epsilon(self, episode: int) -> float:
        """Linear decay over the first ``decay_fraction`` of the episodes, constant afterwards."""
        decay_episodes = max(1, int(self.decay_fraction * self.episodes))
        if episode >= decay_episodes:
            return self.epsilon_end
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * episode / decay_episodes

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class QTable:
    """Greedy tabular Taxi policy; ties go to the lowest action index."""

    def __init__(self, values: np.ndarray, world: TaxiWorld, params: Dict[str, Any] = None):
        values = np.array(values, dtype=float)
        if values.shape != (taxi_state_count(world), N_TAXI_ACTIONS):
            raise ParameterError(
                f"Q-table shape {values.shape} does not match the "
                f"{taxi_state_count(world)} x {N_TAXI_ACTIONS} Taxi state space"
            )
        self.values = values
        self.values.setflags(write=False)
        self.world = world
        self.map_hash = world.map_hash
        self.params = dict(params or {})

    def greedy_action(self, state_index: int) -> int:
        # np.argmax returns the first maximum
        return int(np.argmax(self.values[state_index]))

    def act(self, observation: np.ndarray) -> int:
        row, col, passenger, destination = (int(round(v)) for v in observation)
        return self.greedy_action(taxi_state_index(self.world, row, col, passenger, destination))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, QTable)
            and self.map_hash == other.map_hash
            and np.array_equal(self.values, other.values)
        )


def q_update(q: float, reward: float, next_max: float, alpha: float, gamma: float) -> float:
    """Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))."""
    return q + alpha * (reward + gamma * next_max - q)


def build_training_transitions(world: TaxiWorld) -> List[List[Tuple[int, float, bool]]]:
    """(next index, reward, terminal) per state and action, with non-terminal faults."""
    table = []
    for index in range(taxi_state_count(world)):
        state = taxi_state_from_index(world, index)
        row = []
        for action in range(N_TAXI_ACTIONS):
            next_state, reward, terminal, _ = taxi_step(world, state, action, fault_terminates=False)
            row.append((taxi_state_index(world, *next_state), reward, terminal))
        table.append(row)
    return table


def _sample_start_index(world: TaxiWorld, rng: np.random.Generator) -> int:
    n_landmarks = len(world.landmarks)
    row = int(rng.integers(world.height))
    col = int(rng.integers(world.width))
    passenger = int(rng.integers(n_landmarks))
    destination = int(rng.integers(n_landmarks - 1))
    if destination >= passenger:
        destination += 1
    return taxi_state_index(world, row, col, passenger, destination)


def _train_once(world: TaxiWorld, params: QLearningParams,
                transitions: List[List[Tuple[int, float, bool]]]) -> np.ndarray:
    rng = np.random.default_rng(params.seed)
    q = [[0.0] * N_TAXI_ACTIONS for _ in range(len(transitions))]
    alpha, gamma = params.alpha, params.gamma
    report_every = max(1, params.episodes // 10)

    for episode in range(params.episodes):
        epsilon = params.epsilon(episode)
        explore = rng.random(params.max_steps) < epsilon
        random_actions = rng.integers(N_TAXI_ACTIONS, size=params.max_steps)
        state = _sample_start_index(world, rng)

        for t in range(params.max_steps):
            values = q[state]
            action = int(random_actions[t]) if explore[t] else values.index(max(values))
            next_state, reward, terminal = transitions[state][action]
            next_max = 0.0 if terminal else max(q[next_state])
            values[action] = q_update(values[action], reward, next_max, alpha, gamma)
            if terminal:
                break
            state = next_state

        if (episode + 1) % report_every == 0:
            logger.info(f"Q-learning: {episode + 1}/{params.episodes} episodes (epsilon={epsilon:.3f})")

    return np.array(q, dtype=float)


def train_q_learning(world: TaxiWorld, params: QLearningParams = None) -> QTable:
    """
    Train a Taxi Q-table and apply the solve-rate gate.

    Training is seeded by ``params.seed``. If the greedy policy solves fewer
    than ``solve_rate_gate`` of ``gate_instances`` random instances, training
    is rerun with twice the episodes, up to ``max_retries`` times.

    Raises:
        ParameterError: invalid parameters
        TrainingFailureError: the gate still fails after the retry budget
    """
    params = params or QLearningParams()
    params.validate()
    transitions = build_training_transitions(world)
    episodes = params.episodes

    for attempt in range(params.max_retries + 1):
        attempt_params = QLearningParams(**{**params.to_dict(), "episodes": episodes})
        logger.info(f"Training Q-table: attempt {attempt + 1}, {episodes} episodes, seed {params.seed}")
        table = QTable(_train_once(world, attempt_params, transitions), world, attempt_params.to_dict())

        rate = solve_rate(TaxiEnv(world), table, params.gate_instances, np.random.default_rng(params.seed + 1))
        logger.info(f"Q-table solve rate {rate:.3f} (gate {params.solve_rate_gate:.2f})")
        if rate >= params.solve_rate_gate:
            return table
        episodes *= 2

    raise TrainingFailureError(
        f"Q-learning did not reach a {params.solve_rate_gate:.0%} solve rate "
        f"after {params.max_retries + 1} attempts"
    )


# ---------------------------------------------------------------------------
# Heuristic controllers
# ---------------------------------------------------------------------------

LANDER_DESCENT_OFFSET = 0.6
LANDER_DESCENT_GAIN = 0.35
LANDER_DRIFT_GAIN = 0.8
LANDER_DRIFT_LIMIT = 1.5
LANDER_DRIFT_DEADBAND = 0.1
LANDER_ANGLE_LIMIT = 0.3


def heuristic_lander_policy(observation: Sequence[float]) -> int:
    """
    Proportional lander controller.

    Fires the main engine whenever the descent is faster than an envelope that
    shrinks with altitude; otherwise uses the side engines to steer the
    horizontal speed towards a target proportional to the distance from the pad.
    A tilt beyond the angle limit takes priority over the drift: the side engine
    whose torque opposes it fires first.
    """
    x, y, vx, vy, angle = observation[0], observation[1], observation[2], observation[3], observation[4]
    if vy < -(LANDER_DESCENT_OFFSET + LANDER_DESCENT_GAIN * y):
        return MAIN_ENGINE
    if angle > LANDER_ANGLE_LIMIT:
        return RIGHT_ENGINE
    if angle < -LANDER_ANGLE_LIMIT:
        return LEFT_ENGINE
    target_vx = min(max(-LANDER_DRIFT_GAIN * x, -LANDER_DRIFT_LIMIT), LANDER_DRIFT_LIMIT)
    if vx < target_vx - LANDER_DRIFT_DEADBAND:
        return LEFT_ENGINE
    if vx > target_vx + LANDER_DRIFT_DEADBAND:
        return RIGHT_ENGINE
    return NOOP


WALKER_JUMP_LEAD = 0.2
WALKER_SWITCH_ANGLE = 0.8

_STANCE_LEFT = np.array([-1.0, 1.0])
_STANCE_RIGHT = np.array([1.0, -1.0])
_JUMP = np.array([1.0, 1.0])


def heuristic_walker_policy(observation: Sequence[float]) -> np.ndarray:
    """
    Alternating gait with a pit-jump mode.

    One hip drives backwards (stance) while the other swings forward; the legs
    swap when the stance hip passes the switch angle. Both hips swing forward
    over an upcoming pit. Stumps get no special treatment.
    """
    hip1, hip2 = observation[2], observation[3]
    speed1, speed2 = observation[4], observation[5]
    next_kind, next_distance = int(round(observation[9])), observation[10]

    if next_kind == PIT and next_distance <= WALKER_JUMP_LEAD:
        return _JUMP.copy()
    if speed1 < 0.0:
        return (_STANCE_LEFT if hip1 > -WALKER_SWITCH_ANGLE else _STANCE_RIGHT).copy()
    if speed2 < 0.0:
        return (_STANCE_RIGHT if hip2 > -WALKER_SWITCH_ANGLE else _STANCE_LEFT).copy()
    return _STANCE_LEFT.copy()


# ---------------------------------------------------------------------------
# Policy gates
# ---------------------------------------------------------------------------

def _terminal_rate(env: Mdp, policy, n: int, rng: np.random.Generator, reason: TerminalReason) -> float:
    if n <= 0:
        raise ParameterError(f"Number of gate instances must be positive, got {n}")
    hits = 0
    for _ in range(n):
        trajectory = run_episode(env, policy, env.sample_input(rng))
        hits += trajectory.terminated_by == reason
    return hits / n


def solve_rate(env: Mdp, policy, n: int, rng: np.random.Generator) -> float:
    """Fraction of ``n`` random inputs on which the policy reaches the goal."""
    return _terminal_rate(env, policy, n, rng, TerminalReason.GOAL)


def fault_rate(env: Mdp, policy, n: int, rng: np.random.Generator) -> float:
    """Fraction of ``n`` random inputs on which the policy triggers a fault."""
    return _terminal_rate(env, policy, n, rng, TerminalReason.FAULT)
