"""
Deterministic MDP abstractions, episode execution and solution evaluation.

A solution is a simulator input: it initialises the MDP, the policy under test
plays one deterministic episode, and the episode is characterised by a
behaviour descriptor, a fitness (accumulated reward, to be minimised by the
search) and a test-oracle verdict.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, ContractViolationError, ParameterError, RejectedInputError
from utils import format_number, format_vector, parse_vector

logger = logging.getLogger(__name__)


class TerminalReason(str, Enum):
    GOAL = "goal"
    FAULT = "fault"
    STEP_LIMIT = "step-limit"


@dataclass(frozen=True)
class InputSpace:
    """Per-dimension bounds of a simulator's parameter space (inclusive)."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    integer: bool = False

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, values: Sequence[float]) -> bool:
        if len(values) != self.dim:
            return False
        for value, lo, hi in zip(values, self.lower, self.upper):
            if not np.isfinite(value) or value < lo or value > hi:
                return False
            if self.integer and float(value) != int(value):
                return False
        return True

    def sample(self, rng: np.random.Generator) -> Tuple:
        if self.integer:
            return tuple(int(rng.integers(lo, hi + 1)) for lo, hi in zip(self.lower, self.upper))
        return tuple(float(rng.uniform(lo, hi)) for lo, hi in zip(self.lower, self.upper))

    def clip(self, values: Sequence[float]) -> Tuple:
        clipped = np.clip(np.asarray(values, dtype=float), self.lower, self.upper)
        if self.integer:
            return tuple(int(v) for v in np.rint(clipped))
        return tuple(float(v) for v in clipped)


@dataclass(frozen=True)
class ObservationSpace:
    dim: int
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]


@dataclass(frozen=True)
class ActionSpace:
    """Either ``n`` discrete actions or a continuous box of dimension ``dim``."""
    n: Optional[int] = None
    dim: int = 0
    low: float = -1.0
    high: float = 1.0

    @property
    def discrete(self) -> bool:
        return self.n is not None

    def contains(self, action: Any) -> bool:
        if self.discrete:
            if isinstance(action, (bool, np.bool_)):
                return False
            if not isinstance(action, (int, np.integer)):
                return False
            return 0 <= int(action) < self.n
        arr = np.asarray(action, dtype=float)
        if arr.shape != (self.dim,) or not np.all(np.isfinite(arr)):
            return False
        return bool(np.all(arr >= self.low) and np.all(arr <= self.high))


@dataclass(frozen=True)
class SolutionInput:
    """A point of the search space: one simulator parameter vector."""
    env: str
    values: Tuple

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class Trajectory:
    states: List[np.ndarray]
    actions: List[Any]
    rewards: List[float]
    terminated_by: TerminalReason

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) + 1 == len(self.rewards) + 1):
            raise ContractViolationError(
                f"Inconsistent trajectory: {len(self.states)} states, "
                f"{len(self.actions)} actions, {len(self.rewards)} rewards"
            )

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class BehaviorSpace:
    """A 2D behaviour space: which descriptors are extracted and their bounds."""
    name: str
    env: str
    descriptors: Tuple[str, str]
    lower: Tuple[float, float]
    upper: Tuple[float, float]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or len(self.lower) != len(self.descriptors):
            raise ConfigError(f"Behaviour space {self.name}: bounds and descriptors differ in length")
        for lo, hi in zip(self.lower, self.upper):
            if not lo < hi:
                raise ConfigError(f"Behaviour space {self.name}: lower bound {lo} not below upper bound {hi}")

    def clip(self, behavior: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(behavior, dtype=float), self.lower, self.upper)


@dataclass
class EvalResult:
    behavior: np.ndarray
    fitness: float
    oracle: bool
    final_state: np.ndarray
    input: SolutionInput
    steps: int = 0


class Mdp(ABC):
    """
    A deterministic simulator with a parameterised initial situation.

    Subclasses implement :meth:`_initial_state`, :meth:`_transition`,
    :meth:`_observe` and :meth:`mutate`; instances hold the state of one
    episode and must not be shared between concurrent episodes.
    """

    tag: str = ""
    observation_space: ObservationSpace
    action_space: ActionSpace
    input_space: InputSpace
    max_episode_steps: int = 1000

    def __init__(self):
        self._state = None
        self._done = True
        self._seed = 0

    def validate_input(self, solution: SolutionInput) -> None:
        if solution.env != self.tag:
            raise RejectedInputError(f"Input for '{solution.env}' given to the '{self.tag}' environment")
        if len(solution.values) != self.input_space.dim:
            raise RejectedInputError(
                f"Input length {len(solution.values)} does not match {self.tag} input dimension {self.input_space.dim}"
            )
        if not self.input_space.contains(solution.values):
            raise RejectedInputError(f"Input {solution.values} is outside the {self.tag} input space")

    def reset(self, solution: SolutionInput, seed: int = 0) -> np.ndarray:
        self.validate_input(solution)
        # all in-simulator randomness is fixed by the seed; the bundled simulators use none
        self._seed = seed
        self._state = self._initial_state(solution)
        self._done = False
        return self._observe(self._state)

    def step(self, action: Any) -> Tuple[np.ndarray, float, bool, bool]:
        if self._done:
            raise ContractViolationError(f"{self.tag}: step() called on a finished episode")
        if not self.action_space.contains(action):
            raise ContractViolationError(f"{self.tag}: action {action!r} is outside the action space")
        self._state, reward, terminal, fault = self._transition(self._state, action)
        self._done = terminal
        return self._observe(self._state), float(reward), terminal, fault

    def sample_input(self, rng: np.random.Generator) -> SolutionInput:
        return SolutionInput(self.tag, self.input_space.sample(rng))

    @abstractmethod
    def _initial_state(self, solution: SolutionInput) -> Any:
        ...

    @abstractmethod
    def _transition(self, state: Any, action: Any) -> Tuple[Any, float, bool, bool]:
        ...

    @abstractmethod
    def _observe(self, state: Any) -> np.ndarray:
        ...

    @abstractmethod
    def mutate(self, solution: SolutionInput, rng: np.random.Generator) -> SolutionInput:
        ...


PolicyLike = Union[Callable[[np.ndarray], Any], Any]


def _act(policy: PolicyLike) -> Callable[[np.ndarray], Any]:
    return policy.act if hasattr(policy, "act") else policy


def run_episode(mdp: Mdp, policy: PolicyLike, solution: SolutionInput, seed: int = 0) -> Trajectory:
    """
    Initialise ``mdp`` with ``solution`` and let ``policy`` play until a terminal
    state or the step limit.

    Raises:
        RejectedInputError: the input does not fit the environment.
        ContractViolationError: the policy emitted an action outside the action space.
    """
    act = _act(policy)
    observation = mdp.reset(solution, seed)
    states = [observation]
    actions = []
    rewards = []
    terminated_by = TerminalReason.STEP_LIMIT

    for _ in range(mdp.max_episode_steps):
        action = act(observation)
        if not mdp.action_space.contains(action):
            raise ContractViolationError(
                f"Policy emitted {action!r}, outside the {mdp.tag} action space"
            )
        observation, reward, terminal, fault = mdp.step(action)
        states.append(observation)
        actions.append(np.array(action, dtype=float) if not mdp.action_space.discrete else int(action))
        rewards.append(reward)
        if terminal:
            terminated_by = TerminalReason.FAULT if fault else TerminalReason.GOAL
            break

    return Trajectory(states=states, actions=actions, rewards=rewards, terminated_by=terminated_by)


def discounted_return(trajectory: Union[Trajectory, Sequence[float]], gamma: float) -> float:
    """Sum of gamma^(t-1) * r_t over the episode; gamma = 1 is the plain reward sum."""
    if not (0.0 < gamma <= 1.0):
        raise ParameterError(f"gamma must lie in (0, 1], got {gamma}")
    rewards = trajectory.rewards if isinstance(trajectory, Trajectory) else trajectory
    rewards = np.asarray(rewards, dtype=float)
    if rewards.size == 0:
        return 0.0
    if gamma == 1.0:
        return float(np.sum(rewards))
    return float(np.dot(rewards, gamma ** np.arange(rewards.size)))


def evaluate(mdp: Mdp, policy: PolicyLike, solution: SolutionInput,
             bspace: BehaviorSpace, seed: int = 0) -> EvalResult:
    """Run one test: behaviour, fitness (undiscounted return) and oracle verdict."""
    from behavior import extract_behavior

    trajectory = run_episode(mdp, policy, solution, seed)
    behavior = extract_behavior(mdp.tag, bspace, trajectory)
    fitness = discounted_return(trajectory, 1.0)
    oracle = trajectory.terminated_by == TerminalReason.FAULT
    return EvalResult(
        behavior=behavior,
        fitness=fitness,
        oracle=oracle,
        final_state=np.array(trajectory.final_state, dtype=float),
        input=solution,
        steps=len(trajectory),
    )


def trajectory_to_text(trajectory: Trajectory) -> str:
    """
    Serialise a trajectory, one step per line: ``state|action|reward``.

    The first line records the terminal reason, the last line holds the final
    state alone.
    """
    lines = [f"# terminated_by={trajectory.terminated_by.value}"]
    for state, action, reward in zip(trajectory.states, trajectory.actions, trajectory.rewards):
        action_text = format_vector(np.atleast_1d(action)) if not isinstance(action, int) else str(action)
        lines.append(f"{format_vector(state)}|{action_text}|{format_number(reward)}")
    lines.append(format_vector(trajectory.final_state))
    return "\n".join(lines) + "\n"


def trajectory_from_text(text: str, discrete_actions: bool = True) -> Trajectory:
    """Inverse of :func:`trajectory_to_text` (values rounded to 9 significant digits)."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("# terminated_by="):
        raise ConfigError("Trajectory text is missing its header line")
    terminated_by = TerminalReason(lines[0].split("=", 1)[1])
    states, actions, rewards = [], [], []
    for line in lines[1:-1]:
        state_text, action_text, reward_text = line.split("|")
        states.append(np.array(parse_vector(state_text)))
        if discrete_actions:
            actions.append(int(action_text))
        else:
            actions.append(np.array(parse_vector(action_text)))
        rewards.append(float(reward_text))
    states.append(np.array(parse_vector(lines[-1])))
    return Trajectory(states=states, actions=actions, rewards=rewards, terminated_by=terminated_by)
