"""Taxi on the static 18x13 map: step function, mutation operator and environment."""
import logging
from collections import deque
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from errors import RejectedInputError
from map_loader import TaxiMapLoader, TaxiWorld
from mdp import ActionSpace, InputSpace, Mdp, ObservationSpace, SolutionInput

logger = logging.getLogger(__name__)

NORTH, SOUTH, EAST, WEST, PICKUP, DROPOFF = range(6)
MOVES = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}

STEP_REWARD = -1.0
DROPOFF_BONUS = 20.0
FAULT_REWARD = -10.0
MAX_EPISODE_STEPS = 400


class TaxiState(NamedTuple):
    row: int
    col: int
    passenger: int  # landmark index, or len(landmarks) when riding in the taxi
    destination: int


def in_taxi(world: TaxiWorld) -> int:
    return len(world.landmarks)


def taxi_step(world: TaxiWorld, state: TaxiState, action: int,
              fault_terminates: bool = True) -> Tuple[TaxiState, float, bool, bool]:
    """
    Advance the taxi by one action.

    Wall/border collisions and illegal pickups/dropoffs are faults; the state is
    left unchanged and, unless ``fault_terminates`` is False (training), the
    episode ends.

    Returns:
        (next state, reward, terminal flag, fault flag)
    """
    cell = (state.row, state.col)
    riding = in_taxi(world)

    if action in MOVES:
        d_row, d_col = MOVES[action]
        target = (state.row + d_row, state.col + d_col)
        if world.blocked(cell, target):
            return state, FAULT_REWARD, fault_terminates, True
        return state._replace(row=target[0], col=target[1]), STEP_REWARD, False, False

    if action == PICKUP:
        if state.passenger != riding and world.landmarks[state.passenger] == cell:
            return state._replace(passenger=riding), STEP_REWARD, False, False
        return state, FAULT_REWARD, fault_terminates, True

    if action == DROPOFF:
        if state.passenger == riding and world.landmarks[state.destination] == cell:
            return state._replace(passenger=state.destination), STEP_REWARD + DROPOFF_BONUS, True, False
        return state, FAULT_REWARD, fault_terminates, True

    raise ValueError(f"Unknown taxi action {action}")


def taxi_input_space(world: TaxiWorld) -> InputSpace:
    n_landmarks = len(world.landmarks)
    return InputSpace(
        lower=(0, 0, 0, 0),
        upper=(world.height - 1, world.width - 1, n_landmarks - 1, n_landmarks - 1),
        integer=True,
    )


def apply_taxi_move(world: TaxiWorld, values: Sequence[int], component: int, delta: int) -> Tuple[int, ...]:
    """Shift one input component by ``delta``, clipped to its range."""
    space = taxi_input_space(world)
    shifted = list(values)
    shifted[component] = int(min(max(shifted[component] + delta, space.lower[component]), space.upper[component]))
    return tuple(shifted)


def taxi_mutate(world: TaxiWorld, solution: SolutionInput, rng: np.random.Generator) -> SolutionInput:
    """
    Increment or decrement exactly one input component.

    The move is drawn uniformly among the +-1 moves that stay in range and keep
    the passenger landmark distinct from the destination.
    """
    candidates = []
    for component in range(4):
        for delta in (-1, 1):
            moved = apply_taxi_move(world, solution.values, component, delta)
            if moved[component] == solution.values[component]:
                continue
            if moved[2] == moved[3]:
                continue
            candidates.append(moved)
    choice = candidates[int(rng.integers(len(candidates)))]
    return SolutionInput(solution.env, choice)


def shortest_path_actions(world: TaxiWorld, start: Tuple[int, int], goal: Tuple[int, int]) -> List[int]:
    """Breadth-first search for the shortest wall-free move sequence between two cells."""
    if start == goal:
        return []
    previous = {start: None}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for action, (d_row, d_col) in MOVES.items():
            target = (cell[0] + d_row, cell[1] + d_col)
            if target in previous or world.blocked(cell, target):
                continue
            previous[target] = (cell, action)
            if target == goal:
                actions = []
                node = target
                while previous[node] is not None:
                    node, step_action = previous[node]
                    actions.append(step_action)
                return actions[::-1]
            queue.append(target)
    raise ValueError(f"No path from {start} to {goal}")


def optimal_actions(world: TaxiWorld, values: Sequence[int]) -> List[int]:
    """Shortest complete solution: drive to the passenger, pick up, drive to the destination, drop off."""
    row, col, passenger, destination = values
    pickup_cell = world.landmarks[passenger]
    dropoff_cell = world.landmarks[destination]
    return (
        shortest_path_actions(world, (row, col), pickup_cell) + [PICKUP]
        + shortest_path_actions(world, pickup_cell, dropoff_cell) + [DROPOFF]
    )


class TaxiEnv(Mdp):
    """Taxi environment parameterised by (taxi row, taxi col, passenger landmark, destination landmark)."""

    tag = "taxi"

    def __init__(self, world: Optional[TaxiWorld] = None, max_episode_steps: int = MAX_EPISODE_STEPS):
        super().__init__()
        self.world = world if world is not None else TaxiMapLoader().load_world()
        self.max_episode_steps = max_episode_steps
        n_landmarks = len(self.world.landmarks)
        self.input_space = taxi_input_space(self.world)
        self.observation_space = ObservationSpace(
            dim=4,
            lower=(0.0, 0.0, 0.0, 0.0),
            upper=(self.world.height - 1.0, self.world.width - 1.0, float(n_landmarks), n_landmarks - 1.0),
        )
        self.action_space = ActionSpace(n=6)

    def validate_input(self, solution: SolutionInput) -> None:
        super().validate_input(solution)
        if solution.values[2] == solution.values[3]:
            raise RejectedInputError(f"Passenger landmark equals destination in {solution.values}")

    def sample_input(self, rng: np.random.Generator) -> SolutionInput:
        n_landmarks = len(self.world.landmarks)
        row = int(rng.integers(self.world.height))
        col = int(rng.integers(self.world.width))
        passenger = int(rng.integers(n_landmarks))
        destination = int(rng.integers(n_landmarks - 1))
        if destination >= passenger:
            destination += 1
        return SolutionInput(self.tag, (row, col, passenger, destination))

    def mutate(self, solution: SolutionInput, rng: np.random.Generator) -> SolutionInput:
        return taxi_mutate(self.world, solution, rng)

    def _initial_state(self, solution: SolutionInput) -> TaxiState:
        return TaxiState(*(int(v) for v in solution.values))

    def _transition(self, state: TaxiState, action: int):
        return taxi_step(self.world, state, int(action))

    def _observe(self, state: TaxiState) -> np.ndarray:
        return np.array(state, dtype=float)
