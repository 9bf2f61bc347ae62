"""
Point-mass lander with orientation over flat terrain with a centred pad.

The initial situation is the force applied to the lander at the top of the
viewport; the terrain never changes between episodes.
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from errors import ParameterError
from mdp import ActionSpace, InputSpace, Mdp, ObservationSpace, SolutionInput

logger = logging.getLogger(__name__)

NOOP, LEFT_ENGINE, MAIN_ENGINE, RIGHT_ENGINE = range(4)

FORCE_LIMIT = 1000.0
MAX_EPISODE_STEPS = 1000
GOAL_REWARD = 100.0
FAULT_REWARD = -100.0


@dataclass(frozen=True)
class LanderWorld:
    """Physics constants and the fixed terrain."""
    gravity: float = 9.8
    dt: float = 0.02
    main_acceleration: float = 30.0
    side_acceleration: float = 5.0
    side_torque: float = 0.5
    attitude_stiffness: float = 6.0
    attitude_damping: float = 5.0
    force_to_velocity: float = 0.007
    start_x: float = 0.0
    start_y: float = 12.0
    crash_speed: float = 4.0
    tip_angle: float = 0.8
    pad_half_width: float = 1.0
    viewport_half_width: float = 10.0
    viewport_height: float = 14.0


class LanderState(NamedTuple):
    x: float
    y: float
    vx: float
    vy: float
    angle: float
    angular_velocity: float


def shaping_potential(state: LanderState) -> float:
    """Distance to the pad centre plus speed magnitude; lower is better."""
    return math.hypot(state.x, state.y) + math.hypot(state.vx, state.vy)


def initial_state(world: LanderWorld, force: Tuple[float, float]) -> LanderState:
    fx, fy = force
    return LanderState(
        x=world.start_x,
        y=world.start_y,
        vx=fx * world.force_to_velocity,
        vy=fy * world.force_to_velocity,
        angle=0.0,
        angular_velocity=0.0,
    )


def lander_step(world: LanderWorld, state: LanderState, action: int) -> Tuple[LanderState, float, bool, bool]:
    """
    Semi-implicit Euler step.

    Returns:
        (next state, reward, terminal flag, fault flag)
    """
    ax = 0.0
    ay = -world.gravity
    alpha = -world.attitude_stiffness * state.angle - world.attitude_damping * state.angular_velocity

    if action == MAIN_ENGINE:
        ax += world.main_acceleration * math.sin(state.angle)
        ay += world.main_acceleration * math.cos(state.angle)
    elif action == LEFT_ENGINE:
        ax += world.side_acceleration
        alpha += world.side_torque
    elif action == RIGHT_ENGINE:
        ax -= world.side_acceleration
        alpha -= world.side_torque
    elif action != NOOP:
        raise ValueError(f"Unknown lander action {action}")

    vx = state.vx + ax * world.dt
    vy = state.vy + ay * world.dt
    angular_velocity = state.angular_velocity + alpha * world.dt
    x = state.x + vx * world.dt
    y = state.y + vy * world.dt
    angle = state.angle + angular_velocity * world.dt

    next_state = LanderState(x, y, vx, vy, angle, angular_velocity)
    shaping = shaping_potential(state) - shaping_potential(next_state)

    if y <= 0.0:
        # touchdown: the position is pinned to the ground, velocities are kept as impact values
        next_state = next_state._replace(y=0.0)
        crashed = abs(vy) > world.crash_speed or abs(angle) > world.tip_angle or abs(x) > world.pad_half_width
        if crashed:
            return next_state, shaping + FAULT_REWARD, True, True
        return next_state, shaping + GOAL_REWARD, True, False

    if abs(x) > world.viewport_half_width or y > world.viewport_height:
        return next_state, shaping + FAULT_REWARD, True, True

    return next_state, shaping, False, False


def lander_mutate(solution: SolutionInput, rng: np.random.Generator, sigma: float = 100.0) -> SolutionInput:
    """Gaussian perturbation of the initial force, clipped to [-1000, 1000]^2."""
    if sigma < 0:
        raise ParameterError(f"Mutation sigma must be non-negative, got {sigma}")
    values = np.asarray(solution.values, dtype=float)
    noise = rng.normal(0.0, sigma, size=values.shape) if sigma > 0 else np.zeros_like(values)
    mutated = np.clip(values + noise, -FORCE_LIMIT, FORCE_LIMIT)
    return SolutionInput(solution.env, tuple(float(v) for v in mutated))


class LanderEnv(Mdp):
    """Lander parameterised by the initial force (fx, fy)."""

    tag = "lander"

    def __init__(self, world: LanderWorld = None, mutation_sigma: float = 100.0,
                 max_episode_steps: int = MAX_EPISODE_STEPS):
        super().__init__()
        if mutation_sigma < 0:
            raise ParameterError(f"Mutation sigma must be non-negative, got {mutation_sigma}")
        self.world = world or LanderWorld()
        self.mutation_sigma = mutation_sigma
        self.max_episode_steps = max_episode_steps
        self.input_space = InputSpace(lower=(-FORCE_LIMIT, -FORCE_LIMIT), upper=(FORCE_LIMIT, FORCE_LIMIT))
        w = self.world
        self.observation_space = ObservationSpace(
            dim=6,
            lower=(-w.viewport_half_width, 0.0, -np.inf, -np.inf, -np.pi, -np.inf),
            upper=(w.viewport_half_width, w.viewport_height, np.inf, np.inf, np.pi, np.inf),
        )
        self.action_space = ActionSpace(n=4)

    def mutate(self, solution: SolutionInput, rng: np.random.Generator) -> SolutionInput:
        return lander_mutate(solution, rng, self.mutation_sigma)

    def _initial_state(self, solution: SolutionInput) -> LanderState:
        return initial_state(self.world, solution.values)

    def _transition(self, state: LanderState, action: int):
        return lander_step(self.world, state, int(action))

    def _observe(self, state: LanderState) -> np.ndarray:
        return np.array(state, dtype=float)
