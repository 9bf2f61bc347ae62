"""
Stylised two-hip walker on a 15-slot obstacle course.

Slot values: 0 flat, 1 pit, 2 steps, 3 stump. Each slot is 4 units long and
its obstacle occupies the zone [1.5, 2.5] measured from the slot start; the
course starts after a 4-unit flat run-up.

Kinematics: a hip commanded backwards (action <= 0) keeps its leg on the
ground; a moving stance leg pushes the hull forward by leg length times hip
speed. Both hips commanded forwards is a jump: the hull keeps its forward
speed for at most ``max_air_steps`` steps. The hull angle relaxes towards zero
and receives shocks from obstacles; the walker falls when it exceeds the fall
threshold.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from errors import ParameterError
from mdp import ActionSpace, InputSpace, Mdp, ObservationSpace, SolutionInput

logger = logging.getLogger(__name__)

FLAT, PIT, STEPS, STUMP = range(4)

N_SLOTS = 15
MAX_EPISODE_STEPS = 2000
FAULT_REWARD = -100.0


@dataclass(frozen=True)
class WalkerWorld:
    """Course layout plus the constants of the stylised dynamics."""
    course: Tuple[int, ...] = (FLAT,) * N_SLOTS
    run_up: float = 4.0
    slot_length: float = 4.0
    zone_start: float = 1.5
    zone_end: float = 2.5
    dt: float = 0.02
    hip_speed: float = 5.0
    leg_length: float = 0.6
    hull_time_constant: float = 1.92
    stump_shock: float = -0.62
    step_edge_shock: float = 0.14
    step_edges: Tuple[float, ...] = (1.5, 2.0, 2.5)
    stump_offset: float = 2.0
    landing_shock: float = 0.35
    pit_tilt: float = 0.2
    fall_angle: float = 1.0
    max_air_steps: int = 30
    torque_cost: float = 0.01

    @property
    def course_end(self) -> float:
        return self.run_up + self.slot_length * len(self.course)

    @property
    def hull_decay(self) -> float:
        return math.exp(-self.dt / self.hull_time_constant)

    def slot_start(self, slot: int) -> float:
        return self.run_up + slot * self.slot_length

    def next_obstacle(self, x: float) -> Tuple[int, float]:
        """Type of the first slot whose obstacle zone ends ahead of ``x`` and the distance to that zone's start."""
        for slot, kind in enumerate(self.course):
            start = self.slot_start(slot)
            if start + self.zone_end > x:
                return kind, start + self.zone_start - x
        return FLAT, self.course_end - x


class WalkerState(NamedTuple):
    x: float
    hull_angle: float
    hip1: float
    hip2: float
    hip_speed1: float
    hip_speed2: float
    contact1: bool
    contact2: bool
    torque: float
    vx: float
    air_steps: int


def initial_walker_state() -> WalkerState:
    return WalkerState(
        x=0.0, hull_angle=0.0, hip1=0.0, hip2=0.0, hip_speed1=0.0, hip_speed2=0.0,
        contact1=True, contact2=True, torque=0.0, vx=0.0, air_steps=0,
    )


def _crossed(world: WalkerWorld, x_old: float, x_new: float, offset: float, kinds: Sequence[int]) -> int:
    """Number of obstacle points at ``offset`` inside slots of the given kinds crossed by (x_old, x_new]."""
    count = 0
    for slot, kind in enumerate(world.course):
        if kind in kinds:
            point = world.slot_start(slot) + offset
            if x_old < point <= x_new:
                count += 1
    return count


def _in_pit(world: WalkerWorld, x: float) -> bool:
    for slot, kind in enumerate(world.course):
        if kind == PIT:
            start = world.slot_start(slot)
            if start + world.zone_start <= x <= start + world.zone_end:
                return True
    return False


def walker_step(world: WalkerWorld, state: WalkerState, action: Sequence[float]) -> Tuple[WalkerState, float, bool, bool]:
    """
    Advance the walker by one time step.

    Args:
        world: Course and constants
        state: Current walker state
        action: Hip speed commands in [-1, 1]^2

    Returns:
        (next state, reward, terminal flag, fault flag)
    """
    a1, a2 = float(action[0]), float(action[1])
    speed1, speed2 = a1 * world.hip_speed, a2 * world.hip_speed
    contact1, contact2 = a1 <= 0.0, a2 <= 0.0
    airborne = not (contact1 or contact2)
    if airborne and state.air_steps >= world.max_air_steps:
        contact1 = contact2 = True
        airborne = False

    hip1 = min(max(state.hip1 + speed1 * world.dt, -1.0), 1.0)
    hip2 = min(max(state.hip2 + speed2 * world.dt, -1.0), 1.0)

    if airborne:
        vx = state.vx
        air_steps = state.air_steps + 1
    else:
        stance_speeds = [0.0]
        if contact1 and speed1 < 0.0 and state.hip1 > -1.0:
            stance_speeds.append(-speed1 * world.leg_length)
        if contact2 and speed2 < 0.0 and state.hip2 > -1.0:
            stance_speeds.append(-speed2 * world.leg_length)
        vx = max(stance_speeds)
        air_steps = 0
    landing = state.air_steps > 0 and not airborne

    dx = vx * world.dt
    x = state.x + dx

    hull_angle = state.hull_angle * world.hull_decay
    if not airborne:
        hull_angle += world.stump_shock * _crossed(world, state.x, x, world.stump_offset, (STUMP,))
    for edge in world.step_edges:
        hull_angle += world.step_edge_shock * _crossed(world, state.x, x, edge, (STEPS,))
    if landing:
        hull_angle += world.landing_shock
    if not airborne and _in_pit(world, x):
        hull_angle += world.pit_tilt

    torque = (abs(a1) + abs(a2)) * (1.0 + abs(state.hull_angle))
    next_state = WalkerState(
        x=x, hull_angle=hull_angle, hip1=hip1, hip2=hip2,
        hip_speed1=speed1, hip_speed2=speed2,
        contact1=contact1, contact2=contact2,
        torque=torque, vx=vx, air_steps=air_steps,
    )

    if abs(hull_angle) > world.fall_angle:
        return next_state, FAULT_REWARD, True, True
    reward = dx - world.torque_cost * torque
    return next_state, reward, x >= world.course_end, False


def walker_observation(world: WalkerWorld, state: WalkerState) -> np.ndarray:
    """11 features: remaining distance fraction, hull angle, hips, hip speeds, contacts, torque, next obstacle."""
    kind, distance = world.next_obstacle(state.x)
    return np.array([
        (world.course_end - state.x) / world.course_end,
        state.hull_angle,
        state.hip1,
        state.hip2,
        state.hip_speed1,
        state.hip_speed2,
        float(state.contact1),
        float(state.contact2),
        state.torque,
        float(kind),
        distance,
    ], dtype=float)


def walker_mutate(solution: SolutionInput, rng: np.random.Generator, p: float = 0.5) -> SolutionInput:
    """
    Reassign a random nonempty subset of slots uniformly over {0, 1, 2, 3}.

    The subset size is geometric with success probability ``p``, capped at the
    course length; the reassigned value may equal the old one.
    """
    if not (0.0 < p <= 1.0):
        raise ParameterError(f"Geometric p must lie in (0, 1], got {p}")
    values = list(solution.values)
    k = min(int(rng.geometric(p)), len(values))
    slots = rng.choice(len(values), size=k, replace=False)
    for slot, value in zip(slots, rng.integers(0, 4, size=k)):
        values[int(slot)] = int(value)
    return SolutionInput(solution.env, tuple(values))


class WalkerEnv(Mdp):
    """Walker parameterised by the 15 obstacle slots of the course."""

    tag = "walker"

    def __init__(self, mutation_p: float = 0.5, max_episode_steps: int = MAX_EPISODE_STEPS,
                 template: WalkerWorld = None):
        super().__init__()
        if not (0.0 < mutation_p <= 1.0):
            raise ParameterError(f"Geometric p must lie in (0, 1], got {mutation_p}")
        self.mutation_p = mutation_p
        self.max_episode_steps = max_episode_steps
        self.template = template or WalkerWorld()
        self.world = self.template
        n_slots = len(self.template.course)
        self.input_space = InputSpace(lower=(0,) * n_slots, upper=(3,) * n_slots, integer=True)
        self.observation_space = ObservationSpace(
            dim=11,
            lower=(0.0, -np.inf, -1.0, -1.0, -self.template.hip_speed, -self.template.hip_speed,
                   0.0, 0.0, 0.0, 0.0, -np.inf),
            upper=(1.0, np.inf, 1.0, 1.0, self.template.hip_speed, self.template.hip_speed,
                   1.0, 1.0, np.inf, 3.0, np.inf),
        )
        self.action_space = ActionSpace(dim=2, low=-1.0, high=1.0)

    def mutate(self, solution: SolutionInput, rng: np.random.Generator) -> SolutionInput:
        return walker_mutate(solution, rng, self.mutation_p)

    def _initial_state(self, solution: SolutionInput) -> WalkerState:
        self.world = replace(self.template, course=tuple(int(v) for v in solution.values))
        return initial_walker_state()

    def _transition(self, state: WalkerState, action):
        return walker_step(self.world, state, action)

    def _observe(self, state: WalkerState) -> np.ndarray:
        return walker_observation(self.world, state)
