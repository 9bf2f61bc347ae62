"""Behaviour spaces per environment and descriptor extraction from trajectories."""
import logging
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from errors import ConfigError
from mdp import BehaviorSpace, Trajectory, run_episode

logger = logging.getLogger(__name__)

TAXI_PICKUP_ACTION = 4

# Walker per-step features, read from the 11-dimensional walker observation
WALKER_FEATURES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "distance": lambda obs: obs[:, 0],
    "hull_angle": lambda obs: obs[:, 1],
    "torque": lambda obs: obs[:, 8],
    "jump": lambda obs: ((obs[:, 6] == 0.0) & (obs[:, 7] == 0.0)).astype(float),
    "hip_angle": lambda obs: 0.5 * (obs[:, 2] + obs[:, 3]),
    "hip_speed": lambda obs: 0.5 * (obs[:, 4] + obs[:, 5]),
}

# 5th-95th percentile of the heuristic walker's per-episode feature means over
# CALIBRATION_INPUTS uniform courses drawn with CALIBRATION_SEED, widened by 25%;
# regenerate with measure_walker_bounds()
CALIBRATION_INPUTS = 1000
CALIBRATION_SEED = 0

WALKER_FEATURE_BOUNDS: Dict[str, Tuple[float, float]] = {
    "distance": (0.4705, 0.7635),
    "hull_angle": (-0.2506, 0.3022),
    "torque": (2.3548, 2.6900),
    "jump": (0.0070, 0.1241),
    "hip_angle": (0.0078, 0.1961),
    "hip_speed": (0.0351, 0.6203),
}

WALKER_SPACE_DESCRIPTORS: Dict[str, Tuple[str, str]] = {
    "distance_hull_angle": ("distance", "hull_angle"),
    "hull_angle_torque": ("hull_angle", "torque"),
    "jump_hip_angle": ("jump", "hip_angle"),
    "hip_angle_hip_speed": ("hip_angle", "hip_speed"),
}


def _walker_space(name: str, bounds: Dict[str, Tuple[float, float]] = None) -> BehaviorSpace:
    bounds = bounds or WALKER_FEATURE_BOUNDS
    first, second = WALKER_SPACE_DESCRIPTORS[name]
    return BehaviorSpace(
        name=name,
        env="walker",
        descriptors=(first, second),
        lower=(bounds[first][0], bounds[second][0]),
        upper=(bounds[first][1], bounds[second][1]),
    )


BEHAVIOR_SPACES: Dict[str, BehaviorSpace] = {
    "pickup_dropoff": BehaviorSpace(
        name="pickup_dropoff",
        env="taxi",
        descriptors=("steps_to_pickup", "steps_after_pickup"),
        lower=(0.0, 0.0),
        upper=(400.0, 400.0),
    ),
    "touchdown": BehaviorSpace(
        name="touchdown",
        env="lander",
        descriptors=("touchdown_x", "touchdown_vy"),
        lower=(-10.0, -8.0),
        upper=(10.0, 0.0),
    ),
    **{name: _walker_space(name) for name in WALKER_SPACE_DESCRIPTORS},
}

DEFAULT_BEHAVIOR_SPACES = {
    "taxi": "pickup_dropoff",
    "lander": "touchdown",
    "walker": "distance_hull_angle",
}


def behavior_spaces_for(env: str) -> List[str]:
    return [name for name, space in BEHAVIOR_SPACES.items() if space.env == env]


def get_behavior_space(env: str, name: str = None) -> BehaviorSpace:
    """
    Look up a registered behaviour space.

    Args:
        env: Environment tag
        name: Space name; the environment's default when omitted

    Raises:
        ConfigError: unknown space, or a space registered for another environment
    """
    if name is None:
        if env not in DEFAULT_BEHAVIOR_SPACES:
            raise ConfigError(f"Unknown environment '{env}'")
        name = DEFAULT_BEHAVIOR_SPACES[env]
    space = BEHAVIOR_SPACES.get(name)
    if space is None:
        raise ConfigError(f"Unknown behaviour space '{name}'")
    if space.env != env:
        raise ConfigError(
            f"Behaviour space '{name}' belongs to '{space.env}', not '{env}' "
            f"(available: {', '.join(behavior_spaces_for(env))})"
        )
    return space


def taxi_pickup_counts(trajectory: Trajectory) -> Tuple[int, int]:
    """(steps until pickup, steps from pickup to the end); (length, 0) without a pickup."""
    n_steps = len(trajectory)
    for t, action in enumerate(trajectory.actions):
        if action == TAXI_PICKUP_ACTION and trajectory.states[t + 1][2] != trajectory.states[t][2]:
            return t + 1, n_steps - (t + 1)
    return n_steps, 0


def walker_feature_means(states: Iterable[np.ndarray]) -> Dict[str, float]:
    obs = np.asarray(list(states), dtype=float)
    return {name: float(np.mean(feature(obs))) for name, feature in WALKER_FEATURES.items()}


def extract_behavior(env: str, bspace: BehaviorSpace, trajectory: Trajectory) -> np.ndarray:
    """
    Behaviour descriptor of an episode, clipped into the space's bounds.

    Lander touchdown values are read from the final state: ground contact and
    leaving the viewport both end the episode, and in the latter case the last
    observed values are used.
    """
    if bspace.env != env or bspace.name not in BEHAVIOR_SPACES:
        raise ConfigError(f"Behaviour space '{bspace.name}' is not registered for '{env}'")

    if env == "taxi":
        raw = taxi_pickup_counts(trajectory)
    elif env == "lander":
        final = trajectory.final_state
        raw = (final[0], final[3])
    elif env == "walker":
        means = walker_feature_means(trajectory.states)
        raw = tuple(means[name] for name in bspace.descriptors)
    else:
        raise ConfigError(f"Unknown environment '{env}'")

    return bspace.clip(raw)


def calibrate_bounds(frame: pd.DataFrame, low_percentile: float = 5.0, high_percentile: float = 95.0,
                     widen: float = 0.25) -> Dict[str, Tuple[float, float]]:
    """
    Per-column bounds from telemetry: the percentile range widened by ``widen``
    of its width (split evenly on both sides).

    Args:
        frame: One row per episode, one column per descriptor feature

    Returns:
        Mapping feature name -> (lower, upper)
    """
    bounds = {}
    for column in frame.columns:
        values = frame[column].to_numpy(dtype=float)
        lo, hi = np.percentile(values, [low_percentile, high_percentile])
        width = max(hi - lo, 1e-6)
        pad = 0.5 * widen * width
        bounds[column] = (float(lo - pad), float(lo + width + pad))
    return bounds


def walker_telemetry(env, policy, inputs) -> pd.DataFrame:
    """Per-input walker feature means obtained by running ``policy`` on each input."""
    rows = [walker_feature_means(run_episode(env, policy, solution).states) for solution in inputs]
    logger.info(f"Collected walker telemetry for {len(rows)} inputs")
    return pd.DataFrame(rows, columns=list(WALKER_FEATURES))


def calibrated_walker_spaces(frame: pd.DataFrame) -> Dict[str, BehaviorSpace]:
    bounds = calibrate_bounds(frame)
    return {name: _walker_space(name, bounds) for name in WALKER_SPACE_DESCRIPTORS}


def measure_walker_bounds(n_inputs: int = CALIBRATION_INPUTS,
                          seed: int = CALIBRATION_SEED) -> Dict[str, Tuple[float, float]]:
    """Run the heuristic walker on ``n_inputs`` seeded uniform courses and calibrate feature bounds."""
    from policies import heuristic_walker_policy
    from walker_env import WalkerEnv

    env = WalkerEnv()
    rng = np.random.default_rng(seed)
    inputs = [env.sample_input(rng) for _ in range(n_inputs)]
    return calibrate_bounds(walker_telemetry(env, heuristic_walker_policy, inputs))
