import logging
from typing import Optional

from errors import ConfigError
from lander_env import LanderEnv
from map_loader import TaxiMapLoader
from mdp import Mdp
from taxi_env import TaxiEnv
from walker_env import WalkerEnv

logger = logging.getLogger(__name__)

ENVIRONMENTS = ("taxi", "lander", "walker")


def make_env(name: str, lander_sigma: float = 100.0, walker_geometric_p: float = 0.5,
             taxi_map: Optional[str] = None) -> Mdp:
    """
    Create a fresh environment instance.

    Args:
        name: Registered environment name
        lander_sigma: Gaussian mutation scale of the lander input
        walker_geometric_p: Success probability of the walker slot-count distribution
        taxi_map: Optional path to an alternative Taxi map file

    Returns:
        A new, unshared Mdp instance
    """
    if name == "taxi":
        return TaxiEnv(world=TaxiMapLoader(taxi_map).load_world())
    if name == "lander":
        return LanderEnv(mutation_sigma=lander_sigma)
    if name == "walker":
        return WalkerEnv(mutation_p=walker_geometric_p)
    raise ConfigError(f"Unknown environment '{name}' (available: {', '.join(ENVIRONMENTS)})")
