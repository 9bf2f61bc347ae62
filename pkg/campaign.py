"""Campaign configuration, evaluation log and per-campaign random streams."""
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from errors import ConfigError
from mdp import EvalResult, SolutionInput
from utils import format_number, stable_hash

logger = logging.getLogger(__name__)

NOVELTY_THRESHOLDS = {"taxi": 0.9, "lander": 0.005, "walker": 0.005}


def default_novelty_threshold(env: str) -> float:
    return NOVELTY_THRESHOLDS.get(env, 0.005)


@dataclass
class CampaignConfig:
    """Budgets and hyperparameters of one test campaign."""
    budget: int = 5000
    init_budget: int = 1000
    population_size: int = 100
    iterations: int = 50
    grid_resolution: int = 50
    novelty_threshold: Optional[float] = None
    novelty_k: int = 3
    lander_sigma: float = 100.0
    walker_geometric_p: float = 0.5
    master_seed: int = 0
    behavior_space: Optional[str] = None
    gmm_components: int = 10
    gmm_iterations: int = 50
    refit_period: int = 500
    freshness_percentile: float = 10.0
    freshness_threshold: Optional[float] = None

    def validate(self, method: Optional[str] = None) -> None:
        """
        Raises:
            ConfigError: on inconsistent budgets or out-of-range hyperparameters
        """
        if self.budget < 0 or self.init_budget < 0:
            raise ConfigError("Budgets must be non-negative")
        if self.master_seed < 0:
            raise ConfigError(f"master_seed must be non-negative, got {self.master_seed}")
        if self.init_budget > self.budget:
            raise ConfigError(f"init_budget {self.init_budget} exceeds budget {self.budget}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if self.iterations > 0 and self.population_size < 1:
            raise ConfigError(f"population_size must be at least 1 when iterating, got {self.population_size}")
        if self.grid_resolution <= 0:
            raise ConfigError(f"grid_resolution must be positive, got {self.grid_resolution}")
        if self.novelty_k <= 0:
            raise ConfigError(f"novelty_k must be positive, got {self.novelty_k}")
        if self.gmm_components <= 0 or self.gmm_iterations <= 0 or self.refit_period <= 0:
            raise ConfigError("GMM components, iterations and refit period must be positive")
        if not (0.0 <= self.freshness_percentile <= 100.0):
            raise ConfigError(f"freshness_percentile must lie in [0, 100], got {self.freshness_percentile}")
        if method == "novelty-search" and self.population_size * self.iterations != self.budget:
            raise ConfigError(
                f"Novelty Search needs population_size x iterations = budget "
                f"({self.population_size} x {self.iterations} != {self.budget})"
            )

    def threshold_for(self, env: str) -> float:
        if self.novelty_threshold is not None:
            return float(self.novelty_threshold)
        return default_novelty_threshold(env)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvaluationRecord:
    index: int
    input: SolutionInput
    behavior: np.ndarray
    fitness: float
    oracle: bool
    final_state: np.ndarray


@dataclass
class CampaignLog:
    """Every evaluation of one campaign, in order; indices run from 1."""
    method: str
    seed: int
    env: str = ""
    behavior_space: str = ""
    records: List[EvaluationRecord] = field(default_factory=list)

    def append(self, result: EvalResult) -> EvaluationRecord:
        record = EvaluationRecord(
            index=len(self.records) + 1,
            input=result.input,
            behavior=np.asarray(result.behavior, dtype=float),
            fitness=float(result.fitness),
            oracle=bool(result.oracle),
            final_state=np.asarray(result.final_state, dtype=float),
        )
        self.records.append(record)
        return record

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_frame(self) -> pd.DataFrame:
        """
        One row per evaluation with every number already formatted, so the CSV
        text is identical across platforms.
        """
        columns = ["index", "method", "seed"]
        if self.records:
            first = self.records[0]
            columns += [f"input_{i}" for i in range(len(first.input.values))]
            columns += [f"behavior_{i}" for i in range(len(first.behavior))]
            columns += ["fitness", "oracle"]
            columns += [f"final_state_{i}" for i in range(len(first.final_state))]

        rows = []
        for record in self.records:
            row = [str(record.index), self.method, str(self.seed)]
            row += [format_number(v) for v in record.input.values]
            row += [format_number(float(v)) for v in record.behavior]
            row += [format_number(record.fitness), format_number(record.oracle)]
            row += [format_number(float(v)) for v in record.final_state]
            rows.append(row)
        return pd.DataFrame(rows, columns=columns, dtype=str)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, env: str = "", behavior_space: str = "") -> "CampaignLog":
        if frame.empty:
            return cls(method="", seed=0, env=env, behavior_space=behavior_space)
        input_cols = [c for c in frame.columns if c.startswith("input_")]
        behavior_cols = [c for c in frame.columns if c.startswith("behavior_")]
        state_cols = [c for c in frame.columns if c.startswith("final_state_")]
        integer_inputs = env in ("taxi", "walker")

        log = cls(method=str(frame["method"].iloc[0]), seed=int(frame["seed"].iloc[0]),
                  env=env, behavior_space=behavior_space)
        for row in frame.itertuples(index=False):
            values = row._asdict()
            raw_input = [values[c] for c in input_cols]
            parsed_input = tuple(int(float(v)) if integer_inputs else float(v) for v in raw_input)
            log.records.append(EvaluationRecord(
                index=int(values["index"]),
                input=SolutionInput(env, parsed_input),
                behavior=np.array([float(values[c]) for c in behavior_cols]),
                fitness=float(values["fitness"]),
                oracle=str(values["oracle"]) in ("1", "True", "true"),
                final_state=np.array([float(values[c]) for c in state_cols]),
            ))
        return log


def faults_from_log(log: Union[CampaignLog, List[EvaluationRecord]]) -> List[EvaluationRecord]:
    """Fault records, deduplicated by exact input equality, in discovery order."""
    seen = set()
    faults = []
    for record in log:
        if record.oracle and record.input.values not in seen:
            seen.add(record.input.values)
            faults.append(record)
    return faults


def campaign_seed(master_seed: int, method: str, seed_index: int, behavior_space: str) -> int:
    """Documented campaign seed: stable SHA-256 hash of the four parts."""
    return stable_hash(master_seed, method, seed_index, behavior_space)


class RandomStreams:
    """
    The two generators of a campaign.

    ``sampling`` (master seed, method, seed index) draws uniform inputs;
    ``search`` additionally depends on the behaviour space and drives
    selection, mutation and model fitting. Campaigns that differ only in the
    behaviour space therefore draw the same initial random inputs.
    """

    def __init__(self, master_seed: int = 0, method: str = "", seed_index: int = 0, behavior_space: str = ""):
        self.master_seed = master_seed
        self.method = method
        self.seed_index = seed_index
        self.behavior_space = behavior_space
        self.seed = campaign_seed(master_seed, method, seed_index, behavior_space)
        self.sampling = np.random.default_rng(
            np.random.SeedSequence([master_seed, stable_hash(method), seed_index])
        )
        self.search = np.random.default_rng(
            np.random.SeedSequence([master_seed, stable_hash(method), seed_index, stable_hash(behavior_space)])
        )

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "RandomStreams":
        streams = cls.__new__(cls)
        streams.master_seed = 0
        streams.method = ""
        streams.seed_index = 0
        streams.behavior_space = ""
        streams.seed = 0
        streams.sampling = rng
        streams.search = rng
        return streams


def as_streams(rng: Union[RandomStreams, np.random.Generator, int, None]) -> RandomStreams:
    if isinstance(rng, RandomStreams):
        return rng
    if isinstance(rng, np.random.Generator):
        return RandomStreams.from_generator(rng)
    return RandomStreams.from_generator(np.random.default_rng(rng))
