"""
Baselines: Random Testing and a simplified MDPFuzz-style fuzzer.

The fuzzer keeps a pool of seeds and adds a mutant to the pool when its
trajectory features (final state concatenated with the behaviour descriptor)
are unlikely under a Gaussian mixture fitted on everything seen so far.
Seeds are picked uniformly; the sensitivity-based prioritisation of the
original fuzzer is left out.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from campaign import CampaignConfig, CampaignLog, EvaluationRecord, RandomStreams, as_streams
from gmm import GmmModel, gmm_fit, gmm_loglik, gmm_score_samples
from mdp import BehaviorSpace, Mdp, SolutionInput, evaluate

logger = logging.getLogger(__name__)

RANDOM_TESTING = "random"
MDPFUZZ = "mdpfuzz"


def random_testing_run(mdp: Mdp, policy, bspace: BehaviorSpace, config: CampaignConfig,
                       rng: Union[RandomStreams, np.random.Generator]) -> CampaignLog:
    """``budget`` independent uniform inputs, each evaluated and logged."""
    config.validate(RANDOM_TESTING)
    streams = as_streams(rng)
    log = CampaignLog(method=RANDOM_TESTING, seed=streams.seed_index, env=mdp.tag, behavior_space=bspace.name)
    started = time.perf_counter()
    for _ in range(config.budget):
        log.append(evaluate(mdp, policy, mdp.sample_input(streams.sampling), bspace))
    logger.info(
        f"Random Testing on {mdp.tag}/{bspace.name} seed {streams.seed_index}: "
        f"{len(log)} evaluations, {time.perf_counter() - started:.1f}s"
    )
    return log


@dataclass
class PoolEntry:
    input: SolutionInput
    fitness: float
    fresh: bool = False


@dataclass
class SeedPool:
    """Fuzzing seeds; only ever grows, and is never empty once initialised."""
    entries: List[PoolEntry] = field(default_factory=list)

    def add(self, solution: SolutionInput, fitness: float, fresh: bool = False) -> None:
        self.entries.append(PoolEntry(solution, float(fitness), fresh))

    def select(self, rng: np.random.Generator) -> PoolEntry:
        if not self.entries:
            raise ValueError("Cannot select from an empty seed pool")
        return self.entries[int(rng.integers(len(self.entries)))]

    def __len__(self) -> int:
        return len(self.entries)


def trajectory_features(record: EvaluationRecord) -> np.ndarray:
    """Fixed-length fuzzer features: final state followed by the behaviour descriptor."""
    return np.concatenate([np.asarray(record.final_state, dtype=float), np.asarray(record.behavior, dtype=float)])


def _freshness_model(features: List[np.ndarray], config: CampaignConfig, rng: np.random.Generator):
    data = np.vstack(features)
    model = gmm_fit(data, config.gmm_components, config.gmm_iterations, rng)
    if config.freshness_threshold is not None:
        threshold = float(config.freshness_threshold)
    else:
        threshold = float(np.percentile(gmm_score_samples(model, data), config.freshness_percentile))
    return model, threshold


def mdpfuzz_run(mdp: Mdp, policy, bspace: BehaviorSpace, config: CampaignConfig,
                rng: Union[RandomStreams, np.random.Generator]) -> CampaignLog:
    """
    Two-phase guided fuzzing.

    Phase 1 evaluates ``init_budget`` uniform inputs, seeds the pool with them
    and fits the mixture on their features. Phase 2 mutates uniformly chosen
    pool seeds; the parent always stays in the pool and a mutant whose feature
    log-likelihood falls below the freshness threshold is added to it. The
    mixture and the threshold are refitted every ``refit_period`` phase-2
    evaluations on all features seen so far.
    """
    config.validate(MDPFUZZ)
    streams = as_streams(rng)
    log = CampaignLog(method=MDPFUZZ, seed=streams.seed_index, env=mdp.tag, behavior_space=bspace.name)
    started = time.perf_counter()
    pool = SeedPool()
    features: List[np.ndarray] = []

    for _ in range(config.init_budget):
        solution = mdp.sample_input(streams.sampling)
        record = log.append(evaluate(mdp, policy, solution, bspace))
        pool.add(solution, record.fitness)
        features.append(trajectory_features(record))

    fuzz_budget = config.budget - config.init_budget
    if fuzz_budget > 0 and not pool:
        logger.warning("Fuzzing without an initialisation phase; seeding the pool with one uniform input")
        solution = mdp.sample_input(streams.sampling)
        record = log.append(evaluate(mdp, policy, solution, bspace))
        pool.add(solution, record.fitness)
        features.append(trajectory_features(record))
        fuzz_budget -= 1

    model: Optional[GmmModel] = None
    threshold = -np.inf
    if fuzz_budget > 0:
        model, threshold = _freshness_model(features, config, streams.search)

    faults = 0
    for step in range(fuzz_budget):
        parent = pool.select(streams.search)
        mutant = mdp.mutate(parent.input, streams.search)
        record = log.append(evaluate(mdp, policy, mutant, bspace))
        feature = trajectory_features(record)
        features.append(feature)
        faults += record.oracle

        if gmm_loglik(model, feature) < threshold:
            pool.add(mutant, record.fitness, fresh=True)

        if (step + 1) % config.refit_period == 0 and step + 1 < fuzz_budget:
            model, threshold = _freshness_model(features, config, streams.search)
            logger.debug(f"Refitted freshness model on {len(features)} features, threshold {threshold:.3f}")

    logger.info(
        f"MDPFuzz on {mdp.tag}/{bspace.name} seed {streams.seed_index}: {len(log)} evaluations, "
        f"pool size {len(pool)}, {faults} faulty mutants, {time.perf_counter() - started:.1f}s"
    )
    return log
