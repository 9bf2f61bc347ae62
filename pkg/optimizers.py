"""
The two QD optimizers adapted to policy testing.

Both run a single sequential loop of exactly ``budget`` evaluations, logging
every one of them. Fitness (accumulated reward) is minimised. Neither method
uses curiosity scores or parent-score feedback.
"""
import logging
import time
from typing import List, Tuple, Union

import numpy as np

from archives import GridArchive, NoveltyArchive, grid_attempt_to_add
from campaign import CampaignConfig, CampaignLog, EvaluationRecord, RandomStreams, as_streams
from mdp import BehaviorSpace, Mdp, SolutionInput, evaluate

logger = logging.getLogger(__name__)

MAP_ELITES = "map-elites"
NOVELTY_SEARCH = "novelty-search"


def map_elites_run(mdp: Mdp, policy, bspace: BehaviorSpace, config: CampaignConfig,
                   rng: Union[RandomStreams, np.random.Generator]) -> Tuple[GridArchive, CampaignLog]:
    """
    MAP-Elites with uniform parent selection among the current elites.

    The first ``init_budget`` inputs are sampled uniformly; every later input
    is a mutant of a uniformly chosen elite.

    Returns:
        (final grid archive, campaign log of ``budget`` records)
    """
    config.validate(MAP_ELITES)
    streams = as_streams(rng)
    archive = GridArchive(bspace, (config.grid_resolution, config.grid_resolution))
    log = CampaignLog(method=MAP_ELITES, seed=streams.seed_index, env=mdp.tag, behavior_space=bspace.name)
    started = time.perf_counter()
    warned = False

    for i in range(config.budget):
        if i < config.init_budget:
            solution = mdp.sample_input(streams.sampling)
        elif len(archive) == 0:
            if not warned:
                logger.warning("MAP-Elites archive is empty after initialisation; sampling uniformly")
                warned = True
            solution = mdp.sample_input(streams.sampling)
        else:
            parent = archive.sample_elite(streams.search)
            solution = mdp.mutate(parent.input, streams.search)

        record = log.append(evaluate(mdp, policy, solution, bspace))
        grid_attempt_to_add(archive, record)

    logger.info(
        f"MAP-Elites on {mdp.tag}/{bspace.name} seed {streams.seed_index}: {len(log)} evaluations, "
        f"{len(archive)} elites, {time.perf_counter() - started:.1f}s"
    )
    return archive, log


def tournament_select(population: List[EvaluationRecord], scores: np.ndarray,
                      rng: np.random.Generator) -> SolutionInput:
    """Size-2 tournament on novelty scores; a tie goes to the first contestant."""
    first, second = (int(i) for i in rng.integers(len(population), size=2))
    winner = first if scores[first] >= scores[second] else second
    return population[winner].input


def novelty_search_run(mdp: Mdp, policy, bspace: BehaviorSpace, config: CampaignConfig,
                       rng: Union[RandomStreams, np.random.Generator]) -> Tuple[NoveltyArchive, CampaignLog]:
    """
    Generational Novelty Search.

    Iteration 1 evaluates a uniform random population. Every later iteration
    produces a full offspring batch by tournament selection over the previous
    population and mutation. After a batch is evaluated, each member's novelty
    is computed against the archive as it was at the start of the iteration
    plus the other batch members; members above the threshold join the
    archive in batch order, and the same scores drive the next tournament.

    Returns:
        (novelty archive, campaign log of ``population_size * iterations`` records)
    """
    config.validate(NOVELTY_SEARCH)
    streams = as_streams(rng)
    archive = NoveltyArchive(config.threshold_for(mdp.tag), config.novelty_k)
    log = CampaignLog(method=NOVELTY_SEARCH, seed=streams.seed_index, env=mdp.tag, behavior_space=bspace.name)
    started = time.perf_counter()

    population: List[EvaluationRecord] = []
    scores = np.empty(0)
    for iteration in range(config.iterations):
        if iteration == 0:
            batch = [mdp.sample_input(streams.sampling) for _ in range(config.population_size)]
        else:
            batch = [
                mdp.mutate(tournament_select(population, scores, streams.search), streams.search)
                for _ in range(config.population_size)
            ]

        population = [log.append(evaluate(mdp, policy, solution, bspace)) for solution in batch]
        behaviors = np.array([record.behavior for record in population], dtype=float)
        scores, _ = archive.update(behaviors)
        logger.debug(f"Novelty Search iteration {iteration + 1}: archive size {archive.size()}")

    logger.info(
        f"Novelty Search on {mdp.tag}/{bspace.name} seed {streams.seed_index}: {len(log)} evaluations, "
        f"archive size {archive.size()}, {time.perf_counter() - started:.1f}s"
    )
    return archive, log
