"""
Experiment orchestration: campaigns over methods x seeds x behaviour spaces,
run-directory layout, metric files, the behaviour-space sweep and reports.
"""
import dataclasses
import json
import logging
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from baselines import mdpfuzz_run, random_testing_run
from behavior import WALKER_SPACE_DESCRIPTORS, get_behavior_space
from campaign import CampaignConfig, CampaignLog, RandomStreams
from config import ExperimentSpec, spec_from_dict
from environments import make_env
from errors import CampaignFailureError, ConfigError
from map_loader import TaxiMapLoader
from metrics import METRIC_NAMES, campaign_metrics, final_summary, metric_table
from optimizers import map_elites_run, novelty_search_run
from persistence import PersistenceManager, load_q_table, save_frame, save_q_table
from policies import QLearningParams, heuristic_lander_policy, heuristic_walker_policy, train_q_learning
from utils import compact_timestamp, format_number, parse_timestamp, source_digest, utc_timestamp

logger = logging.getLogger(__name__)

__version__ = "0.1.0"
SOURCE_ROOT = Path(__file__).resolve().parent
SOURCE_PATTERNS = ("*.py", "maps/*.txt")

DEFAULT_POLICY_PATH = "policies/taxi_qtable.txt"
COMPARISON_FILE = "comparison.csv"
PLOT_DATA_FILE = "plot_data.json"

HEURISTIC_POLICIES = {
    "lander": heuristic_lander_policy,
    "walker": heuristic_walker_policy,
}


def code_digest() -> str:
    """Content digest of the modules and map files the run executes with."""
    return source_digest(SOURCE_ROOT, SOURCE_PATTERNS)


def make_policy(environment: str, policy_path: Optional[str] = None, taxi_map: Optional[str] = None):
    """
    Policy under test for an environment.

    Raises:
        ConfigError: the Taxi Q-table is missing or was trained on another map
    """
    if environment == "taxi":
        world = TaxiMapLoader(taxi_map).load_world()
        return load_q_table(policy_path or DEFAULT_POLICY_PATH, world)
    if environment in HEURISTIC_POLICIES:
        return HEURISTIC_POLICIES[environment]
    raise ConfigError(f"No policy for environment '{environment}'")


def run_method(method: str, mdp, policy, bspace, config: CampaignConfig, streams: RandomStreams) -> CampaignLog:
    if method == "random":
        return random_testing_run(mdp, policy, bspace, config, streams)
    if method == "map-elites":
        return map_elites_run(mdp, policy, bspace, config, streams)[1]
    if method == "novelty-search":
        return novelty_search_run(mdp, policy, bspace, config, streams)[1]
    if method == "mdpfuzz":
        return mdpfuzz_run(mdp, policy, bspace, config, streams)
    raise ConfigError(f"Unknown method '{method}'")


@dataclass
class CampaignJob:
    """Everything a worker process needs to run and store one campaign."""
    environment: str
    method: str
    seed: int
    behavior_space: str
    config: Dict[str, Any]
    run_dir: str
    policy_path: Optional[str] = None
    taxi_map: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.behavior_space}/{self.method}/seed{self.seed}"


def run_campaign(job: CampaignJob) -> Dict[str, Any]:
    """Run one campaign and write its log; returns its manifest entry."""
    config = CampaignConfig(**job.config)
    mdp = make_env(job.environment, config.lander_sigma, config.walker_geometric_p, job.taxi_map)
    policy = make_policy(job.environment, job.policy_path, job.taxi_map)
    bspace = get_behavior_space(job.environment, job.behavior_space)
    streams = RandomStreams(config.master_seed, job.method, job.seed, job.behavior_space)

    started = time.perf_counter()
    log = run_method(job.method, mdp, policy, bspace, config, streams)
    wall_time = time.perf_counter() - started
    path = PersistenceManager(job.run_dir).save_campaign_log(log)
    return {
        "method": job.method,
        "seed": job.seed,
        "behavior_space": job.behavior_space,
        "campaign_seed": streams.seed,
        "evaluations": len(log),
        "faults": sum(record.oracle for record in log),
        "wall_time_s": round(wall_time, 3),
        "log": path.relative_to(job.run_dir).as_posix(),
    }


def campaign_jobs(spec: ExperimentSpec, run_dir: Path) -> List[CampaignJob]:
    """One job per (behaviour space, method, seed), in that nesting order."""
    jobs = []
    for space in spec.behavior_spaces:
        config = dataclasses.replace(spec.campaign, behavior_space=space).to_dict()
        for method in spec.methods:
            for seed in spec.seeds:
                jobs.append(CampaignJob(
                    environment=spec.environment,
                    method=method,
                    seed=seed,
                    behavior_space=space,
                    config=config,
                    run_dir=str(run_dir),
                    policy_path=spec.policy_path,
                    taxi_map=spec.taxi_map,
                ))
    return jobs


def resolve_run_dir(spec: ExperimentSpec, force: bool = False) -> Path:
    """
    ``<out>/<env>-<spec digest>``; an existing directory gets a timestamped
    sibling unless ``force`` is set, in which case it is cleared.
    """
    run_dir = Path(spec.output_dir) / f"{spec.environment}-{spec.digest()}"
    if run_dir.exists():
        if force:
            logger.warning(f"Overwriting existing run directory {run_dir}")
            shutil.rmtree(run_dir)
        else:
            stamped = run_dir.with_name(f"{run_dir.name}-{compact_timestamp()}")
            suffix = 1
            while stamped.exists():
                stamped = run_dir.with_name(f"{run_dir.name}-{compact_timestamp()}-{suffix}")
                suffix += 1
            run_dir = stamped
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _execute(jobs: List[CampaignJob], workers: int) -> Tuple[List[Dict[str, Any]], Optional[str]]:
    """
    Run jobs, stopping at the first failure.

    Returns:
        (entries of the completed jobs in job order, failure message or None)
    """
    completed: List[Dict[str, Any]] = []
    if workers <= 1:
        for job in jobs:
            try:
                completed.append(run_campaign(job))
            except Exception as e:
                logger.error(f"Campaign {job.key} failed: {str(e)}")
                return completed, f"Campaign {job.key} failed: {e}"
        return completed, None

    failure = None
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_campaign, job) for job in jobs]
        for job, future in zip(jobs, futures):
            if future.cancelled():
                continue
            try:
                completed.append(future.result())
            except Exception as e:
                logger.error(f"Campaign {job.key} failed: {str(e)}")
                failure = failure or f"Campaign {job.key} failed: {e}"
                for pending in futures:
                    pending.cancel()
    return completed, failure


def write_metrics(spec: ExperimentSpec, run_dir: Path) -> Dict[str, Dict[str, Dict[str, tuple]]]:
    """
    Recompute every metric file of a run directory from its campaign logs.

    Returns:
        {behaviour space: {metric: {method: (median, q1, q3) of the final value}}}
    """
    manager = PersistenceManager(run_dir)
    summary: Dict[str, Dict[str, Dict[str, tuple]]] = {}
    plot_data = []
    for space in spec.behavior_spaces:
        bspace = get_behavior_space(spec.environment, space)
        by_metric: Dict[str, Dict[str, list]] = {metric: {} for metric in METRIC_NAMES}
        for method in spec.methods:
            for seed in spec.seeds:
                log = manager.load_campaign_log(method, seed, spec.environment, space)
                series = campaign_metrics(log, bspace, spec.campaign.grid_resolution, spec.sparseness_checkpoint)
                for metric in METRIC_NAMES:
                    by_metric[metric].setdefault(method, []).append(series[metric])

        summary[space] = {}
        for metric in METRIC_NAMES:
            path = manager.save_metric_table(space, metric, metric_table(metric, by_metric[metric]))
            summary[space][metric] = final_summary(by_metric[metric])
            plot_data.append({
                "environment": spec.environment,
                "behavior_space": space,
                "metric": metric,
                "file": path.relative_to(run_dir).as_posix(),
            })

    with open(run_dir / "metrics" / PLOT_DATA_FILE, 'w', encoding='utf-8') as f:
        json.dump(plot_data, f, indent=2)
    logger.info(f"Wrote {len(plot_data)} metric files under {run_dir / 'metrics'}")
    return summary


def run_experiment(spec: ExperimentSpec, force: bool = False) -> Path:
    """
    Run every campaign of an experiment and write logs, metrics and the manifest.

    Raises:
        ConfigError: invalid spec or missing policy, before any campaign starts
        CampaignFailureError: a campaign failed; completed logs are kept and
            the manifest is marked incomplete
    """
    spec.validate()
    # fail on a missing or mismatched policy before creating anything
    make_policy(spec.environment, spec.policy_path, spec.taxi_map)

    run_dir = resolve_run_dir(spec, force)
    manager = PersistenceManager(run_dir)
    jobs = campaign_jobs(spec, run_dir)
    manifest: Dict[str, Any] = {
        "version": __version__,
        "code_digest": code_digest(),
        "started_at": utc_timestamp(),
        "spec": spec.to_dict(),
        "campaigns": [],
        "incomplete": True,
    }
    manager.save_manifest(manifest)
    logger.info(f"Running {len(jobs)} campaigns on {spec.environment} into {run_dir} ({spec.workers} workers)")

    manifest["campaigns"], failure = _execute(jobs, spec.workers)
    if failure is not None:
        manifest["error"] = failure
        manifest["finished_at"] = utc_timestamp()
        manager.save_manifest(manifest)
        raise CampaignFailureError(failure, run_dir)

    summary = write_metrics(spec, run_dir)
    if len(spec.behavior_spaces) > 1:
        save_frame(comparison_frame(summary), run_dir / COMPARISON_FILE)
    manifest["incomplete"] = False
    manifest["finished_at"] = utc_timestamp()
    manager.save_manifest(manifest)
    logger.info(f"Experiment finished: {run_dir}")
    return run_dir


def comparison_frame(summary: Dict[str, Dict[str, Dict[str, tuple]]]) -> pd.DataFrame:
    """Final metric values keyed by (behaviour space, method, metric)."""
    rows = []
    for space, metrics in summary.items():
        for metric, methods in metrics.items():
            for method, (median, q1, q3) in methods.items():
                rows.append([space, method, metric, format_number(median), format_number(q1), format_number(q3)])
    frame = pd.DataFrame(rows, columns=["behavior_space", "method", "metric", "median", "q1", "q3"], dtype=str)
    return frame.sort_values(["behavior_space", "method", "metric"], kind="mergesort").reset_index(drop=True)


def rq3_sweep(spec: ExperimentSpec, force: bool = False) -> Path:
    """
    Run the method x seed grid once per Walker behaviour space and write the
    combined comparison file.

    Raises:
        ConfigError: the environment is not the walker
    """
    if spec.environment != "walker":
        raise ConfigError(f"The behaviour-space sweep needs the walker environment, got '{spec.environment}'")
    spec = dataclasses.replace(spec, behavior_spaces=list(WALKER_SPACE_DESCRIPTORS))
    run_dir = run_experiment(spec, force)
    logger.info(f"Behaviour-space comparison written to {run_dir / COMPARISON_FILE}")
    return run_dir


def train_policy(environment: str, params: Optional[QLearningParams] = None,
                 policy_path: Optional[str] = None, taxi_map: Optional[str] = None) -> Optional[Path]:
    """
    Train and store the Taxi Q-table.

    Returns:
        Path of the stored table, or None for environments whose policy is a
        built-in heuristic
    """
    if environment != "taxi":
        logger.info(f"{environment}: heuristic policy built-in, nothing to train")
        return None
    world = TaxiMapLoader(taxi_map).load_world()
    table = train_q_learning(world, params or QLearningParams())
    return save_q_table(table, policy_path or DEFAULT_POLICY_PATH)


def latest_run(output_dir: str) -> Path:
    """
    Most recent run under ``output_dir`` by the manifest's ``started_at``.

    Raises:
        ConfigError: no run directory with a readable manifest exists
    """
    runs = []
    for manifest_path in Path(output_dir).glob("*/manifest.json"):
        manifest = PersistenceManager(manifest_path.parent).load_manifest()
        if manifest and "started_at" in manifest:
            runs.append((parse_timestamp(manifest["started_at"]), manifest_path.parent.name, manifest_path.parent))
    if not runs:
        raise ConfigError(f"No runs found under {output_dir}")
    return max(runs)[2]


def report(run_dir: Optional[str] = None, output_dir: str = "runs") -> Path:
    """
    Recompute the metric files of an existing run from its logs.

    Raises:
        ConfigError: missing run, manifest or log files
    """
    run_path = Path(run_dir) if run_dir else latest_run(output_dir)
    manager = PersistenceManager(run_path)
    manifest = manager.load_manifest()
    if manifest is None:
        raise ConfigError(f"No readable manifest in {run_path}")
    doc = dict(manifest["spec"])
    preset = doc.pop("preset", "desk")
    spec = spec_from_dict(doc, preset)

    summary = write_metrics(spec, run_path)
    if len(spec.behavior_spaces) > 1:
        save_frame(comparison_frame(summary), run_path / COMPARISON_FILE)
    manifest["reported_at"] = utc_timestamp()
    manager.save_manifest(manifest)
    logger.info(f"Report regenerated for {run_path}")
    return run_path
