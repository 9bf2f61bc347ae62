import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from campaign import CampaignLog
from errors import ConfigError
from map_loader import TaxiWorld
from policies import QTable
from utils import file_digest

logger = logging.getLogger(__name__)

Q_TABLE_FORMAT = "qtable-v1"
MANIFEST_NAME = "manifest.json"


def save_q_table(table: QTable, path: str) -> Path:
    """
    Write a Q-table as text: one JSON header line, then one row per state with
    ``%.17g`` values, so equal tables always produce equal bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": Q_TABLE_FORMAT,
        "map_hash": table.map_hash,
        "params": table.params,
        "shape": list(table.values.shape),
    }
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        np.savetxt(f, table.values, fmt="%.17g")
    logger.info(f"Saved Q-table to {path}")
    return path


def load_q_table(path: str, world: TaxiWorld) -> QTable:
    """
    Read a Q-table written by :func:`save_q_table`.

    Raises:
        ConfigError: missing or malformed file, or a table trained on another map
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Policy file not found: {path} (run train-policy first)")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            header = json.loads(f.readline())
            values = np.loadtxt(f, dtype=float, ndmin=2)
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"Malformed policy file {path}: {e}") from e

    if header.get("format") != Q_TABLE_FORMAT:
        raise ConfigError(f"{path}: unsupported policy format {header.get('format')!r}")
    if header.get("map_hash") != world.map_hash:
        raise ConfigError(
            f"{path}: Q-table was trained on map {header.get('map_hash')}, "
            f"current map is {world.map_hash}"
        )
    if list(values.shape) != header.get("shape"):
        raise ConfigError(f"{path}: table shape {list(values.shape)} differs from header {header.get('shape')}")
    return QTable(values, world, header.get("params"))


def save_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def load_frame(path: Path) -> pd.DataFrame:
    """Read a CSV written by :func:`save_frame`, keeping every cell as text."""
    return pd.read_csv(path, dtype=str, keep_default_na=False)


class PersistenceManager:
    """Handles saving and loading of the artifacts of one run directory."""

    def __init__(self, run_dir: str):
        self.run_dir = Path(run_dir)

    @property
    def manifest_path(self) -> Path:
        return self.run_dir / MANIFEST_NAME

    def campaign_log_path(self, method: str, seed: int, behavior_space: str) -> Path:
        return self.run_dir / "logs" / behavior_space / f"{method}-seed{seed}.csv"

    def metric_path(self, behavior_space: str, metric: str) -> Path:
        return self.run_dir / "metrics" / behavior_space / f"{metric}.csv"

    def save_campaign_log(self, log: CampaignLog) -> Path:
        path = save_frame(log.to_frame(), self.campaign_log_path(log.method, log.seed, log.behavior_space))
        logger.info(f"Saved {len(log)} evaluations to {path}")
        return path

    def load_campaign_log(self, method: str, seed: int, env: str, behavior_space: str) -> CampaignLog:
        """
        Raises:
            ConfigError: the log file does not exist
        """
        path = self.campaign_log_path(method, seed, behavior_space)
        if not path.exists():
            raise ConfigError(f"Campaign log not found: {path}")
        log = CampaignLog.from_frame(load_frame(path), env=env, behavior_space=behavior_space)
        if not log.method:
            log.method, log.seed = method, seed
        return log

    def save_metric_table(self, behavior_space: str, metric: str, frame: pd.DataFrame) -> Path:
        return save_frame(frame, self.metric_path(behavior_space, metric))

    def artifact_digests(self) -> Dict[str, str]:
        """SHA-256 of every file in the run directory except the manifest, keyed by relative path."""
        digests = {}
        for path in sorted(self.run_dir.rglob("*")):
            if path.is_file() and path.name != MANIFEST_NAME:
                digests[path.relative_to(self.run_dir).as_posix()] = file_digest(path)
        return digests

    def load_manifest(self) -> Optional[Dict[str, Any]]:
        """
        Load the run manifest.

        Returns:
            The manifest, or None when it is missing or unreadable
        """
        if not self.manifest_path.exists():
            return None
        try:
            with open(self.manifest_path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except Exception as e:
            logger.error(f"Error loading manifest {self.manifest_path}: {str(e)}")
            return None

    def save_manifest(self, manifest: Dict[str, Any]) -> bool:
        """
        Save the run manifest, refreshing its artifact digests.

        Args:
            manifest: Manifest content; its ``artifacts`` entry is replaced

        Returns:
            True if successful, False otherwise
        """
        try:
            self.run_dir.mkdir(parents=True, exist_ok=True)
            manifest = {**manifest, "artifacts": self.artifact_digests()}

            with open(self.manifest_path, 'w', encoding='utf-8') as f:
                json.dump(manifest, f, indent=2, ensure_ascii=False)

            logger.info(f"Saved manifest to {self.manifest_path}")
            return True

        except Exception as e:
            logger.error(f"Error saving manifest: {str(e)}")
            return False

    def list_campaign_logs(self) -> List[Path]:
        return sorted((self.run_dir / "logs").rglob("*.csv"))
