"""
Experiment configuration: presets, JSON config files, CLI overrides and
registry-name resolution.
"""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from rapidfuzz import fuzz, process

from behavior import DEFAULT_BEHAVIOR_SPACES, WALKER_SPACE_DESCRIPTORS, behavior_spaces_for
from campaign import CampaignConfig
from environments import ENVIRONMENTS
from errors import ConfigError, ParameterError
from policies import QLearningParams
from utils import normalize_name, text_digest

logger = logging.getLogger(__name__)

METHODS = ("random", "map-elites", "novelty-search", "mdpfuzz")

SUGGESTION_CUTOFF = 60

# JSON section -> {JSON key: CampaignConfig field}
CAMPAIGN_SECTIONS = {
    "campaign": {
        "budget": "budget",
        "init_budget": "init_budget",
        "population_size": "population_size",
        "iterations": "iterations",
        "grid_resolution": "grid_resolution",
        "novelty_threshold": "novelty_threshold",
        "novelty_k": "novelty_k",
    },
    "mutation": {
        "lander_sigma": "lander_sigma",
        "walker_geometric_p": "walker_geometric_p",
    },
    "mdpfuzz": {
        "components": "gmm_components",
        "em_iterations": "gmm_iterations",
        "refit_period": "refit_period",
        "freshness_percentile": "freshness_percentile",
        "freshness_threshold": "freshness_threshold",
    },
}

TOP_LEVEL_KEYS = (
    "environment", "methods", "behavior_spaces", "seeds", "master_seed", "training",
    "policy_path", "taxi_map", "output_dir", "workers", "sparseness_checkpoint",
) + tuple(CAMPAIGN_SECTIONS)

PRESETS: Dict[str, Dict[str, Any]] = {
    "full": {
        "seeds": list(range(10)),
        "campaign": {"budget": 5000, "init_budget": 1000, "population_size": 100, "iterations": 50},
        "mdpfuzz": {"refit_period": 500},
        "sparseness_checkpoint": 100,
    },
    "desk": {
        "seeds": list(range(5)),
        "campaign": {"budget": 500, "init_budget": 100, "population_size": 50, "iterations": 10},
        "mdpfuzz": {"refit_period": 100},
        "sparseness_checkpoint": 50,
    },
}
DEFAULT_PRESET = "desk"


class NameResolver:
    """
    Maps user-written names onto registry names: exact match after
    normalisation, then the alias table. Anything else is an error carrying
    the closest registered name as a suggestion.
    """

    def __init__(self, names, aliases: Dict[str, str] = None, kind: str = "name"):
        self.names = list(names)
        self.kind = kind
        self._canonical = {normalize_name(name): name for name in self.names}
        self._aliases = {
            normalize_name(alias): target
            for alias, target in (aliases or {}).items()
            if target in self.names
        }

    def resolve(self, name: str) -> str:
        """
        Raises:
            ConfigError: the name matches no registered name or alias
        """
        key = normalize_name(str(name))
        if key in self._canonical:
            return self._canonical[key]
        if key in self._aliases:
            return self._aliases[key]

        message = f"Unknown {self.kind} '{name}' (available: {', '.join(self.names)})"
        suggestion = self.suggest(name)
        if suggestion:
            message += f"; did you mean '{suggestion}'?"
        raise ConfigError(message)

    def suggest(self, name: str) -> Optional[str]:
        """Closest registered name by ``fuzz.ratio``, or None below the cut-off."""
        candidates = {**self._canonical, **self._aliases}
        match = process.extractOne(
            normalize_name(str(name)), list(candidates), scorer=fuzz.ratio, score_cutoff=SUGGESTION_CUTOFF
        )
        if match is None:
            return None
        return candidates[match[0]]


ENVIRONMENT_ALIASES = {
    "lunar-lander": "lander",
    "lunarlander": "lander",
    "lunar_lander_v2": "lander",
    "bipedal-walker": "walker",
    "bipedalwalker": "walker",
    "bipedal_walker_hardcore": "walker",
    "taxi-v3": "taxi",
}

METHOD_ALIASES = {
    "me": "map-elites",
    "map_elites": "map-elites",
    "mapelites": "map-elites",
    "ns": "novelty-search",
    "novelty": "novelty-search",
    "rt": "random",
    "random-testing": "random",
    "fuzz": "mdpfuzz",
    "mdp-fuzz": "mdpfuzz",
}

environment_resolver = NameResolver(ENVIRONMENTS, ENVIRONMENT_ALIASES, kind="environment")
method_resolver = NameResolver(METHODS, METHOD_ALIASES, kind="method")


def behavior_space_resolver(env: str) -> NameResolver:
    return NameResolver(behavior_spaces_for(env), kind=f"behaviour space for '{env}'")


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: what to run, how often and where to write."""
    environment: str = "taxi"
    methods: List[str] = field(default_factory=lambda: list(METHODS))
    behavior_spaces: List[str] = field(default_factory=list)
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    training: QLearningParams = field(default_factory=QLearningParams)
    policy_path: Optional[str] = None
    taxi_map: Optional[str] = None
    output_dir: str = "runs"
    workers: int = 1
    sparseness_checkpoint: int = 100
    preset: str = DEFAULT_PRESET

    def __post_init__(self):
        if not self.behavior_spaces:
            self.behavior_spaces = [DEFAULT_BEHAVIOR_SPACES.get(self.environment, "")]

    @property
    def campaign_count(self) -> int:
        return len(self.methods) * len(self.seeds) * len(self.behavior_spaces)

    def validate(self) -> None:
        """
        Raises:
            ConfigError: unknown names, bad seed list or inconsistent budgets
        """
        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"Unknown environment '{self.environment}'")
        if not self.methods:
            raise ConfigError("At least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"Duplicate methods in {self.methods}")
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError(f"Unknown method '{method}'")
        known_spaces = behavior_spaces_for(self.environment)
        for name in self.behavior_spaces:
            if name not in known_spaces:
                raise ConfigError(f"Unknown behaviour space '{name}' for '{self.environment}'")
        if len(set(self.behavior_spaces)) != len(self.behavior_spaces):
            raise ConfigError(f"Duplicate behaviour spaces in {self.behavior_spaces}")
        if not self.seeds:
            raise ConfigError("The seed list must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"Duplicate seeds in {self.seeds}")
        if any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in self.seeds):
            raise ConfigError(f"Seeds must be non-negative integers, got {self.seeds}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")
        if self.sparseness_checkpoint < 1:
            raise ConfigError(f"sparseness_checkpoint must be positive, got {self.sparseness_checkpoint}")
        for method in self.methods:
            self.campaign.validate(method)
        try:
            self.training.validate()
        except ParameterError as e:
            raise ConfigError(f"Invalid training parameters: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        """The resolved configuration in the config-file layout."""
        campaign = self.campaign.to_dict()
        doc: Dict[str, Any] = {
            "environment": self.environment,
            "methods": list(self.methods),
            "behavior_spaces": list(self.behavior_spaces),
            "seeds": list(self.seeds),
            "master_seed": campaign["master_seed"],
        }
        for section, keys in CAMPAIGN_SECTIONS.items():
            doc[section] = {key: campaign[attr] for key, attr in keys.items()}
        doc["training"] = self.training.to_dict()
        doc.update({
            "policy_path": self.policy_path,
            "taxi_map": self.taxi_map,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "sparseness_checkpoint": self.sparseness_checkpoint,
            "preset": self.preset,
        })
        return doc

    def digest(self) -> str:
        """Short content hash of everything that influences the logs."""
        doc = self.to_dict()
        for key in ("output_dir", "workers", "preset"):
            doc.pop(key)
        return text_digest(json.dumps(doc, sort_keys=True))[:12]


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively layer ``override`` over ``base`` without mutating either."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check_keys(doc: Dict[str, Any], allowed, where: str) -> None:
    for key in doc:
        if key not in allowed:
            match = process.extractOne(key, list(allowed), scorer=fuzz.ratio, score_cutoff=SUGGESTION_CUTOFF)
            hint = f"; did you mean '{match[0]}'?" if match else ""
            raise ConfigError(f"Unknown key '{key}' in {where}{hint}")


def spec_from_dict(doc: Dict[str, Any], preset: str = DEFAULT_PRESET) -> ExperimentSpec:
    """
    Build and validate an ExperimentSpec from a config document.

    Raises:
        ConfigError: unknown keys or names, wrong value types, invalid values
    """
    _check_keys(doc, TOP_LEVEL_KEYS + ("preset",), "config")
    try:
        environment = environment_resolver.resolve(doc.get("environment", "taxi"))
        spaces_resolver = behavior_space_resolver(environment)
        methods = [method_resolver.resolve(m) for m in doc.get("methods", METHODS)]
        spaces = doc.get("behavior_spaces") or [DEFAULT_BEHAVIOR_SPACES[environment]]
        if isinstance(spaces, str):
            spaces = list(WALKER_SPACE_DESCRIPTORS) if spaces == "all" else [spaces]
        spaces = [spaces_resolver.resolve(s) for s in spaces]

        campaign_kwargs: Dict[str, Any] = {"master_seed": int(doc.get("master_seed", 0))}
        for section, keys in CAMPAIGN_SECTIONS.items():
            values = doc.get(section) or {}
            _check_keys(values, keys, f"'{section}'")
            campaign_kwargs.update({keys[key]: value for key, value in values.items()})

        training = doc.get("training") or {}
        _check_keys(training, QLearningParams().to_dict(), "'training'")

        spec = ExperimentSpec(
            environment=environment,
            methods=methods,
            behavior_spaces=spaces,
            seeds=list(doc.get("seeds", range(10))),
            campaign=CampaignConfig(**campaign_kwargs),
            training=QLearningParams(**training),
            policy_path=doc.get("policy_path"),
            taxi_map=doc.get("taxi_map"),
            output_dir=str(doc.get("output_dir", "runs")),
            workers=int(doc.get("workers", 1)),
            sparseness_checkpoint=int(doc.get("sparseness_checkpoint", 100)),
            preset=preset,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration value: {e}") from e

    spec.validate()
    return spec


def load_config(path: Optional[str] = None, preset: str = DEFAULT_PRESET,
                overrides: Optional[Dict[str, Any]] = None) -> ExperimentSpec:
    """
    Load an experiment: preset, then the config file, then command-line overrides.

    Args:
        path: Optional JSON config file
        preset: ``desk`` or ``full``
        overrides: Values set on the command line, in config-file layout

    Raises:
        ConfigError: unknown preset, unreadable or invalid config
    """
    if preset not in PRESETS:
        raise ConfigError(f"Unknown preset '{preset}' (available: {', '.join(PRESETS)})")
    doc = copy.deepcopy(PRESETS[preset])

    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                file_doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path}:{e.lineno}:{e.colno}: {e.msg}") from e
        if not isinstance(file_doc, dict):
            raise ConfigError(f"{config_path}: the top level must be an object")
        doc = deep_merge(doc, file_doc)
        logger.info(f"Loaded config {config_path} over preset '{preset}'")

    doc = deep_merge(doc, {k: v for k, v in (overrides or {}).items() if v is not None})
    doc.pop("preset", None)
    return spec_from_dict(doc, preset)
