"""Experiment configuration: a JSON document whose keys mirror ExperimentConfig."""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .classifiers import CLASSIFIERS, ClassifierSpec
from .dataset import DEFAULT_ZERO_REPLACEMENT
from .errors import BenchError, ConfigError
from .feature_maps import TRANSFORM_KINDS, TransformSpec

SYNTHETIC_PREFIX = "synthetic:"
# FastICA rarely meets its tolerance on CLR assays; the default grid keeps the last iterate
GRID_PARAMS = {"clr_ica": {"ica_on_nonconvergence": "warn"}}
# fields that do not change any result; left out of the echo written next to results
RUNTIME_FIELDS = ("output_dir", "n_workers")


def _transform(entry) -> TransformSpec:
    if isinstance(entry, TransformSpec):
        return entry
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"transform entries need a 'kind', got {entry!r}")
    unknown = set(entry) - {"kind", "name", "params"}
    if unknown:
        raise ConfigError(f"unknown transform entry keys {sorted(unknown)}")
    return TransformSpec(entry["kind"], dict(entry.get("params", {})), entry.get("name"))


def _classifier(entry) -> ClassifierSpec:
    if isinstance(entry, ClassifierSpec):
        return entry
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"classifier entries need a 'kind', got {entry!r}")
    unknown = set(entry) - {"kind", "name", "hyperparams"}
    if unknown:
        raise ConfigError(f"unknown classifier entry keys {sorted(unknown)}")
    return ClassifierSpec(entry["kind"], dict(entry.get("hyperparams", {})), entry.get("name"))


@dataclass(frozen=True)
class ExperimentConfig:
    data_source: str = "synthetic:paperlike"
    transforms: tuple = tuple(TransformSpec(kind, dict(GRID_PARAMS.get(kind, {}))) for kind in TRANSFORM_KINDS)
    classifiers: tuple = tuple(ClassifierSpec(kind) for kind in CLASSIFIERS)
    split_fraction: float = 0.6
    stratified: bool = True
    seed: int = 0
    baseline_transform: str = "identity"
    output_dir: str = "output"
    synthetic_params: dict = field(default_factory=dict)
    baseline_overrides: dict = field(default_factory=dict)
    n_workers: int = 1
    zero_replacement: float = DEFAULT_ZERO_REPLACEMENT

    def __post_init__(self):
        try:
            object.__setattr__(self, "transforms", tuple(_transform(t) for t in self.transforms))
            object.__setattr__(self, "classifiers", tuple(_classifier(c) for c in self.classifiers))
        except ConfigError:
            raise
        except BenchError as e:
            raise ConfigError(e.message) from e
        if not self.transforms or not self.classifiers:
            raise ConfigError("transforms and classifiers must both be non-empty")
        if not 0 < self.split_fraction < 1:
            raise ConfigError(f"split_fraction must lie in (0, 1), got {self.split_fraction}")
        for what, specs in (("transform", self.transforms), ("classifier", self.classifiers)):
            ids = [s.id for s in specs]
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            if dupes:
                raise ConfigError(f"duplicate {what} ids {dupes}; give them distinct names")
        if self.n_workers < 1:
            raise ConfigError(f"n_workers must be >= 1, got {self.n_workers}")
        if self.zero_replacement <= 0:
            raise ConfigError(f"zero_replacement must be > 0, got {self.zero_replacement}")

    @property
    def is_synthetic(self) -> bool:
        return self.data_source.startswith(SYNTHETIC_PREFIX)

    @property
    def preset(self) -> str:
        return self.data_source[len(SYNTHETIC_PREFIX) :]

    def baseline_for(self, transform_id: str) -> str:
        return self.baseline_overrides.get(transform_id, self.baseline_transform)

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**values)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["transforms"] = [{k: v for k, v in asdict(t).items() if v is not None} for t in self.transforms]
        d["classifiers"] = [{k: v for k, v in asdict(c).items() if v is not None} for c in self.classifiers]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=list)

    def echo(self) -> str:
        """Compact JSON of the fields that determine the results."""
        d = {k: v for k, v in self.to_dict().items() if k not in RUNTIME_FIELDS}
        return json.dumps(d, sort_keys=True, separators=(",", ":"), default=list)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"could not read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(data)
