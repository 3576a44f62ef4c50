"""
Transform x classifier grid over one train/test split.

Every transform is fitted once on the training rows; every cell then fits a
classifier on the transformed training features and is scored on the test
rows. A failing transform or cell is recorded and the grid carries on.
"""
import logging
import zlib
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import gmean
from tqdm import tqdm

from . import __version__, datagen
from .classifiers import build_classifier
from .config import ExperimentConfig
from .dataset import LabeledDataset, load_assays, split
from .errors import ConfigError, serialize_error
from .feature_maps import TransformSpec, fit_pipeline
from .metrics import GroupMap, MetricsReport, evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CellFailure:
    error_kind: str
    message: str

    @classmethod
    def from_exception(cls, e: BaseException) -> "CellFailure":
        info = serialize_error(e)
        return cls(error_kind=info["error_type"], message=info["message"])


@dataclass
class ReportSet:
    cells: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)
    baselines: dict = field(default_factory=dict)
    geometric_mean_f1: dict = field(default_factory=dict)
    transform_order: tuple = ()
    classifier_order: tuple = ()
    config_json: str = "{}"
    seed: int = 0
    version: str = __version__

    def keys(self):
        """Every (transform, classifier) pair in grid order."""
        return [(t, c) for t in self.transform_order for c in self.classifier_order]


def derive_seed(seed: int, *names: str) -> int:
    """Stable 32-bit seed for a (seed, transform id[, classifier id]) combination."""
    entropy = [int(seed)] + [zlib.crc32(name.encode("utf-8")) for name in names]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def compute_deltas(cells: dict, baseline_for: Callable[[str], str]):
    """(ΔBrier, ΔF1) of each cell against the same classifier on its baseline transform."""
    deltas, baselines = {}, {}
    for (t, c), report in cells.items():
        b = baseline_for(t)
        baselines[t] = b
        reference = cells.get((b, c))
        if reference is not None:
            deltas[(t, c)] = (report.brier - reference.brier, report.f1 - reference.f1)
    return deltas, baselines


def geometric_means(cells: dict, transform_order) -> dict:
    out = {}
    for t in transform_order:
        scores = [r.f1 for (tt, _), r in cells.items() if tt == t and np.isfinite(r.f1) and r.f1 > 0]
        if scores:
            out[t] = float(gmean(scores))
    return out


def assemble(cells, failures, transform_order, classifier_order, baseline_for, config_json, seed, version=__version__) -> ReportSet:
    deltas, baselines = compute_deltas(cells, baseline_for)
    return ReportSet(
        cells=dict(cells),
        failures=dict(failures),
        deltas=deltas,
        baselines=baselines,
        geometric_mean_f1=geometric_means(cells, transform_order),
        transform_order=tuple(transform_order),
        classifier_order=tuple(classifier_order),
        config_json=config_json,
        seed=seed,
        version=version,
    )


def load_dataset(config: ExperimentConfig) -> LabeledDataset:
    if config.is_synthetic:
        preset = datagen.PRESETS.get(config.preset)
        if preset is None:
            raise ConfigError(f"unknown synthetic preset {config.preset!r}; expected one of {sorted(datagen.PRESETS)}")
        try:
            spec = preset(**config.synthetic_params)
        except TypeError as e:
            raise ConfigError(f"bad synthetic_params: {e}") from e
        return datagen.generate(spec)
    return load_assays(config.data_source, zero_replacement=config.zero_replacement)


def _seeded_transform(spec: TransformSpec, seed: int) -> TransformSpec:
    if "seed" in spec.params:
        return spec
    return TransformSpec(spec.kind, {**spec.params, "seed": derive_seed(seed, spec.id)}, spec.name)


def _fit_transform(spec: TransformSpec, train: LabeledDataset, test: LabeledDataset, seed: int):
    fitted = fit_pipeline(_seeded_transform(spec, seed), train.compositions)
    return fitted.transform(train.compositions), fitted.transform(test.compositions)


def run_cell(classifier_spec, features, train_labels, test_labels, gmap: GroupMap, seed: int) -> MetricsReport:
    F_train, F_test = features
    if "seed" not in classifier_spec.hyperparams:
        classifier_spec = classifier_spec.with_seed(seed)
    model = build_classifier(classifier_spec).fit(F_train, train_labels)
    return evaluate(model.predict_proba(F_test), test_labels, gmap)


def run_experiment(config: ExperimentConfig, dataset: Optional[LabeledDataset] = None, progress: bool = True) -> ReportSet:
    if dataset is None:
        dataset = load_dataset(config)
    train, test = split(dataset, config.split_fraction, config.stratified, config.seed)
    gmap = dataset.group_map()
    logger.info("split %d samples into %d train / %d test", len(dataset), len(train), len(test))

    transforms = {t.id: t for t in config.transforms}
    classifiers = {c.id: c for c in config.classifiers}
    features, failures, cells = {}, {}, {}

    with ThreadPoolExecutor(max_workers=config.n_workers) as exe:
        futures = {exe.submit(_fit_transform, spec, train, test, config.seed): t for t, spec in transforms.items()}
        for f in tqdm(as_completed(futures), total=len(futures), desc="Fitting transforms", disable=not progress):
            t = futures[f]
            try:
                features[t] = f.result()
            except Exception as e:
                failure = CellFailure.from_exception(e)
                logger.error("transform %s failed (%s): %s", t, failure.error_kind, failure.message)
                for c in classifiers:
                    failures[(t, c)] = failure

        futures = {
            exe.submit(run_cell, spec, features[t], train.labels, test.labels, gmap, derive_seed(config.seed, t, c)): (t, c)
            for t in transforms
            if t in features
            for c, spec in classifiers.items()
        }
        for f in tqdm(as_completed(futures), total=len(futures), desc="Running cells", disable=not progress):
            key = futures[f]
            try:
                cells[key] = f.result()
            except Exception as e:
                failure = CellFailure.from_exception(e)
                logger.error("cell %s x %s failed (%s): %s", *key, failure.error_kind, failure.message)
                failures[key] = failure

    if failures:
        logger.warning("%d of %d cells failed", len(failures), len(transforms) * len(classifiers))
    return assemble(
        cells,
        failures,
        list(transforms),
        list(classifiers),
        config.baseline_for,
        config.echo(),
        config.seed,
    )
