"""
Synthetic geozone datasets drawn from logistic-normal class distributions.

Each geozone is a Gaussian in ILR coordinates; samples are mapped back onto
the simplex with ``ilr_inverse``, so every row is an exact composition.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import linalg

from . import simplex
from .dataset import LabeledDataset
from .errors import BadCovariance, InvalidParameter

logger = logging.getLogger(__name__)

PAPERLIKE_SEED = 20190823
PAPERLIKE_ZONES = 46
PAPERLIKE_SAMPLES_PER_ZONE = 760
# number of M, H and U geozones
PAPERLIKE_GROUP_SIZES = {"M": 16, "H": 10, "U": 20}
# largest per-axis standard deviation of a geozone in ILR coordinates
PAPERLIKE_STDEV = 0.6
PAPERLIKE_CONDITION = 50.0
# typical mineralized assay, weight % in PART_NAMES order
PAPERLIKE_BASE = np.array([58.0, 5.0, 2.5, 0.08, 6.0, 0.1, 0.08, 0.1, 0.05, 0.02])
# multiplicative shifts from the mineralized profile
PAPERLIKE_GROUP_SHIFT = {
    "M": np.ones(10),
    "H": np.array([0.9, 1.2, 1.3, 1.5, 2.0, 1.0, 1.1, 1.0, 1.0, 1.0]),
    "U": np.array([0.5, 6.0, 4.0, 0.8, 1.2, 3.0, 2.0, 1.5, 2.0, 1.5]),
}
# spread of geozone means around their group profile, per ILR coordinate
PAPERLIKE_ZONE_SPREAD = 0.5
# distance between deliberately confusable same-group zones, in stdevs
PAPERLIKE_CONFUSABLE = 0.25


@dataclass(frozen=True, eq=False)
class SyntheticSpec:
    n_parts: int
    n_geozones: int
    samples_per_zone: Union[int, Sequence[int]]
    group_assignment: tuple
    class_means: np.ndarray
    class_covs: np.ndarray
    overlap_scale: float = 1.0
    seed: int = 0
    zone_ids: Optional[tuple] = None
    part_names: Optional[tuple] = field(default=None)

    def __post_init__(self):
        if self.n_geozones < 2 or self.n_parts < 3:
            raise InvalidParameter(f"need G >= 2 and K >= 3, got G={self.n_geozones}, K={self.n_parts}")
        if len(self.group_assignment) != self.n_geozones:
            raise InvalidParameter("group_assignment needs one group per geozone")
        if np.shape(self.class_means) != (self.n_geozones, self.n_parts - 1):
            raise InvalidParameter(f"class_means must be G x (K-1), got {np.shape(self.class_means)}")
        if np.shape(self.class_covs) != (self.n_geozones, self.n_parts - 1, self.n_parts - 1):
            raise InvalidParameter(f"class_covs must be G x (K-1) x (K-1), got {np.shape(self.class_covs)}")
        if np.min(self.counts) < 1:
            raise InvalidParameter("samples_per_zone must be >= 1")
        if self.overlap_scale < 0:
            raise InvalidParameter(f"overlap_scale must be >= 0, got {self.overlap_scale}")

    @property
    def counts(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.samples_per_zone, dtype=int), (self.n_geozones,))

    @property
    def ids(self) -> tuple:
        if self.zone_ids is not None:
            return tuple(self.zone_ids)
        return tuple(f"GZ{g + 1:02d}" for g in range(self.n_geozones))

    @property
    def names(self) -> tuple:
        if self.part_names is not None:
            return tuple(self.part_names)
        if self.n_parts == len(simplex.PART_NAMES):
            return simplex.PART_NAMES
        return tuple(f"c{i + 1}" for i in range(self.n_parts))


def _covariance_factor(cov: np.ndarray, zone) -> np.ndarray:
    """L with L @ L.T == cov, for symmetric PSD cov."""
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise BadCovariance(f"covariance of geozone {zone} is not symmetric")
    values, vectors = linalg.eigh(cov)
    if values.min() < -1e-10 * max(1.0, abs(values.max())):
        raise BadCovariance(f"covariance of geozone {zone} has negative eigenvalue {values.min():.3g}")
    return vectors * np.sqrt(np.clip(values, 0.0, None))


def generate(spec: SyntheticSpec) -> LabeledDataset:
    basis = simplex.helmert_basis(spec.n_parts)
    ids = spec.ids
    factors = [_covariance_factor(np.asarray(spec.class_covs[g], dtype=float), ids[g]) for g in range(spec.n_geozones)]
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(spec.seed).spawn(spec.n_geozones)]
    scale = np.sqrt(spec.overlap_scale)

    blocks, labels, groups = [], [], []
    for g, n in enumerate(spec.counts):
        e = rngs[g].standard_normal((int(n), spec.n_parts - 1))
        blocks.append(np.asarray(spec.class_means[g], dtype=float) + scale * e @ factors[g].T)
        labels += [ids[g]] * int(n)
        groups += [spec.group_assignment[g]] * int(n)

    compositions = simplex.ilr_inverse(np.vstack(blocks), basis)
    logger.info("generated %d samples over %d geozones", compositions.shape[0], spec.n_geozones)
    return LabeledDataset(
        compositions=compositions,
        labels=np.array(labels),
        groups=np.array(groups),
        part_names=spec.names,
    )


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _zone_counts(rng: np.random.Generator, n_zones: int, per_zone: int, imbalance: float) -> np.ndarray:
    """Balanced counts, or geometric decay down to (1 - imbalance) of the largest zone."""
    if imbalance == 0:
        return np.full(n_zones, per_zone)
    weights = np.geomspace(1.0, 1.0 - imbalance, n_zones)
    counts = np.maximum(np.round(per_zone * n_zones * weights / weights.sum()).astype(int), 2)
    return rng.permutation(counts)


def preset_paperlike(
    seed: int = PAPERLIKE_SEED,
    samples_per_zone: int = PAPERLIKE_SAMPLES_PER_ZONE,
    imbalance: float = 0.0,
    overlap_scale: float = 1.0,
) -> SyntheticSpec:
    """
    46 geozones over the 10 assay analytes (16 M, 10 H, 20 U), about 35,000
    samples in total with the default size.

    Zone means scatter around an M, H or U assay profile; the first two zones
    of each group sit PAPERLIKE_CONFUSABLE stdevs apart so they are nearly
    indistinguishable. Zone covariances are randomly rotated with condition
    number PAPERLIKE_CONDITION.
    """
    if not 0 <= imbalance < 1:
        raise InvalidParameter(f"imbalance must lie in [0, 1), got {imbalance}")
    rng = np.random.default_rng(seed)
    n_parts = len(simplex.PART_NAMES)
    dim = n_parts - 1

    groups = tuple(grp for grp, size in PAPERLIKE_GROUP_SIZES.items() for _ in range(size))
    means = np.empty((PAPERLIKE_ZONES, dim))
    first_of_group = {}
    for g, grp in enumerate(groups):
        center = simplex.ilr(simplex.closure(PAPERLIKE_BASE * PAPERLIKE_GROUP_SHIFT[grp]))
        if grp in first_of_group and g == first_of_group[grp] + 1:
            direction = rng.standard_normal(dim)
            means[g] = means[g - 1] + PAPERLIKE_CONFUSABLE * PAPERLIKE_STDEV * direction / np.linalg.norm(direction)
        else:
            first_of_group.setdefault(grp, g)
            means[g] = center + rng.normal(0.0, PAPERLIKE_ZONE_SPREAD, dim)

    spectrum = PAPERLIKE_STDEV**2 * np.geomspace(1.0, 1.0 / PAPERLIKE_CONDITION, dim)
    covs = np.empty((PAPERLIKE_ZONES, dim, dim))
    for g in range(PAPERLIKE_ZONES):
        q = _random_rotation(rng, dim)
        cov = (q * spectrum) @ q.T
        covs[g] = 0.5 * (cov + cov.T)

    return SyntheticSpec(
        n_parts=n_parts,
        n_geozones=PAPERLIKE_ZONES,
        samples_per_zone=tuple(_zone_counts(rng, PAPERLIKE_ZONES, samples_per_zone, imbalance).tolist()),
        group_assignment=groups,
        class_means=means,
        class_covs=covs,
        overlap_scale=overlap_scale,
        seed=seed,
    )


PRESETS = {"paperlike": preset_paperlike}
