"""Guidance metrics and precomputed suggestion bundles.

Everything that annotates regionalization and kernel suggestions for the
interactive views: location counts with minimum-count flags, region
covariance differences, recursive ring suggestions, pairwise distance
densities, empirical variograms, and per-variable grid summaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from ._validation import check_positive_int
from .errors import DataError
from .core import (
    local_covariance,
    mean_neighbourhood_size,
    neighbourhood_matrix,
    region_covariance,
    whiten,
    eigenvalue_difference,
)
from .geometry import grid_bbox, grid_cell_indices, grid_partition
from .model import (
    KernelConfig,
    KernelRing,
    ParameterSetting,
    Regionalization,
    SpatialDataset,
    locations_by_region,
    regionalization_to_geojson,
)
from .regionalize import CovarianceRegionalization, labels_to_regionalization

#: Regions or kernels capturing fewer locations than this fraction of the
#: relevant total are flagged as too small.
DEFAULT_MIN_COUNT_FRACTION = 0.05

DEFAULT_GRID_MAX = 6
DEFAULT_K_MIN = 2
DEFAULT_K_MAX = 8
DEFAULT_KERNEL_DEPTH = 2


def minimum_count(total: int, threshold: float) -> int:
    """Flagging cutoff: strictly fewer than ceil(threshold * total) flags."""
    return math.ceil(threshold * total)


def region_location_counts(
    regionalization: Regionalization, dataset: SpatialDataset, *,
    threshold: float = DEFAULT_MIN_COUNT_FRACTION,
) -> tuple[list[int], list[bool]]:
    """Per-region location counts plus a too-small flag per region.

    A region is flagged when its count is strictly below
    ``ceil(threshold * n)``; counts exactly at the cutoff are not flagged.
    """
    _check_threshold(threshold)
    members = locations_by_region(regionalization, dataset)
    cutoff = minimum_count(dataset.n, threshold)
    counts = [int(len(members[rid])) for rid in regionalization.region_ids()]
    flags = [count < cutoff for count in counts]
    return counts, flags


def kernel_location_counts(
    regionalization: Regionalization,
    kernel: KernelConfig,
    dataset: SpatialDataset,
    *,
    threshold: float = DEFAULT_MIN_COUNT_FRACTION,
) -> dict:
    """Mean neighbourhood sizes per (region, ring) and for the whole config.

    The config row is the mean of column sums of the union neighbourhood
    matrix (rings are disjoint, so it equals the sum over rings). A value is
    flagged when strictly below ``ceil(threshold * n_region)``.
    """
    _check_threshold(threshold)
    members = locations_by_region(regionalization, dataset)
    region_ids = regionalization.region_ids()
    n_rings = len(kernel.rings)
    per_ring: list[list[float]] = [[] for _ in range(n_rings)]
    per_ring_flagged: list[list[bool]] = [[] for _ in range(n_rings)]
    config_means: list[float] = []
    config_flagged: list[bool] = []
    for rid in region_ids:
        idx = members[rid]
        n_r = len(idx)
        if n_r == 0:
            for ring_idx in range(n_rings):
                per_ring[ring_idx].append(0.0)
                per_ring_flagged[ring_idx].append(True)
            config_means.append(0.0)
            config_flagged.append(True)
            continue
        coords = dataset.locations[idx]
        d = cdist(coords, coords)
        cutoff = minimum_count(n_r, threshold)
        union = np.zeros_like(d, dtype=bool)
        for ring_idx, ring in enumerate(kernel.rings):
            k = ring.contains_distance(d)
            np.fill_diagonal(k, False)
            union |= k
            mean = mean_neighbourhood_size(k.astype(np.float64))
            per_ring[ring_idx].append(mean)
            per_ring_flagged[ring_idx].append(mean < cutoff)
        config_mean = mean_neighbourhood_size(union.astype(np.float64))
        config_means.append(config_mean)
        config_flagged.append(config_mean < cutoff)
    return {
        "region_ids": region_ids,
        "per_ring_means": per_ring,
        "per_ring_flagged": per_ring_flagged,
        "config_means": config_means,
        "config_flagged": config_flagged,
    }


def region_cov_difference(
    regionalization: Regionalization, dataset: SpatialDataset
) -> list[float | None]:
    """Frobenius distance of each region covariance to the global covariance.

    Regions with fewer than two locations get ``None`` (metric absent).
    """
    members = locations_by_region(regionalization, dataset)
    centered = dataset.values - dataset.values.mean(axis=0)
    global_cov = centered.T @ centered / dataset.n
    out: list[float | None] = []
    for rid in regionalization.region_ids():
        idx = members[rid]
        if len(idx) < 2:
            out.append(None)
            continue
        out.append(float(np.linalg.norm(global_cov - region_covariance(dataset.values[idx]))))
    return out


def kernel_suggestions(max_radius: float, depth: int) -> list[KernelRing]:
    """Single rings from a recursive binary partition of (0, max_radius).

    Level 0 is the full ring; every level splits each parent ring at its
    midpoint. All rings of all levels up to ``depth`` are returned, level by
    level.
    """
    if not max_radius > 0.0:
        raise DataError("max_radius must be positive", field="max_radius")
    if depth < 0 or int(depth) != depth:
        raise DataError("depth must be a non-negative integer", field="depth")
    rings = [KernelRing(0.0, float(max_radius))]
    level = [rings[0]]
    for _ in range(int(depth)):
        nxt = []
        for ring in level:
            mid = 0.5 * (ring.inner + ring.outer)
            nxt.append(KernelRing(ring.inner, mid))
            nxt.append(KernelRing(mid, ring.outer))
        rings.extend(nxt)
        level = nxt
    return rings


def suggestion_levels(depth: int) -> list[int]:
    """Level index per suggestion, aligned with :func:`kernel_suggestions`."""
    out = []
    for d in range(depth + 1):
        out.extend([d] * (2**d))
    return out


def default_max_radius(dataset: SpatialDataset) -> float:
    """25th percentile of the pairwise distance distribution."""
    return float(np.quantile(pdist(dataset.locations), 0.25))


def distance_density(dataset: SpatialDataset, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of all n(n-1)/2 pairwise distances, equal-width from 0."""
    bins = check_positive_int(bins, "bins")
    distances = pdist(dataset.locations)
    top = float(distances.max())
    if top <= 0.0:
        top = 1.0
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(distances, bins=edges)
    return edges, counts


@dataclass
class VariogramSet:
    """Binned empirical variograms of all (standardized) variables.

    ``gamma`` holds NaN where a bin contains no pairs; ``dispersion`` is the
    per-bin variance of the per-variable values.
    """

    bin_edges: np.ndarray
    gamma: np.ndarray  # (p, bins)
    dispersion: np.ndarray  # (bins,)
    pair_counts: np.ndarray  # (bins,)
    variable_names: tuple[str, ...]

    def to_json(self) -> dict:
        def clean(row):
            return [None if not np.isfinite(v) else float(v) for v in row]

        return {
            "edges": [float(e) for e in self.bin_edges],
            "per_variable": {
                name: clean(self.gamma[i]) for i, name in enumerate(self.variable_names)
            },
            "dispersion": clean(self.dispersion),
            "pair_counts": [int(c) for c in self.pair_counts],
        }


def variograms(
    dataset: SpatialDataset,
    bins: int,
    max_lag: float | None = None,
    *,
    semivariance: bool = True,
) -> VariogramSet:
    """Empirical variograms per variable over equal-width distance bins.

    Variables are standardized first so the cross-variable dispersion
    compares spatial structure rather than scale. With ``semivariance`` the
    classical 1/2 factor is applied; without it the value is the plain
    average squared difference per bin.
    """
    bins = check_positive_int(bins, "bins")
    distances = pdist(dataset.locations)
    if max_lag is None:
        max_lag = float(distances.max())
    if not max_lag > 0.0:
        raise DataError("max_lag must be positive", field="max_lag")
    edges = np.linspace(0.0, float(max_lag), bins + 1)
    # half-open bins; a distance exactly on an interior edge joins the upper bin
    bin_idx = np.digitize(distances, edges[1:-1], right=False)
    in_range = distances <= max_lag
    sel = bin_idx[in_range]
    pair_counts = np.bincount(sel, minlength=bins)

    centered = dataset.values - dataset.values.mean(axis=0)
    std = np.sqrt(np.mean(centered**2, axis=0))
    std[std == 0.0] = 1.0
    standardized = centered / std

    p = dataset.p
    gamma = np.full((p, bins), np.nan)
    nonempty = pair_counts > 0
    for v in range(p):
        sq_diff = pdist(standardized[:, [v]]) ** 2
        sums = np.bincount(sel, weights=sq_diff[in_range], minlength=bins)
        mean_sq = np.divide(sums, pair_counts, out=np.full(bins, np.nan), where=nonempty)
        gamma[v] = 0.5 * mean_sq if semivariance else mean_sq
    dispersion = np.full(bins, np.nan)
    dispersion[nonempty] = np.var(gamma[:, nonempty], axis=0)
    return VariogramSet(
        bin_edges=edges,
        gamma=gamma,
        dispersion=dispersion,
        pair_counts=pair_counts,
        variable_names=dataset.variable_names,
    )


@dataclass
class GridCellSummary:
    row: int
    col: int
    center: tuple[float, float]
    count: int
    median: float
    sextile: int  # 1..6; 1-3 render downward, 4-6 upward

    def to_json(self) -> dict:
        return {
            "row": self.row,
            "col": self.col,
            "center": [self.center[0], self.center[1]],
            "count": self.count,
            "median": self.median,
            "sextile": self.sextile,
        }


def sextile_boundaries(values: np.ndarray) -> np.ndarray:
    """Quantiles at 1/6 .. 5/6 with linear interpolation."""
    return np.quantile(np.asarray(values, dtype=np.float64), np.arange(1, 6) / 6.0)


def sextile_index(value: float, boundaries: np.ndarray) -> int:
    """Smallest sextile whose upper boundary is >= the value (ties go low)."""
    idx = int(np.searchsorted(boundaries, value, side="left"))
    return idx + 1 if idx < 5 else 6


def variable_grid_summary(
    dataset: SpatialDataset, variable: str, grid_side: int
) -> list[GridCellSummary]:
    """Per-cell median and sextile of one variable on a square grid."""
    grid_side = check_positive_int(grid_side, "grid_side")
    if variable not in dataset.variable_names:
        raise DataError(f"unknown variable {variable!r}", field="variable", code="missing_column")
    v = dataset.values[:, dataset.variable_names.index(variable)]
    bbox = grid_bbox(dataset.locations)
    xmin, ymin, xmax, ymax = bbox
    cell_w = (xmax - xmin) / grid_side
    cell_h = (ymax - ymin) / grid_side
    cells = grid_cell_indices(dataset.locations, grid_side, bbox)
    boundaries = sextile_boundaries(v)
    out = []
    seen: dict[tuple[int, int], list[int]] = {}
    for i, (row, col) in enumerate(map(tuple, cells)):
        seen.setdefault((row, col), []).append(i)
    for (row, col), idx in sorted(seen.items()):
        med = float(np.median(v[idx]))
        out.append(
            GridCellSummary(
                row=int(row),
                col=int(col),
                center=(xmin + (col + 0.5) * cell_w, ymin + (row + 0.5) * cell_h),
                count=len(idx),
                median=med,
                sextile=sextile_index(med, boundaries),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Precomputed guidance bundle


@dataclass
class GuidanceParams:
    grid_max: int = DEFAULT_GRID_MAX
    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX
    kernel_depth: int = DEFAULT_KERNEL_DEPTH
    max_radius: float | None = None
    threshold: float = DEFAULT_MIN_COUNT_FRACTION

    def validate(self, n_locations: int) -> None:
        if not (0.0 < self.threshold < 1.0):
            raise DataError("threshold must be in (0, 1)", field="threshold")
        if self.grid_max < 1:
            raise DataError("grid_max must be >= 1", field="grid_max")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise DataError("k range invalid", field="k_max")
        if self.k_max > n_locations:
            raise DataError(
                f"k_max {self.k_max} exceeds the {n_locations} locations", field="k_max"
            )
        if self.kernel_depth < 0:
            raise DataError("kernel_depth must be >= 0", field="kernel_depth")
        if self.max_radius is not None and not self.max_radius > 0.0:
            raise DataError("max_radius must be positive", field="max_radius")

    def to_json(self) -> dict:
        return {
            "grid_max": self.grid_max,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "kernel_depth": self.kernel_depth,
            "max_radius": self.max_radius,
            "threshold": self.threshold,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GuidanceParams":
        params = cls()
        for key in doc:
            if not hasattr(params, key):
                raise DataError(f"unknown guidance parameter {key!r}", field=key)
        for key in ("grid_max", "k_min", "k_max", "kernel_depth"):
            if key in doc:
                setattr(params, key, check_positive_int(doc[key], key, minimum=0))
        if "max_radius" in doc and doc["max_radius"] is not None:
            try:
                params.max_radius = float(doc["max_radius"])
            except (TypeError, ValueError):
                raise DataError("max_radius must be a number", field="max_radius") from None
        if "threshold" in doc:
            try:
                params.threshold = float(doc["threshold"])
            except (TypeError, ValueError):
                raise DataError("threshold must be a number", field="threshold") from None
        return params


@dataclass
class RegionalizationSuggestion:
    source: str  # "grid" | "covariance"
    key: str
    regionalization: Regionalization
    counts: list[int]
    flagged: list[bool]
    cov_diff: list[float | None]
    kernel_mean_counts: list[list[float]] = field(default_factory=list)
    kernel_flagged: list[list[bool]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "key": self.key,
            "regionalization": regionalization_to_geojson(self.regionalization),
            "regions": [
                {
                    "id": rid,
                    "count": self.counts[i],
                    "flagged": self.flagged[i],
                    "cov_diff": self.cov_diff[i],
                }
                for i, rid in enumerate(self.regionalization.region_ids())
            ],
            "kernel_mean_counts": self.kernel_mean_counts,
            "kernel_flagged": self.kernel_flagged,
        }


@dataclass
class GuidanceBundle:
    regionalizations: list[RegionalizationSuggestion]
    kernel_suggestions: list[KernelRing]
    kernel_levels: list[int]
    kernel_global_means: list[float]
    threshold: float
    max_radius: float

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "thresholds": {"min_count_fraction": self.threshold},
            "max_radius": self.max_radius,
            "regionalizations": [s.to_json() for s in self.regionalizations],
            "kernel_suggestions": [
                {
                    "inner": ring.inner,
                    "outer": ring.outer,
                    "level": self.kernel_levels[i],
                    "mean_counts": [self.kernel_global_means[i]],
                }
                for i, ring in enumerate(self.kernel_suggestions)
            ],
        }


def _check_threshold(threshold: float) -> None:
    if not (0.0 < threshold < 1.0):
        raise DataError("threshold must be in (0, 1)", field="threshold")


def compute_guidance(dataset: SpatialDataset, params: GuidanceParams) -> GuidanceBundle:
    """Precompute grid and covariance regionalizations plus ring suggestions,
    each annotated with the count/flag/covariance-difference metrics."""
    params.validate(dataset.n)
    max_radius = params.max_radius or default_max_radius(dataset)
    rings = kernel_suggestions(max_radius, params.kernel_depth)
    levels = suggestion_levels(params.kernel_depth)

    suggestions: list[RegionalizationSuggestion] = []
    for n_side in range(1, params.grid_max + 1):
        reg = grid_partition(dataset, n_side)
        suggestions.append(
            _annotate(dataset, reg, "grid", f"grid-{n_side}", rings, params.threshold)
        )
    est = CovarianceRegionalization(n_regions=params.k_max)
    est.fit(None, dataset=dataset)
    for k in range(params.k_min, params.k_max + 1):
        reg = labels_to_regionalization(dataset.locations, est.labels_path_[k])
        suggestions.append(
            _annotate(dataset, reg, "covariance", f"cov-{k}", rings, params.threshold)
        )

    kernel_global = [
        mean_neighbourhood_size(neighbourhood_matrix(dataset.locations, ring))
        for ring in rings
    ]
    return GuidanceBundle(
        regionalizations=suggestions,
        kernel_suggestions=rings,
        kernel_levels=levels,
        kernel_global_means=kernel_global,
        threshold=params.threshold,
        max_radius=max_radius,
    )


def _annotate(
    dataset: SpatialDataset,
    regionalization: Regionalization,
    source: str,
    key: str,
    rings: list[KernelRing],
    threshold: float,
) -> RegionalizationSuggestion:
    counts, flags = region_location_counts(regionalization, dataset, threshold=threshold)
    cov_diff = region_cov_difference(regionalization, dataset)
    kernel_counts = kernel_location_counts(
        regionalization, KernelConfig(rings), dataset, threshold=threshold
    )
    return RegionalizationSuggestion(
        source=source,
        key=key,
        regionalization=regionalization,
        counts=counts,
        flagged=flags,
        cov_diff=cov_diff,
        kernel_mean_counts=kernel_counts["per_ring_means"],
        kernel_flagged=kernel_counts["per_ring_flagged"],
    )


def setting_metrics(
    dataset: SpatialDataset,
    setting: ParameterSetting,
    *,
    threshold: float = DEFAULT_MIN_COUNT_FRACTION,
    include_experimental: bool = False,
) -> dict:
    """On-demand metric report for a custom parameter setting."""
    counts, flags = region_location_counts(
        setting.regionalization, dataset, threshold=threshold
    )
    cov_diff = region_cov_difference(setting.regionalization, dataset)
    kernel_counts = kernel_location_counts(
        setting.regionalization, setting.kernel, dataset, threshold=threshold
    )
    report = {
        "threshold": threshold,
        "regions": [
            {
                "id": rid,
                "count": counts[i],
                "flagged": flags[i],
                "cov_diff": cov_diff[i],
            }
            for i, rid in enumerate(setting.regionalization.region_ids())
        ],
        "kernel": {
            "per_ring_means": kernel_counts["per_ring_means"],
            "per_ring_flagged": kernel_counts["per_ring_flagged"],
            "config_means": kernel_counts["config_means"],
            "config_flagged": kernel_counts["config_flagged"],
        },
    }
    if include_experimental:
        whitening = whiten(dataset.values)
        members = locations_by_region(setting.regionalization, dataset)
        eig: list[list[float | None]] = []
        for ring in setting.kernel.rings:
            row: list[float | None] = []
            for rid in setting.regionalization.region_ids():
                idx = members[rid]
                if len(idx) < 2:
                    row.append(None)
                    continue
                lcov = local_covariance(
                    dataset.locations[idx], dataset.values[idx], ring
                )
                row.append(eigenvalue_difference(lcov, whitening))
            eig.append(row)
        report["eigenvalue_differences"] = eig
    return report
