import math

import numpy as np
import pytest

from sbsskit import (
    DataError,
    KernelConfig,
    KernelRing,
    ParameterSetting,
    Region,
    Regionalization,
    SpatialDataset,
    compute_guidance,
    default_max_radius,
    distance_density,
    grid_partition,
    kernel_location_counts,
    kernel_suggestions,
    region_cov_difference,
    region_location_counts,
    setting_metrics,
    variable_grid_summary,
    variograms,
)
from sbsskit.guidance import GuidanceParams, sextile_boundaries, sextile_index

from oracles import brute_covariance


def square(x0, y0, x1, y1, rid):
    return Region([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], rid)


def grid_dataset(n=100, seed=11, p=2):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 100, (n, 2))
    values = rng.normal(size=(n, p))
    return SpatialDataset(coords, values)


class TestRegionLocationCounts:
    def test_single_region_no_flag(self):
        ds = grid_dataset(50)
        reg = Regionalization([square(-1, -1, 101, 101, "all")])
        counts, flags = region_location_counts(reg, ds)
        assert counts == [50]
        assert flags == [False]

    def test_flag_below_threshold(self):
        rng = np.random.default_rng(3)
        coords = np.vstack(
            [rng.uniform(0, 10, (96, 2)), rng.uniform(90, 100, (4, 2))]
        )
        ds = SpatialDataset(coords, rng.normal(size=(100, 1)))
        reg = Regionalization(
            [square(-1, -1, 50, 101, "big"), square(50, -1, 101, 101, "tiny")]
        )
        counts, flags = region_location_counts(reg, ds)
        assert counts == [96, 4]
        assert flags == [False, True]  # 4 < ceil(0.05 * 100) = 5

    def test_boundary_count_not_flagged(self):
        rng = np.random.default_rng(4)
        coords = np.vstack(
            [rng.uniform(0, 10, (95, 2)), rng.uniform(90, 100, (5, 2))]
        )
        ds = SpatialDataset(coords, rng.normal(size=(100, 1)))
        reg = Regionalization(
            [square(-1, -1, 50, 101, "big"), square(50, -1, 101, 101, "tiny")]
        )
        counts, flags = region_location_counts(reg, ds)
        assert counts == [95, 5]
        assert flags == [False, False]

    def test_counts_sum_to_n(self):
        ds = grid_dataset(60)
        reg = grid_partition(ds, 3)
        counts, _ = region_location_counts(reg, ds)
        assert sum(counts) == 60


class TestKernelLocationCounts:
    def test_empty_ring_flagged(self):
        ds = grid_dataset(30)
        reg = Regionalization([square(-1, -1, 101, 101, "all")])
        report = kernel_location_counts(reg, KernelConfig([(5000, 6000)]), ds)
        assert report["per_ring_means"][0] == [0.0]
        assert report["per_ring_flagged"][0] == [True]

    def test_collinear_example(self):
        ds = SpatialDataset(
            [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], [[1.0], [2.0], [3.0]]
        )
        reg = Regionalization([square(-1, -1, 3, 1, "all")])
        report = kernel_location_counts(reg, KernelConfig([(0.5, 1.5)]), ds)
        assert report["per_ring_means"][0][0] == pytest.approx(4.0 / 3.0)

    def test_disjoint_rings_additive(self, rng):
        coords = rng.uniform(0, 10, (25, 2))
        ds = SpatialDataset(coords, rng.normal(size=(25, 1)))
        reg = Regionalization([square(-1, -1, 11, 11, "all")])
        r1 = kernel_location_counts(reg, KernelConfig([(0, 3)]), ds)
        r2 = kernel_location_counts(reg, KernelConfig([(3.5, 7)]), ds)
        both = kernel_location_counts(reg, KernelConfig([(0, 3), (3.5, 7)]), ds)
        assert both["config_means"][0] == pytest.approx(
            r1["per_ring_means"][0][0] + r2["per_ring_means"][0][0]
        )


class TestRegionCovDifference:
    def test_whole_domain_zero(self):
        ds = grid_dataset(40)
        reg = Regionalization([square(-1, -1, 101, 101, "all")])
        assert region_cov_difference(reg, ds) == [pytest.approx(0.0, abs=1e-12)]

    def test_scalar_difference(self):
        # p = 1: global variance 4 in one region, 1 in the other region
        coords = [(float(i), 0.5) for i in range(8)]
        values = [[-2.0], [2.0], [-2.0], [2.0], [-1.0], [1.0], [-1.0], [1.0]]
        ds = SpatialDataset(coords, values)
        reg = Regionalization(
            [square(-1, 0, 3.5, 1, "left"), square(3.5, 0, 8, 1, "right")]
        )
        diffs = region_cov_difference(reg, ds)
        global_var = float(np.var(np.asarray(values)))
        assert diffs[0] == pytest.approx(abs(global_var - 4.0))
        assert diffs[1] == pytest.approx(abs(global_var - 1.0))

    def test_matches_brute_force(self, rng):
        ds = grid_dataset(50, seed=9, p=3)
        reg = grid_partition(ds, 2)
        diffs = region_cov_difference(reg, ds)
        from sbsskit import locations_by_region

        members = locations_by_region(reg, ds)
        global_cov = brute_covariance(ds.values)
        for rid, diff in zip(reg.region_ids(), diffs):
            idx = members[rid]
            if len(idx) < 2:
                assert diff is None
            else:
                expected = np.linalg.norm(global_cov - brute_covariance(ds.values[idx]))
                assert diff == pytest.approx(expected, rel=1e-10)

    def test_small_region_absent(self):
        coords = [(0.0, 0.0), (10.0, 0.0), (10.5, 0.0)]
        ds = SpatialDataset(coords, [[1.0], [2.0], [3.0]])
        reg = Regionalization(
            [square(-1, -1, 5, 1, "lone"), square(5, -1, 11, 1, "pair")]
        )
        diffs = region_cov_difference(reg, ds)
        assert diffs[0] is None
        assert diffs[1] is not None


class TestKernelSuggestions:
    def test_depth_zero(self):
        rings = kernel_suggestions(100.0, 0)
        assert [(r.inner, r.outer) for r in rings] == [(0.0, 100.0)]

    def test_depth_one(self):
        rings = kernel_suggestions(100.0, 1)
        assert [(r.inner, r.outer) for r in rings] == [
            (0.0, 100.0),
            (0.0, 50.0),
            (50.0, 100.0),
        ]

    def test_depth_two_adds_quarters(self):
        rings = kernel_suggestions(100.0, 2)
        assert [(r.inner, r.outer) for r in rings[3:]] == [
            (0.0, 25.0),
            (25.0, 50.0),
            (50.0, 75.0),
            (75.0, 100.0),
        ]

    def test_each_level_partitions(self):
        rings = kernel_suggestions(64.0, 3)
        by_level = {}
        from sbsskit.guidance import suggestion_levels

        for ring, level in zip(rings, suggestion_levels(3)):
            by_level.setdefault(level, []).append(ring)
        for level, level_rings in by_level.items():
            level_rings.sort(key=lambda r: r.inner)
            assert level_rings[0].inner == 0.0
            assert level_rings[-1].outer == 64.0
            for a, b in zip(level_rings, level_rings[1:]):
                assert a.outer == b.inner


class TestDistanceDensity:
    def test_two_points(self):
        ds = SpatialDataset([(0.0, 0.0), (3.0, 4.0)], [[1.0], [2.0]])
        edges, counts = distance_density(ds, 5)
        assert counts.sum() == 1
        assert counts[-1] == 1  # 5 == max distance lands in the last bin

    def test_unit_square_corners(self):
        ds = SpatialDataset(
            [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
            [[1.0], [2.0], [3.0], [4.0]],
        )
        edges, counts = distance_density(ds, 2)
        # bins split at sqrt(2)/2: four side pairs at 1, two диagonals at sqrt(2)
        assert counts.tolist() == [0, 6] or counts.tolist() == [4, 2]
        assert counts.sum() == 6

    def test_total_pair_count(self, rng):
        coords = rng.uniform(0, 10, (17, 2))
        ds = SpatialDataset(coords, rng.normal(size=(17, 1)))
        _, counts = distance_density(ds, 7)
        assert counts.sum() == 17 * 16 // 2


class TestVariograms:
    def test_constant_variable_zero(self, rng):
        coords = rng.uniform(0, 10, (20, 2))
        ds = SpatialDataset(coords, np.ones((20, 1)))
        vset = variograms(ds, 5)
        gamma = vset.gamma[0]
        assert np.nanmax(np.abs(gamma)) == 0.0

    def test_two_point_example(self):
        ds = SpatialDataset([(0.0, 0.0), (1.0, 0.0)], [[0.0], [2.0]])
        vset = variograms(ds, 1, max_lag=1.0)
        assert vset.gamma[0][0] == pytest.approx(2.0)

    def test_plain_average_without_half(self):
        ds = SpatialDataset([(0.0, 0.0), (1.0, 0.0)], [[0.0], [2.0]])
        vset = variograms(ds, 1, max_lag=1.0, semivariance=False)
        assert vset.gamma[0][0] == pytest.approx(4.0)

    def test_white_noise_sill(self):
        rng = np.random.default_rng(123)
        coords = rng.uniform(0, 1, (500, 2))
        ds = SpatialDataset(coords, rng.normal(size=(500, 2)))
        vset = variograms(ds, 10, max_lag=0.7)
        for row in vset.gamma:
            valid = row[np.isfinite(row)]
            assert np.all(np.abs(valid - 1.0) < 0.15)

    def test_standardization_invariance(self, rng):
        coords = rng.uniform(0, 10, (40, 2))
        base = rng.normal(size=(40, 2))
        ds1 = SpatialDataset(coords, base)
        ds2 = SpatialDataset(coords, base * 7.0 + 3.0)
        v1 = variograms(ds1, 6)
        v2 = variograms(ds2, 6)
        np.testing.assert_allclose(v1.gamma, v2.gamma, atol=1e-12)

    def test_empty_bins_absent(self):
        ds = SpatialDataset([(0.0, 0.0), (10.0, 0.0)], [[0.0], [1.0]])
        vset = variograms(ds, 4, max_lag=12.0)
        doc = vset.to_json()
        assert doc["per_variable"]["var_1"][0] is None
        assert vset.pair_counts.tolist() == [0, 0, 0, 1]


class TestVariableGridSummary:
    def test_identical_values_single_index(self, rng):
        coords = rng.uniform(0, 10, (20, 2))
        ds = SpatialDataset(coords, np.full((20, 1), 5.0), ["v"])
        cells = variable_grid_summary(ds, "v", 3)
        indices = {c.sextile for c in cells}
        assert len(indices) == 1

    def test_quantile_arithmetic(self):
        values = np.arange(1, 13, dtype=float)
        boundaries = sextile_boundaries(values)
        np.testing.assert_allclose(
            boundaries, [2.8333333333, 4.6666666667, 6.5, 8.3333333333, 10.1666666667]
        )
        assert sextile_index(12.0, boundaries) == 6
        assert sextile_index(1.0, boundaries) == 1

    def test_median_in_middle_sextiles(self, rng):
        values = rng.normal(size=200)
        boundaries = sextile_boundaries(values)
        assert sextile_index(float(np.median(values)), boundaries) in (3, 4)

    def test_cell_counts_sum(self):
        ds = grid_dataset(45)
        cells = variable_grid_summary(ds, "var_1", 4)
        assert sum(c.count for c in cells) == 45

    def test_one_point_per_cell(self):
        coords = [(c + 0.5, r + 0.5) for r in range(3) for c in range(4)]
        coords.extend([(0.0, 0.0), (4.0, 3.0)])
        values = [[float(i)] for i in range(len(coords))]
        ds = SpatialDataset(coords, values, ["v"])
        cells = variable_grid_summary(ds, "v", 1)
        assert len(cells) == 1
        assert cells[0].count == len(coords)

    def test_unknown_variable(self):
        ds = grid_dataset(10)
        with pytest.raises(DataError, match="unknown variable"):
            variable_grid_summary(ds, "nope", 2)


class TestComputeGuidance:
    def test_default_bundle_shape(self):
        ds = grid_dataset(120, seed=21, p=3)
        bundle = compute_guidance(ds, GuidanceParams())
        sources = [s.source for s in bundle.regionalizations]
        assert sources.count("grid") == 6
        assert sources.count("covariance") == 7
        assert len(bundle.kernel_suggestions) == 7  # depth 2: 1 + 2 + 4
        for suggestion in bundle.regionalizations:
            n_regions = len(suggestion.regionalization)
            assert len(suggestion.counts) == n_regions
            assert len(suggestion.flagged) == n_regions
            assert len(suggestion.cov_diff) == n_regions
            for ring_row in suggestion.kernel_mean_counts:
                assert len(ring_row) == n_regions

    def test_default_max_radius_quantile(self):
        ds = grid_dataset(80)
        from scipy.spatial.distance import pdist

        assert default_max_radius(ds) == pytest.approx(
            float(np.quantile(pdist(ds.locations), 0.25))
        )

    def test_invalid_threshold(self):
        ds = grid_dataset(30)
        with pytest.raises(DataError, match="threshold"):
            compute_guidance(ds, GuidanceParams(threshold=0.0))

    def test_k_range_single(self):
        ds = grid_dataset(60)
        bundle = compute_guidance(ds, GuidanceParams(k_min=2, k_max=2, grid_max=2))
        assert [s.source for s in bundle.regionalizations].count("covariance") == 1

    def test_bundle_json_shape(self):
        ds = grid_dataset(60)
        bundle = compute_guidance(ds, GuidanceParams(grid_max=2, k_min=2, k_max=3, kernel_depth=1))
        doc = bundle.to_json()
        assert doc["thresholds"]["min_count_fraction"] == 0.05
        assert len(doc["kernel_suggestions"]) == 3
        first = doc["kernel_suggestions"][0]
        assert set(first) == {"inner", "outer", "level", "mean_counts"}


class TestSettingMetrics:
    def test_whole_domain_setting(self):
        ds = grid_dataset(50)
        reg = Regionalization([square(-1, -1, 101, 101, "all")])
        setting = ParameterSetting(
            regionalization=reg, kernel=KernelConfig([(0.0, 30.0)])
        )
        report = setting_metrics(ds, setting)
        assert report["regions"][0]["cov_diff"] == pytest.approx(0.0, abs=1e-12)
        assert "eigenvalue_differences" not in report

    def test_experimental_flag(self):
        ds = grid_dataset(50, p=2)
        reg = Regionalization([square(-1, -1, 101, 101, "all")])
        setting = ParameterSetting(
            regionalization=reg, kernel=KernelConfig([(0.0, 30.0)])
        )
        report = setting_metrics(ds, setting, include_experimental=True)
        assert len(report["eigenvalue_differences"]) == 1
        assert report["eigenvalue_differences"][0][0] >= 0.0
