"""Acceptance suite: one test per release criterion, each printing a
pass/fail line (collected in the terminal summary)."""

import json
import time

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial import ConvexHull
from scipy.spatial.distance import cdist

from sbsskit import (
    CovarianceRegionalization,
    KernelConfig,
    KernelRing,
    ParameterSetting,
    Region,
    Regionalization,
    SpatialBSS,
    SpatialDataset,
    compute_guidance,
    grid_partition,
    kernel_location_counts,
    local_covariance,
    merge_regions,
    neighbourhood_matrix,
    region_covariance,
    region_heterogeneity,
    region_location_counts,
    run_sbss,
    setting_to_json,
    split_region,
    validate_regionalization,
    variograms,
    whiten,
)
from sbsskit.cli import main as cli_main
from sbsskit.core import joint_diagonalize
from sbsskit.geometry import clipped_voronoi_adjacency
from sbsskit.guidance import GuidanceParams
from sbsskit.regionalize import _standardize

from conftest import record_criterion
from oracles import (
    best_contiguous_bipartition,
    brute_local_covariance,
    brute_neighbourhood,
)


def test_criterion_01_neighbourhood_oracle():
    """K equals brute-force pairwise evaluation on 200 random datasets."""
    rng = np.random.default_rng(101)
    start = time.time()
    for _ in range(200):
        n = int(rng.integers(2, 51))
        coords = rng.uniform(0, 100, (n, 2))
        inner = float(rng.uniform(0, 60))
        outer = inner + float(rng.uniform(1, 60))
        fast = neighbourhood_matrix(coords, KernelRing(inner, outer))
        slow = brute_neighbourhood(coords, inner, outer)
        np.testing.assert_array_equal(fast, slow)
    elapsed = time.time() - start
    record_criterion(
        "01 neighbourhood matrix oracle", elapsed < 5.0,
        f"200 datasets exact, {elapsed:.2f}s",
    )


def test_criterion_02_local_covariance_identities():
    """Full-ring LCov = -Cov_r (1e-10); LCov matches brute force (1e-12)."""
    rng = np.random.default_rng(202)
    worst_identity = 0.0
    worst_oracle = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 16))
        p = int(rng.integers(1, 4))
        coords = rng.uniform(0, 10, (n, 2))
        values = rng.normal(size=(n, p))
        max_d = cdist(coords, coords).max()
        full = local_covariance(coords, values, KernelRing(0.0, max_d + 1.0))
        worst_identity = max(
            worst_identity, float(np.abs(full + region_covariance(values)).max())
        )
        inner = float(rng.uniform(0, 5))
        outer = inner + float(rng.uniform(0.5, 8))
        fast = local_covariance(coords, values, KernelRing(inner, outer))
        slow = brute_local_covariance(coords, values, inner, outer)
        worst_oracle = max(worst_oracle, float(np.abs(fast - slow).max()))
    record_criterion(
        "02 local covariance identities",
        worst_identity < 1e-10 and worst_oracle < 1e-12,
        f"full-ring {worst_identity:.2e}, oracle {worst_oracle:.2e}",
    )


def test_criterion_03_whitening():
    """Whitened covariance ~ I (1e-10); W Cov W^T = I (1e-8) after a run."""
    rng = np.random.default_rng(303)
    worst_white = 0.0
    worst_unmix = 0.0
    for trial in range(50):
        n, p = 200, int(rng.integers(2, 7))
        coords = rng.uniform(0, 1, (n, 2))
        values = rng.normal(size=(n, p)) @ rng.normal(size=(p, p))
        w = whiten(values)
        y = w.centered @ w.transform.T
        worst_white = max(worst_white, float(np.abs(y.T @ y / n - np.eye(p)).max()))
        est = SpatialBSS(kernel=[(0.0, 0.3)]).fit(values, coords=coords)
        gap = est.unmixing_ @ w.covariance @ est.unmixing_.T - np.eye(p)
        worst_unmix = max(worst_unmix, float(np.abs(gap).max()))
    record_criterion(
        "03 whitening",
        worst_white < 1e-10 and worst_unmix < 1e-8,
        f"whitened cov {worst_white:.2e}, W Cov W^T {worst_unmix:.2e}",
    )


def test_criterion_04_joint_diagonalization():
    """Exact recovery on shared-eigenbasis sets; monotone criterion."""
    rng = np.random.default_rng(404)
    worst_off = 0.0
    for p in range(2, 9):
        q, _ = np.linalg.qr(rng.normal(size=(p, p)))
        mats = [q @ np.diag(rng.normal(size=p)) @ q.T for _ in range(5)]
        res = joint_diagonalize(mats)
        off_mass = 0.0
        for m in mats:
            d = res.rotation @ m @ res.rotation.T
            off = d - np.diag(np.diag(d))
            off_mass += float(np.sum(off**2))
        worst_off = max(worst_off, off_mass)
    monotone = True
    for _ in range(20):
        p = int(rng.integers(2, 7))
        mats = [rng.normal(size=(p, p)) for _ in range(int(rng.integers(1, 6)))]
        mats = [m + m.T for m in mats]
        trace = joint_diagonalize(mats).off_criterion
        monotone &= all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))
    record_criterion(
        "04 joint diagonalization",
        worst_off < 1e-9 and monotone,
        f"shared-basis off-mass {worst_off:.2e}, criterion monotone {monotone}",
    )


def _moving_average_fields(coords, radii, rng):
    d = cdist(coords, coords)
    cols = []
    for radius in radii:
        eps = rng.normal(size=coords.shape[0])
        if radius <= 0:
            cols.append(eps)
        else:
            w = (d <= radius).astype(float)
            cols.append(w @ eps / np.sqrt((w * w).sum(axis=1)))
    z = np.column_stack(cols)
    z = z - z.mean(axis=0)
    return z / np.sqrt((z**2).mean(axis=0))


def test_criterion_05_sbss_recovery():
    """Latent moving-average fields recovered with |corr| > 0.95 in >= 95%."""
    rings = [(0.0, 0.05), (0.05, 0.15), (0.15, 0.4)]
    radii = (0.0, 0.05, 0.15)
    start = time.time()
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        coords = rng.uniform(0, 1, (500, 2))
        z = _moving_average_fields(coords, radii, rng)
        a = rng.normal(size=(3, 3))
        u, _, vt = np.linalg.svd(a)
        mixing = u @ np.diag(np.linspace(1.0, 3.0, 3)) @ vt
        est = SpatialBSS(kernel=rings, normalization="pairs").fit(
            z @ mixing.T, coords=coords
        )
        corr = np.abs(np.corrcoef(z.T, est.scores_.T)[:3, 3:])
        rows, cols = linear_sum_assignment(-corr)
        hits += corr[rows, cols].min() > 0.95
    elapsed = time.time() - start
    record_criterion(
        "05 sbss recovery",
        hits >= 95 and elapsed < 120.0,
        f"{hits}/100 trials matched, {elapsed:.1f}s",
    )


def test_criterion_06_redcap():
    """Connected regions, exhaustive-match on planted splits, monotone hg."""
    rng = np.random.default_rng(606)
    connected_ok = True
    monotone_ok = True
    for _ in range(100):
        n = int(rng.integers(10, 45))
        coords = rng.uniform(0, 10, (n, 2))
        values = rng.normal(size=(n, int(rng.integers(1, 4))))
        k = int(rng.integers(2, min(9, n)))
        est = CovarianceRegionalization(n_regions=k).fit(values, coords=coords)
        graph = clipped_voronoi_adjacency(coords)
        for kk, labels in est.labels_path_.items():
            for lab in np.unique(labels):
                members = set(np.flatnonzero(labels == lab).tolist())
                start = next(iter(members))
                seen = {start}
                stack = [start]
                while stack:
                    node = stack.pop()
                    for nb in graph.neighbors(node):
                        if nb in members and nb not in seen:
                            seen.add(nb)
                            stack.append(nb)
                connected_ok &= seen == members
        path = est.heterogeneity_path_
        monotone_ok &= all(a >= b - 1e-9 for a, b in zip(path, path[1:]))

    planted_ok = True
    for seed in range(6):
        prng = np.random.default_rng(seed)
        left = np.column_stack([prng.uniform(0, 1, 6), prng.uniform(0, 1, 6)])
        right = np.column_stack([prng.uniform(4, 5, 6), prng.uniform(0, 1, 6)])
        coords = np.vstack([left, right])
        signs = np.array([1.0, -1.0] * 6)
        values = np.vstack(
            [
                np.outer(signs[:6], np.array([1.0, 0.5])),
                np.outer(signs[6:], np.array([-0.8, 1.9])),
            ]
        )
        est = CovarianceRegionalization(n_regions=2).fit(values, coords=coords)
        work = _standardize(values)
        greedy_total = sum(
            region_heterogeneity(work[est.labels_ == lab])
            for lab in np.unique(est.labels_)
        )
        graph = clipped_voronoi_adjacency(coords)
        oracle_total = best_contiguous_bipartition(
            list(graph.nodes),
            list(graph.edges),
            lambda idx: region_heterogeneity(work[np.asarray(idx)]),
        )
        planted_ok &= abs(greedy_total - oracle_total) < 1e-9
    record_criterion(
        "06 redcap regionalization",
        connected_ok and planted_ok and monotone_ok,
        f"connected {connected_ok}, planted-match {planted_ok}, monotone {monotone_ok}",
    )


def test_criterion_07_variograms():
    """White-noise sill within 0.15; constant variable zero; hand example."""
    rng = np.random.default_rng(707)
    coords = rng.uniform(0, 1, (500, 2))
    ds = SpatialDataset(coords, rng.normal(size=(500, 2)))
    vset = variograms(ds, 10, max_lag=0.7)
    sill_dev = float(np.nanmax(np.abs(vset.gamma - 1.0)))

    const = SpatialDataset(coords, np.full((500, 1), 2.5))
    const_max = float(np.nanmax(np.abs(variograms(const, 10).gamma)))

    two = SpatialDataset([(0.0, 0.0), (1.0, 0.0)], [[0.0], [2.0]])
    hand = float(variograms(two, 1, max_lag=1.0).gamma[0][0])

    record_criterion(
        "07 variograms",
        sill_dev < 0.15 and const_max == 0.0 and abs(hand - 2.0) < 1e-12,
        f"sill dev {sill_dev:.3f}, constant {const_max}, two-point {hand}",
    )


def test_criterion_08_geometry():
    """Split/merge area round trip at 1e-9 relative; grids validate."""
    rng = np.random.default_rng(808)
    worst_rel = 0.0
    for _ in range(100):
        pts = rng.uniform(0, 10, (12, 2))
        hull = ConvexHull(pts)
        region = Region(pts[hull.vertices], "hull")
        centroid = pts[hull.vertices].mean(axis=0)
        theta = float(rng.uniform(0, np.pi))
        direction = np.array([np.cos(theta), np.sin(theta)])
        offset = rng.uniform(-0.5, 0.5, 2)
        cut = np.array(
            [centroid + offset - 100 * direction, centroid + offset + 100 * direction]
        )
        part_a, part_b = split_region(region, cut)
        merged = merge_regions(part_a, part_b)
        worst_rel = max(
            worst_rel, abs(merged.area() - region.area()) / region.area()
        )
        sum_rel = abs(part_a.area() + part_b.area() - region.area()) / region.area()
        worst_rel = max(worst_rel, sum_rel)

    grids_ok = True
    for _ in range(20):
        coords = rng.uniform(-50, 50, (int(rng.integers(5, 60)), 2))
        n_side = int(rng.integers(1, 7))
        reg = grid_partition(coords, n_side)
        grids_ok &= validate_regionalization(reg, coords).ok
    record_criterion(
        "08 geometry round trips",
        worst_rel < 1e-9 and grids_ok,
        f"worst relative area error {worst_rel:.2e}, grids valid {grids_ok}",
    )


@pytest.mark.slow
def test_criterion_09_scale_envelope():
    """Full guidance precomputation at 2108 x 18 scale in under 5 minutes."""
    rng = np.random.default_rng(909)
    coords = rng.uniform(0, 1_000_000, (2108, 2))
    values = rng.normal(size=(2108, 18))
    ds = SpatialDataset(coords, values)
    start = time.time()
    bundle = compute_guidance(ds, GuidanceParams())
    elapsed = time.time() - start
    shape_ok = (
        len(bundle.regionalizations) == 13 and len(bundle.kernel_suggestions) == 7
    )
    record_criterion(
        "09 scale envelope",
        elapsed < 300.0 and shape_ok,
        f"2108x18 guidance in {elapsed:.1f}s",
    )


def test_criterion_10_threshold_flagging():
    """Counts below ceil(0.05 n) flag; exact boundary does not."""
    rng = np.random.default_rng(1010)

    def split_dataset(n_right):
        coords = np.vstack(
            [rng.uniform(0, 10, (100 - n_right, 2)), rng.uniform(90, 100, (n_right, 2))]
        )
        ds = SpatialDataset(coords, rng.normal(size=(100, 1)))
        reg = Regionalization(
            [
                Region([(-1, -1), (50, -1), (50, 101), (-1, 101)], "big"),
                Region([(50, -1), (101, -1), (101, 101), (50, 101)], "small"),
            ]
        )
        return ds, reg

    ds4, reg4 = split_dataset(4)
    _, flags4 = region_location_counts(reg4, ds4)
    ds5, reg5 = split_dataset(5)
    counts5, flags5 = region_location_counts(reg5, ds5)

    # kernel boundary: 10 isolated pairs -> every column sum is exactly 1
    # and ceil(0.05 * 20) = 1, so the mean sits exactly on the cutoff
    pair_coords = []
    for i in range(10):
        base = np.array([10.0 * i, 0.0])
        pair_coords.extend([base, base + np.array([0.0, 1.0])])
    pair_ds = SpatialDataset(np.asarray(pair_coords), rng.normal(size=(20, 1)))
    reg_all = Regionalization(
        [Region([(-1, -2), (91, -2), (91, 3), (-1, 3)], "all")]
    )
    at_cutoff = kernel_location_counts(
        reg_all, KernelConfig([(0.5, 1.5)]), pair_ds
    )
    below_cutoff = kernel_location_counts(
        reg_all, KernelConfig([(20000.0, 30000.0)]), pair_ds
    )

    ok = (
        flags4 == [False, True]
        and flags5 == [False, False]
        and counts5 == [95, 5]
        and at_cutoff["per_ring_means"][0][0] == 1.0
        and at_cutoff["per_ring_flagged"][0][0] is False
        and below_cutoff["per_ring_flagged"][0][0] is True
    )
    record_criterion(
        "10 threshold flagging", ok,
        "count 4 flags, count 5 (boundary) does not; kernel mean at cutoff does not",
    )


def test_criterion_11_cli_determinism(tmp_path):
    """suggest and run produce byte-identical outputs across invocations."""
    rng = np.random.default_rng(1111)
    coords = rng.uniform(0, 100, (60, 2))
    values = rng.normal(size=(60, 2))
    lines = ["x,y,a,b"]
    for i in range(60):
        lines.append(
            ",".join(
                repr(float(v))
                for v in (coords[i, 0], coords[i, 1], values[i, 0], values[i, 1])
            )
        )
    csv = tmp_path / "pts.csv"
    csv.write_text("\n".join(lines))
    ws = tmp_path / "ws"
    assert cli_main(["ingest", str(csv), "--x", "x", "--y", "y", "--workspace", str(ws)]) == 0

    suggest_args = [
        "suggest", "--workspace", str(ws),
        "--grid-max", "3", "--k-min", "2", "--k-max", "4", "--kernel-depth", "2",
    ]
    assert cli_main(suggest_args) == 0
    guidance_first = (ws / "guidance.json").read_bytes()
    assert cli_main(suggest_args) == 0
    guidance_identical = (ws / "guidance.json").read_bytes() == guidance_first

    region = Region([(-5, -5), (105, -5), (105, 105), (-5, 105)], "all")
    setting = ParameterSetting(
        regionalization=Regionalization([region]),
        kernel=KernelConfig([(0.0, 40.0)]),
        label="det",
    )
    setting_path = tmp_path / "setting.json"
    setting_path.write_text(json.dumps(setting_to_json(setting)))
    outputs = []
    for out_name in ("o1", "o2"):
        out = tmp_path / out_name
        assert (
            cli_main(
                [
                    "run", "--workspace", str(ws),
                    "--setting", str(setting_path), "--out", str(out),
                ]
            )
            == 0
        )
        outputs.append(
            tuple((out / f).read_bytes() for f in ("W.csv", "scores.csv", "diagnostics.json"))
        )
    run_identical = outputs[0] == outputs[1]
    record_criterion(
        "11 cli determinism",
        guidance_identical and run_identical,
        f"suggest identical {guidance_identical}, run identical {run_identical}",
    )
