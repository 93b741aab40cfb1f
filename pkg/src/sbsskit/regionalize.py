"""Covariance-based automatic regionalization (REDCAP family).

Builds a contiguity-constrained spanning tree by agglomerative clustering
over the Voronoi adjacency graph, using the Frobenius distance between
per-location outer products as edge length, then cuts tree edges greedily so
that each cut maximizes the drop in summed region heterogeneity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform
from shapely.geometry import Polygon
from shapely.ops import unary_union
from sklearn.base import BaseEstimator

from ._validation import check_coords, check_positive_int, check_values
from .errors import DataError, GeometryError
from .geometry import clipped_voronoi, voronoi_cells
from .model import Region, Regionalization, SpatialDataset

LINKAGES = ("full-order-average", "first-order-single")


def edge_distance(x_i, x_j) -> float:
    """Frobenius distance between the outer products of two variable vectors.

    Callers standardize the variables first when comparing covariance
    structure rather than scale.
    """
    x_i = np.atleast_1d(np.asarray(x_i, dtype=np.float64))
    x_j = np.atleast_1d(np.asarray(x_j, dtype=np.float64))
    return float(np.linalg.norm(np.outer(x_i, x_i) - np.outer(x_j, x_j)))


def region_heterogeneity(values) -> float:
    """Sum over members of the Frobenius deviation of each centered outer
    product from the region covariance (divisor n_r; singletons give 0)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    m = values.shape[0]
    if m <= 1:
        return 0.0
    z = values - values.mean(axis=0)
    cov = z.T @ z / m
    # ||z z^T - C||_F^2 = |z|^4 - 2 z^T C z + ||C||_F^2
    sq = np.einsum("ij,ij->i", z, z)
    cross = np.einsum("ij,jk,ik->i", z, cov, z)
    dev = np.maximum(sq**2 - 2.0 * cross + float(np.sum(cov**2)), 0.0)
    return float(np.sum(np.sqrt(dev)))


def _standardize(values: np.ndarray) -> np.ndarray:
    """Zero mean, unit population variance per variable; constants stay zero."""
    centered = values - values.mean(axis=0)
    std = np.sqrt(np.mean(centered**2, axis=0))
    std[std == 0.0] = 1.0
    return centered / std


def _outer_flat(values: np.ndarray) -> np.ndarray:
    n, p = values.shape
    return np.einsum("ni,nj->nij", values, values).reshape(n, p * p)


@dataclass
class _TreeBuild:
    edges: list[tuple[int, int]]  # spanning tree edges in insertion order
    adjacency: np.ndarray  # boolean contiguity of the original locations


def _build_tree_full_order(dist: np.ndarray, contiguity: np.ndarray) -> list[tuple[int, int]]:
    """Constrained average-linkage agglomeration; returns the spanning tree.

    Cluster distances use all location pairs (full order); merges are
    restricted to contiguous clusters, and the tree edge recorded for a merge
    is the lowest-distance adjacency edge between the two clusters.
    """
    n = dist.shape[0]
    d = dist.copy()
    c = contiguity.copy()
    active = np.ones(n, dtype=bool)
    size = np.ones(n, dtype=np.int64)

    # best adjacency edge between cluster pairs: cluster -> {other: (w, i, j)}
    best: list[dict[int, tuple[float, int, int]]] = [dict() for _ in range(n)]
    for i, j in zip(*np.nonzero(np.triu(contiguity, k=1))):
        entry = (float(dist[i, j]), int(i), int(j))
        best[i][int(j)] = entry
        best[j][int(i)] = entry

    nn_dist = np.full(n, np.inf)
    nn_idx = np.full(n, -1, dtype=np.int64)

    def recompute_nn(a: int) -> None:
        row = np.where(c[a] & active, d[a], np.inf)
        row[a] = np.inf
        b = int(np.argmin(row))
        nn_dist[a] = row[b]
        nn_idx[a] = b

    for i in range(n):
        recompute_nn(i)

    tree: list[tuple[int, int]] = []
    for _ in range(n - 1):
        a = int(np.argmin(np.where(active, nn_dist, np.inf)))
        b = int(nn_idx[a])
        if not np.isfinite(nn_dist[a]) or b < 0:
            raise GeometryError(
                "adjacency graph is disconnected; cannot build spanning tree"
            )
        keep, drop = (a, b) if a < b else (b, a)
        tree.append(best[keep][drop][1:])

        # Lance-Williams average-linkage update into the kept slot
        total = size[keep] + size[drop]
        d[keep, :] = (size[keep] * d[keep, :] + size[drop] * d[drop, :]) / total
        d[:, keep] = d[keep, :]
        d[keep, keep] = 0.0
        size[keep] = total
        c[keep, :] |= c[drop, :]
        c[:, keep] = c[keep, :]
        c[keep, keep] = False
        active[drop] = False

        merged = best[drop]
        best[drop] = {}
        for other, entry in merged.items():
            if other == keep or not active[other]:
                best[other].pop(drop, None)
                continue
            current = best[keep].get(other)
            chosen = entry if current is None or entry < current else current
            best[keep][other] = chosen
            best[other].pop(drop, None)
            best[other][keep] = chosen

        recompute_nn(keep)
        for cl in np.flatnonzero(c[keep] & active):
            recompute_nn(int(cl))

    return tree


def _build_tree_first_order(dist: np.ndarray, contiguity: np.ndarray) -> list[tuple[int, int]]:
    """First-order single linkage: minimum spanning tree over adjacency edges."""
    n = dist.shape[0]
    edges = [
        (float(dist[i, j]), int(i), int(j))
        for i, j in zip(*np.nonzero(np.triu(contiguity, k=1)))
    ]
    edges.sort()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree: list[tuple[int, int]] = []
    for _, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            if len(tree) == n - 1:
                break
    if len(tree) != n - 1:
        raise GeometryError("adjacency graph is disconnected; cannot build spanning tree")
    return tree


class _CutSearch:
    """Greedy removal of tree edges maximizing the heterogeneity decrease.

    Cuts that would leave a region fully enclosed by another (a hole in the
    surrounding region's dissolved polygon) are skipped, so every partition
    along the path dissolves into simple polygons.
    """

    def __init__(
        self,
        tree: list[tuple[int, int]],
        values: np.ndarray,
        cell_adjacency: list[list[int]] | None = None,
        frame_touch: np.ndarray | None = None,
    ):
        self.tree = tree
        self.values = values
        n = values.shape[0]
        self.neighbors: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for e, (i, j) in enumerate(tree):
            self.neighbors[i].append((j, e))
            self.neighbors[j].append((i, e))
        self.cell_adjacency = cell_adjacency
        self.frame_touch = frame_touch
        self.cut: set[int] = set()
        self.labels = np.zeros(n, dtype=np.int64)
        self.component_nodes: dict[int, np.ndarray] = {0: np.arange(n)}
        self.component_hg: dict[int, float] = {0: region_heterogeneity(values)}
        self.next_label = 1
        self._edge_cache: dict[int, tuple[int, float, frozenset]] = {}

    def total_heterogeneity(self) -> float:
        return float(sum(self.component_hg.values()))

    def _side_nodes(self, start: int, blocked_edge: int) -> list[int]:
        seen = {start}
        stack = [start]
        while stack:
            node = stack.pop()
            for nxt, e in self.neighbors[node]:
                if e == blocked_edge or e in self.cut or nxt in seen:
                    continue
                seen.add(nxt)
                stack.append(nxt)
        return sorted(seen)

    def _evaluate(self, e: int) -> tuple[float, frozenset]:
        i, _ = self.tree[e]
        comp = int(self.labels[i])
        cached = self._edge_cache.get(e)
        if cached is not None and cached[0] == comp:
            return cached[1], cached[2]
        side = self._side_nodes(i, e)
        side_set = frozenset(side)
        comp_nodes = self.component_nodes[comp]
        other = np.asarray(sorted(set(comp_nodes.tolist()) - side_set), dtype=np.int64)
        decrease = (
            self.component_hg[comp]
            - region_heterogeneity(self.values[np.asarray(side, dtype=np.int64)])
            - region_heterogeneity(self.values[other])
        )
        self._edge_cache[e] = (comp, decrease, side_set)
        return decrease, side_set

    def _region_has_hole(self, part: frozenset) -> bool:
        """True iff the frame complement of ``part`` has a component without
        frame contact, i.e. the part's dissolved polygon would enclose it."""
        if self.cell_adjacency is None:
            return False
        n = len(self.labels)
        outside = n - len(part)
        if outside == 0:
            return False
        seen = set()
        stack = [
            i for i in range(n) if self.frame_touch[i] and i not in part
        ]
        seen.update(stack)
        while stack:
            node = stack.pop()
            for neighbor in self.cell_adjacency[node]:
                if neighbor in part or neighbor in seen:
                    continue
                seen.add(neighbor)
                stack.append(neighbor)
        return len(seen) < outside

    def cut_once(self) -> float:
        """Apply the best hole-free cut; returns the achieved decrease."""
        candidates = []
        for e in range(len(self.tree)):
            if e in self.cut:
                continue
            decrease, side = self._evaluate(e)
            candidates.append((-decrease, e, side))
        candidates.sort(key=lambda item: (item[0], item[1]))
        best_e = -1
        best_decrease = -np.inf
        best_side: frozenset = frozenset()
        for neg_decrease, e, side in candidates:
            comp = int(self.labels[self.tree[e][0]])
            other = frozenset(self.component_nodes[comp].tolist()) - side
            if self._region_has_hole(side) or self._region_has_hole(other):
                continue
            best_e, best_decrease, best_side = e, -neg_decrease, side
            break
        if best_e < 0:
            raise DataError(
                "no tree edge can be cut without enclosing a region",
                field="n_regions",
            )
        self.cut.add(best_e)
        i, _ = self.tree[best_e]
        old = int(self.labels[i])
        side_arr = np.asarray(sorted(best_side), dtype=np.int64)
        other_arr = np.asarray(
            sorted(set(self.component_nodes[old].tolist()) - best_side), dtype=np.int64
        )
        # both sides get fresh component ids so cached edge evaluations keyed
        # on the split component can never be mistaken for current ones
        new_side, new_other = self.next_label, self.next_label + 1
        self.next_label += 2
        del self.component_nodes[old]
        del self.component_hg[old]
        self.labels[side_arr] = new_side
        self.labels[other_arr] = new_other
        self.component_nodes[new_side] = side_arr
        self.component_nodes[new_other] = other_arr
        self.component_hg[new_side] = region_heterogeneity(self.values[side_arr])
        self.component_hg[new_other] = region_heterogeneity(self.values[other_arr])
        return best_decrease


class CovarianceRegionalization(BaseEstimator):
    """Spatially constrained clustering of locations by covariance structure.

    Parameters
    ----------
    n_regions : int
        Target number of regions (tree cuts stop at ``n_regions - 1``).
    linkage : {"full-order-average", "first-order-single"}
        Agglomeration strategy for the spanning tree.
    standardize : bool
        Standardize variables (zero mean, unit variance) before computing
        outer-product distances and heterogeneity. Default True.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
        Region label (0..n_regions-1) per location, relabeled so that label
        order follows each region's smallest member index.
    labels_path_ : dict[int, ndarray]
        Labels for every intermediate region count 1..n_regions.
    heterogeneity_path_ : list[float]
        Total heterogeneity after 0, 1, .. n_regions-1 cuts (non-increasing
        along the greedy sequence on well-behaved data).
    tree_edges_ : list[tuple[int, int]]
        Spanning tree edges in insertion order.
    """

    def __init__(self, n_regions: int = 2, linkage: str = "full-order-average",
                 standardize: bool = True):
        self.n_regions = n_regions
        self.linkage = linkage
        self.standardize = standardize

    def fit(self, X, y=None, *, coords=None, dataset: SpatialDataset | None = None):
        if dataset is not None:
            values = dataset.values
            coords = dataset.locations
        else:
            if coords is None:
                raise ValueError("coords are required when no dataset is given")
            coords = check_coords(coords)
            values = check_values(X, n_locations=coords.shape[0])
        n = coords.shape[0]
        n_regions = check_positive_int(self.n_regions, "n_regions")
        if n_regions > n:
            raise DataError(
                f"cannot form {n_regions} regions from {n} locations", field="n_regions"
            )
        if self.linkage not in LINKAGES:
            raise DataError(f"unknown linkage {self.linkage!r}", field="linkage")

        work = _standardize(values) if self.standardize else values.astype(np.float64)
        # frame-clipped contiguity keeps dissolved region polygons connected
        _, graph, frame_touch = clipped_voronoi(coords)
        contiguity = np.zeros((n, n), dtype=bool)
        adjacency_lists: list[list[int]] = [[] for _ in range(n)]
        for i, j in graph.edges:
            contiguity[i, j] = contiguity[j, i] = True
            adjacency_lists[i].append(j)
            adjacency_lists[j].append(i)

        dist = squareform(pdist(_outer_flat(work)))
        if self.linkage == "full-order-average":
            tree = _build_tree_full_order(dist, contiguity)
        else:
            tree = _build_tree_first_order(dist, contiguity)

        search = _CutSearch(tree, work, adjacency_lists, frame_touch)
        labels_path = {1: _canonical_labels(search.labels)}
        hg_path = [search.total_heterogeneity()]
        for _ in range(n_regions - 1):
            search.cut_once()
            k = len(search.component_nodes)
            labels_path[k] = _canonical_labels(search.labels)
            hg_path.append(search.total_heterogeneity())

        self.n_features_in_ = values.shape[1]
        self.tree_edges_ = tree
        self.labels_path_ = labels_path
        self.heterogeneity_path_ = hg_path
        self.labels_ = labels_path[n_regions]
        return self

    def fit_predict(self, X, y=None, **fit_params) -> np.ndarray:
        return self.fit(X, y, **fit_params).labels_


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel components 0..k-1 by order of each component's first member."""
    out = np.empty_like(labels)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[int(lab)] = len(mapping)
        out[i] = mapping[int(lab)]
    return out


def _dissolve(cells: list[Polygon], member_idx: np.ndarray, region_id: str) -> Region:
    merged = unary_union([cells[int(i)] for i in member_idx])
    if not isinstance(merged, Polygon):
        raise GeometryError(
            f"region {region_id} dissolved into disconnected parts",
            code="region_not_contiguous",
        )
    if merged.interiors:
        total = merged.area
        holes = sum(Polygon(ring).area for ring in merged.interiors)
        if holes > 1e-12 * max(total, 1.0):
            raise GeometryError(
                f"region {region_id} would contain a hole",
                code="region_has_hole",
            )
        merged = Polygon(merged.exterior)
    return Region(np.asarray(merged.exterior.coords), region_id)


def labels_to_regionalization(coords, labels: np.ndarray, *, prefix: str = "c") -> Regionalization:
    """Dissolve the Voronoi cells of each labeled group into region polygons."""
    coords = check_coords(coords)
    cells = voronoi_cells(coords)
    labels = np.asarray(labels)
    groups = np.unique(labels)
    width = len(str(max(len(groups) - 1, 0)))
    regions = []
    for g, lab in enumerate(groups):
        member_idx = np.flatnonzero(labels == lab)
        regions.append(_dissolve(cells, member_idx, f"{prefix}{g:0{width}d}"))
    return Regionalization(regions)


def covariance_regionalization(
    dataset: SpatialDataset, n_regions: int, *, linkage: str = "full-order-average"
) -> Regionalization:
    """REDCAP partition of a dataset into ``n_regions`` contiguous regions."""
    est = CovarianceRegionalization(n_regions=n_regions, linkage=linkage)
    est.fit(None, dataset=dataset)
    return labels_to_regionalization(dataset.locations, est.labels_)
