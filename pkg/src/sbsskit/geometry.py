"""Distance, Voronoi, grid, and region split/merge geometry.

Voronoi cells are bounded by mirroring all locations across the edges of the
dataset bounding box expanded by 5% per side: the perpendicular bisector
between a point and its mirror is exactly the frame edge, so every original
cell comes out as a finite polygon inside the frame and two cells are
adjacent iff they share a ridge of positive length there.
"""

from __future__ import annotations

import numpy as np
import networkx as nx
from scipy.spatial import Voronoi
from scipy.spatial.distance import pdist, squareform
from shapely.geometry import LineString, Point, Polygon, box
from shapely.ops import split as shapely_split
from shapely.ops import unary_union

from ._validation import check_coords, check_positive_int
from .errors import GeometryError
from .model import GEOMETRIC_TOLERANCE, Region, Regionalization, SpatialDataset

#: Bounding-box expansion per side for the Voronoi clipping frame.
FRAME_MARGIN = 0.05


def _coords_of(dataset_or_coords) -> np.ndarray:
    if isinstance(dataset_or_coords, SpatialDataset):
        return dataset_or_coords.locations
    return check_coords(dataset_or_coords)


def pairwise_distances(dataset_or_coords) -> np.ndarray:
    """Symmetric n x n Euclidean distance matrix with zero diagonal."""
    coords = _coords_of(dataset_or_coords)
    if coords.shape[0] < 2:
        raise GeometryError("need at least 2 locations for distances")
    return squareform(pdist(coords))


def _voronoi_frame(coords: np.ndarray) -> tuple[float, float, float, float]:
    mn = coords.min(axis=0)
    mx = coords.max(axis=0)
    extent = mx - mn
    if np.any(extent <= 0.0):
        raise GeometryError("degenerate for Voronoi", code="degenerate_voronoi")
    pad = FRAME_MARGIN * extent
    return (mn[0] - pad[0], mn[1] - pad[1], mx[0] + pad[0], mx[1] + pad[1])


def _check_voronoi_input(coords: np.ndarray) -> None:
    if coords.shape[0] < 3:
        raise GeometryError("degenerate for Voronoi", code="degenerate_voronoi")
    centered = coords - coords.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(coords).max())) < 2:
        raise GeometryError("degenerate for Voronoi", code="degenerate_voronoi")


def _mirrored_voronoi(coords: np.ndarray):
    _check_voronoi_input(coords)
    xmin, ymin, xmax, ymax = _voronoi_frame(coords)
    left = np.column_stack([2 * xmin - coords[:, 0], coords[:, 1]])
    right = np.column_stack([2 * xmax - coords[:, 0], coords[:, 1]])
    bottom = np.column_stack([coords[:, 0], 2 * ymin - coords[:, 1]])
    top = np.column_stack([coords[:, 0], 2 * ymax - coords[:, 1]])
    augmented = np.vstack([coords, left, right, bottom, top])
    return Voronoi(augmented), (xmin, ymin, xmax, ymax)


def clipped_voronoi(dataset_or_coords):
    """Frame-clipped Voronoi cells, their adjacency, and frame contact flags.

    Returns ``(cells, graph, frame_touch)`` where ``cells[i]`` is the finite
    polygon of location i, ``graph`` links cells sharing a positive-length
    edge, and ``frame_touch[i]`` marks cells on the clipping frame boundary.
    """
    coords = _coords_of(dataset_or_coords)
    vor, frame = _mirrored_voronoi(coords)
    frame_box = box(*frame)
    n = coords.shape[0]
    cells = []
    for i in range(n):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise GeometryError(
                "degenerate for Voronoi", code="degenerate_voronoi"
            )  # pragma: no cover - mirrors bound every original cell
        poly = Polygon(vor.vertices[region])
        if not poly.is_valid:
            poly = poly.buffer(0.0)
        cells.append(poly.intersection(frame_box))

    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    frame_touch = np.zeros(n, dtype=bool)
    for (a, b), verts in zip(vor.ridge_points, vor.ridge_vertices):
        if a == b or (a >= n and b >= n):
            continue
        if -1 in verts:
            continue  # mirrors bound every original cell
        length = float(np.linalg.norm(vor.vertices[verts[0]] - vor.vertices[verts[1]]))
        if length <= GEOMETRIC_TOLERANCE:
            continue
        if a < n and b < n:
            graph.add_edge(int(min(a, b)), int(max(a, b)))
        else:
            frame_touch[int(min(a, b))] = True
    return cells, graph, frame_touch


def voronoi_cells(dataset_or_coords) -> list[Polygon]:
    """Finite Voronoi cell polygon per location, clipped to the frame."""
    return clipped_voronoi(dataset_or_coords)[0]


def voronoi_adjacency(dataset_or_coords) -> nx.Graph:
    """Undirected graph linking locations whose Voronoi cells share an edge.

    Computed on the unbounded diagram (degenerate zero-length ridges are
    dropped), so the edge set depends only on the relative geometry and is
    invariant under translation and rotation of the location set.
    """
    coords = _coords_of(dataset_or_coords)
    _check_voronoi_input(coords)
    vor = Voronoi(coords)
    graph = nx.Graph()
    graph.add_nodes_from(range(coords.shape[0]))
    for (a, b), verts in zip(vor.ridge_points, vor.ridge_vertices):
        if a == b:
            continue
        if -1 not in verts:
            length = float(
                np.linalg.norm(vor.vertices[verts[0]] - vor.vertices[verts[1]])
            )
            if length <= GEOMETRIC_TOLERANCE:
                continue  # cells meeting in a single point are not adjacent
        graph.add_edge(int(min(a, b)), int(max(a, b)))
    return graph


def clipped_voronoi_adjacency(dataset_or_coords) -> nx.Graph:
    """Adjacency of the frame-clipped cells; a subgraph of the unbounded
    adjacency, consistent with :func:`voronoi_cells` by construction."""
    return clipped_voronoi(dataset_or_coords)[1]


def grid_bbox(coords: np.ndarray) -> tuple[float, float, float, float]:
    """Bounding box used for grid partitions; degenerate extents are padded."""
    mn = coords.min(axis=0).astype(float)
    mx = coords.max(axis=0).astype(float)
    for d in range(2):
        if mx[d] - mn[d] <= 0.0:
            mn[d] -= 0.5
            mx[d] += 0.5
    return (mn[0], mn[1], mx[0], mx[1])


def grid_cell_indices(coords: np.ndarray, n_side: int, bbox=None) -> np.ndarray:
    """Half-open cell membership, closed on the top/right edge of the bbox.

    Returns (row, col) integer pairs; a location exactly on an interior grid
    line belongs to the higher cell.
    """
    if bbox is None:
        bbox = grid_bbox(coords)
    xmin, ymin, xmax, ymax = bbox
    fx = (coords[:, 0] - xmin) / (xmax - xmin)
    fy = (coords[:, 1] - ymin) / (ymax - ymin)
    col = np.clip(np.floor(fx * n_side).astype(int), 0, n_side - 1)
    row = np.clip(np.floor(fy * n_side).astype(int), 0, n_side - 1)
    return np.column_stack([row, col])


def grid_partition(dataset_or_coords, n_side: int) -> Regionalization:
    """Square n x n grid over the bounding box; empty cells are dropped."""
    coords = _coords_of(dataset_or_coords)
    n_side = check_positive_int(n_side, "n_side")
    xmin, ymin, xmax, ymax = bbox = grid_bbox(coords)
    xs = np.linspace(xmin, xmax, n_side + 1)
    ys = np.linspace(ymin, ymax, n_side + 1)
    occupied = {tuple(rc) for rc in grid_cell_indices(coords, n_side, bbox)}
    width = len(str(n_side - 1))
    regions = []
    for row in range(n_side):
        for col in range(n_side):
            if (row, col) not in occupied:
                continue
            x0, x1 = xs[col], xs[col + 1]
            y0, y1 = ys[row], ys[row + 1]
            regions.append(
                Region(
                    [(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
                    f"g{row:0{width}d}_{col:0{width}d}",
                )
            )
    return Regionalization(regions)


def _polygon_pieces(geometry) -> list[Polygon]:
    if geometry.is_empty:
        return []
    if isinstance(geometry, Polygon):
        return [geometry]
    return [g for g in getattr(geometry, "geoms", []) if isinstance(g, Polygon)]


def split_region(region: Region, cut) -> tuple[Region, Region]:
    """Split a region in two along a polyline crossing its boundary once.

    The polyline must start and end outside the region (or on its boundary)
    and cross the interior exactly once; re-entering cuts are rejected rather
    than repaired.
    """
    cut = np.asarray(cut, dtype=np.float64)
    if cut.ndim != 2 or cut.shape[1] != 2 or cut.shape[0] < 2:
        raise GeometryError("cut polyline needs at least two planar vertices")
    line = LineString(cut)
    poly = region.polygon
    for endpoint in (cut[0], cut[-1]):
        point = Point(endpoint)
        if poly.contains(point) and poly.boundary.distance(point) > GEOMETRIC_TOLERANCE:
            raise GeometryError(
                "cut does not separate region", code="cut_does_not_separate"
            )
    pieces = _polygon_pieces(shapely_split(poly, line))
    pieces = [p for p in pieces if p.area > GEOMETRIC_TOLERANCE**2]
    if len(pieces) < 2:
        raise GeometryError("cut does not separate region", code="cut_does_not_separate")
    if len(pieces) > 2:
        raise GeometryError("ambiguous cut", code="ambiguous_cut")
    pieces.sort(key=lambda p: (p.centroid.x, p.centroid.y))
    out = []
    for suffix, piece in zip("ab", pieces):
        if piece.interiors:
            raise GeometryError("ambiguous cut", code="ambiguous_cut")
        out.append(Region(np.asarray(piece.exterior.coords), f"{region.id}{suffix}"))
    return out[0], out[1]


def merge_regions(a: Region, b: Region) -> Region:
    """Dissolve two regions sharing a boundary segment of positive length."""
    shared = a.polygon.boundary.intersection(b.polygon.boundary)
    if shared.is_empty or shared.length <= GEOMETRIC_TOLERANCE:
        raise GeometryError("regions not adjacent", code="regions_not_adjacent")
    merged = unary_union([a.polygon, b.polygon])
    if not isinstance(merged, Polygon):
        raise GeometryError("regions not adjacent", code="regions_not_adjacent")
    if merged.interiors:
        raise GeometryError("merge would create hole", code="merge_would_create_hole")
    merged_id = "+".join(sorted([a.id, b.id]))
    return Region(np.asarray(merged.exterior.coords), merged_id)
