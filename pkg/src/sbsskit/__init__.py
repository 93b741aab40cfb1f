"""Workbench for selecting spatial blind source separation tuning parameters."""

from .errors import DataError, EstimationError, GeometryError, SbssError
from .model import (
    GEOMETRIC_TOLERANCE,
    KernelConfig,
    KernelRing,
    ParameterSetting,
    Region,
    Regionalization,
    SpatialDataset,
    ValidationReport,
    assign_locations,
    locations_by_region,
    setting_from_json,
    setting_to_json,
    validate_kernel,
    validate_regionalization,
)
from .geometry import (
    grid_partition,
    merge_regions,
    pairwise_distances,
    split_region,
    voronoi_adjacency,
    voronoi_cells,
)
from .core import (
    SbssResult,
    SpatialBSS,
    eigenvalue_difference,
    joint_diagonalize,
    local_covariance,
    mean_neighbourhood_size,
    neighbourhood_matrix,
    region_covariance,
    run_sbss,
    whiten,
)
from .regionalize import (
    CovarianceRegionalization,
    covariance_regionalization,
    edge_distance,
    labels_to_regionalization,
    region_heterogeneity,
)
from .guidance import (
    GuidanceBundle,
    GuidanceParams,
    VariogramSet,
    compute_guidance,
    distance_density,
    default_max_radius,
    kernel_suggestions,
    kernel_location_counts,
    region_cov_difference,
    region_location_counts,
    setting_metrics,
    variable_grid_summary,
    variograms,
)
from .workspace import Workspace, export_result, ingest_csv, project_lonlat

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "EstimationError",
    "GeometryError",
    "SbssError",
    "GEOMETRIC_TOLERANCE",
    "KernelConfig",
    "KernelRing",
    "ParameterSetting",
    "Region",
    "Regionalization",
    "SpatialDataset",
    "ValidationReport",
    "assign_locations",
    "locations_by_region",
    "setting_from_json",
    "setting_to_json",
    "validate_kernel",
    "validate_regionalization",
    "grid_partition",
    "merge_regions",
    "pairwise_distances",
    "split_region",
    "voronoi_adjacency",
    "voronoi_cells",
    "SbssResult",
    "SpatialBSS",
    "eigenvalue_difference",
    "joint_diagonalize",
    "local_covariance",
    "mean_neighbourhood_size",
    "neighbourhood_matrix",
    "region_covariance",
    "run_sbss",
    "whiten",
    "CovarianceRegionalization",
    "covariance_regionalization",
    "edge_distance",
    "labels_to_regionalization",
    "region_heterogeneity",
    "GuidanceBundle",
    "GuidanceParams",
    "VariogramSet",
    "compute_guidance",
    "distance_density",
    "default_max_radius",
    "kernel_suggestions",
    "kernel_location_counts",
    "region_cov_difference",
    "region_location_counts",
    "setting_metrics",
    "variable_grid_summary",
    "variograms",
    "Workspace",
    "export_result",
    "ingest_csv",
    "project_lonlat",
]
