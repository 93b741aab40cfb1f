"""Covariance machinery and the spatial blind source separation estimator.

The estimator whitens the data with the global covariance, builds one local
covariance matrix per (region, ring) pair, and jointly diagonalizes the
whitened set with Jacobi rotations. Rows of the resulting unmixing matrix map
observed variables to latent components that are uncorrelated and spatially
uncorrelated under the chosen kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_coords, check_values
from .errors import EstimationError
from .model import (
    KernelConfig,
    KernelRing,
    ParameterSetting,
    Regionalization,
    SpatialDataset,
    assign_locations,
)

#: Largest acceptable condition number of the global covariance.
MAX_COVARIANCE_CONDITION = 1e12

#: Jacobi sweep convergence threshold on the largest rotation angle.
JACOBI_ANGLE_TOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def neighbourhood_matrix(coords, ring: KernelRing) -> np.ndarray:
    """0/1 matrix marking location pairs whose distance lies in the ring.

    Entry (i, j) is 1 iff ``inner <= d_ij <= outer``; self pairs are always
    excluded, so the diagonal is zero even for rings with inner radius 0.
    """
    coords = check_coords(coords)
    d = cdist(coords, coords)
    k = ring.contains_distance(d).astype(np.float64)
    np.fill_diagonal(k, 0.0)
    return k


def mean_neighbourhood_size(k: np.ndarray) -> float:
    """Mean of the column sums of a neighbourhood matrix."""
    k = np.asarray(k, dtype=np.float64)
    if k.size == 0:
        return 0.0
    return float(k.sum() / k.shape[0])


def region_covariance(values) -> np.ndarray:
    """Sample covariance of the rows with divisor n (not n-1)."""
    values = check_values(values)
    if values.shape[0] < 2:
        raise EstimationError(
            "region too small for covariance", code="region_too_small"
        )
    centered = values - values.mean(axis=0)
    return centered.T @ centered / values.shape[0]


def local_covariance(
    coords, values, ring: KernelRing, *, normalization: str = "locations"
) -> np.ndarray:
    """Symmetrized average of cross-location centered outer products.

    Pairs are selected by the ring within the given (region-local) locations.
    ``normalization`` divides by the location count (default) or by the
    number of selected pairs (``"pairs"``). An empty neighbourhood yields the
    zero matrix; interpreting that is up to the caller.
    """
    coords = check_coords(coords)
    values = check_values(values, n_locations=coords.shape[0])
    n_r = coords.shape[0]
    if normalization not in ("locations", "pairs"):
        raise ValueError(f"unknown normalization {normalization!r}")
    k = neighbourhood_matrix(coords, ring)
    centered = values - values.mean(axis=0)
    raw = centered.T @ k @ centered
    if normalization == "pairs":
        n_pairs = k.sum()
        if n_pairs == 0.0:
            return np.zeros((values.shape[1], values.shape[1]))
        raw = raw / n_pairs
    else:
        raw = raw / n_r
    return 0.5 * (raw + raw.T)


@dataclass
class Whitening:
    """Global whitening: ``transform`` is the symmetric inverse square root
    of the covariance, ``centered`` the mean-removed data."""

    transform: np.ndarray
    centered: np.ndarray
    mean: np.ndarray
    covariance: np.ndarray

    def __iter__(self):
        return iter((self.transform, self.centered))


def whiten(values) -> Whitening:
    """Compute the whitening transform Cov^(-1/2) and centered data.

    Raises when the covariance is numerically singular (condition number
    above 1e12), naming the smallest eigenvalue.
    """
    values = check_values(values)
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / values.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    smallest = float(eigvals[0])
    if smallest <= 0.0 or eigvals[-1] / smallest > MAX_COVARIANCE_CONDITION:
        raise EstimationError(
            f"collinear variables; whitening unstable (smallest eigenvalue {smallest:.3e})",
            code="collinear_variables",
        )
    transform = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    return Whitening(transform=transform, centered=centered, mean=mean, covariance=cov)


@dataclass
class JointDiagResult:
    """Orthogonal rotation and per-sweep convergence diagnostics."""

    rotation: np.ndarray
    off_criterion: list[float] = field(default_factory=list)
    sweeps: int = 0
    converged: bool = True

    @property
    def warning(self) -> bool:
        return not self.converged


def _off_criterion(matrices: np.ndarray) -> float:
    off = matrices.copy()
    p = matrices.shape[1]
    off[:, np.arange(p), np.arange(p)] = 0.0
    return float(np.sum(off**2))


def joint_diagonalize(
    matrices,
    *,
    angle_tol: float = JACOBI_ANGLE_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> JointDiagResult:
    """Approximate joint diagonalization of symmetric matrices.

    Jacobi rotations over all index pairs; the returned orthogonal U
    maximizes the summed squared diagonals of ``U M_k U^T``, equivalently
    minimizes the total off-diagonal mass, which is non-increasing across
    sweeps. Stops when the largest rotation angle in a sweep drops below
    ``angle_tol``; exceeding ``max_sweeps`` returns with ``converged=False``.
    """
    a = np.array(matrices, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or a.shape[0] == 0 or a.shape[1] != a.shape[2]:
        raise ValueError("expected a non-empty sequence of square matrices")
    for idx, m in enumerate(a):
        if not np.allclose(m, m.T, atol=1e-10 * max(1.0, np.abs(m).max()), rtol=0.0):
            raise ValueError(f"matrix {idx} is not symmetric")
    p = a.shape[1]
    u = np.eye(p)
    result = JointDiagResult(rotation=u, off_criterion=[_off_criterion(a)])
    if p == 1:
        return result

    for sweep in range(1, max_sweeps + 1):
        max_angle = 0.0
        for i in range(p - 1):
            for j in range(i + 1, p):
                h_diag = a[:, i, i] - a[:, j, j]
                h_off = a[:, i, j] + a[:, j, i]
                ton = h_diag @ h_diag - h_off @ h_off
                toff = 2.0 * (h_diag @ h_off)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                max_angle = max(max_angle, abs(theta))
                if theta == 0.0:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                rot_i = c * a[:, :, i] + s * a[:, :, j]
                rot_j = -s * a[:, :, i] + c * a[:, :, j]
                a[:, :, i], a[:, :, j] = rot_i, rot_j
                rot_i = c * a[:, i, :] + s * a[:, j, :]
                rot_j = -s * a[:, i, :] + c * a[:, j, :]
                a[:, i, :], a[:, j, :] = rot_i, rot_j
                col_i = c * u[:, i] + s * u[:, j]
                col_j = -s * u[:, i] + c * u[:, j]
                u[:, i], u[:, j] = col_i, col_j
        result.sweeps = sweep
        result.off_criterion.append(_off_criterion(a))
        if max_angle < angle_tol:
            break
    else:
        result.converged = False

    # u accumulates column rotations so that a_orig = u @ a_diag @ u.T;
    # return the transposed convention with U M U^T (nearly) diagonal.
    result.rotation = u.T
    return result


def eigenvalue_difference(lcov: np.ndarray, whitening: Whitening) -> float:
    """Sum of squared pairwise eigenvalue gaps of a whitened local covariance."""
    s = whitening.transform
    m = s @ np.asarray(lcov, dtype=np.float64) @ s.T
    m = 0.5 * (m + m.T)
    eigvals = np.linalg.eigvalsh(m)
    diffs = eigvals[:, None] - eigvals[None, :]
    return float(np.sum(np.triu(diffs, k=1) ** 2))


@dataclass
class SbssResult:
    """Unmixing matrix, latent scores, and diagonalization diagnostics."""

    unmixing: np.ndarray
    latent_scores: np.ndarray
    pseudo_eigenvalues: np.ndarray
    component_order: list[int]
    diagnostics: dict
    mean: np.ndarray
    matrix_labels: list[str]


class SpatialBSS(BaseEstimator, TransformerMixin):
    """Spatial blind source separation via joint diagonalization.

    Parameters
    ----------
    kernel : KernelConfig or sequence of (inner, outer) pairs
        Ring kernel evaluated at every location.
    regionalization : Regionalization, array of labels, or None
        Partition modelling non-stationarity. ``None`` treats the whole
        domain as a single region. An array assigns a region label per
        location directly.
    normalization : {"locations", "pairs"}
        Divisor convention for local covariance matrices.

    Attributes
    ----------
    unmixing_ : ndarray, shape (p, p)
        Rows map observed variables to latent components; satisfies
        ``W Cov W^T = I``.
    scores_ : ndarray, shape (n, p)
        Latent scores at the fitted locations.
    pseudo_eigenvalues_ : ndarray, shape (n_matrices, p)
        Diagonal values of each diagonalized local covariance, in component
        order.
    diagnostics_ : dict
        Off-diagonal criterion per sweep, sweep count, convergence flag.
    """

    def __init__(self, kernel=((0.0, 1.0),), regionalization=None, normalization="locations"):
        self.kernel = kernel
        self.regionalization = regionalization
        self.normalization = normalization

    def _resolve_kernel(self) -> KernelConfig:
        if isinstance(self.kernel, KernelConfig):
            return self.kernel
        return KernelConfig(self.kernel)

    def _resolve_labels(self, coords) -> list:
        if self.regionalization is None:
            return ["all"] * coords.shape[0]
        if isinstance(self.regionalization, Regionalization):
            return assign_locations(self.regionalization, coords)
        labels = list(self.regionalization)
        if len(labels) != coords.shape[0]:
            raise ValueError("label array length does not match location count")
        return labels

    def fit(self, X, y=None, *, coords=None, dataset: SpatialDataset | None = None):
        """Fit the unmixing matrix.

        Either pass ``X`` (n x p values) together with ``coords`` (n x 2), or
        a :class:`SpatialDataset` via ``dataset`` (then ``X`` may be None).
        """
        if dataset is not None:
            values = dataset.values
            coords = dataset.locations
        else:
            if coords is None:
                raise ValueError("coords are required when no dataset is given")
            coords = check_coords(coords)
            values = check_values(X, n_locations=coords.shape[0])

        kernel = self._resolve_kernel()
        labels = self._resolve_labels(coords)

        whitening = whiten(values)
        s = whitening.transform

        matrices = []
        matrix_labels = []
        unique_labels = sorted(set(labels), key=str)
        label_arr = np.asarray(labels, dtype=object)
        for region_label in unique_labels:
            idx = np.flatnonzero(label_arr == region_label)
            for ring_idx, ring in enumerate(kernel.rings):
                lcov = local_covariance(
                    coords[idx],
                    values[idx],
                    ring,
                    normalization=self.normalization,
                )
                m = s @ lcov @ s.T
                matrices.append(0.5 * (m + m.T))
                matrix_labels.append(f"{region_label}:ring{ring_idx}")
        stacked = np.array(matrices)
        # whitened local covariances are scale-free, so an absolute threshold works
        if not matrices or np.abs(stacked).max() <= 1e-12:
            raise EstimationError(
                "no informative local covariance",
                code="no_informative_local_covariance",
            )

        diag = joint_diagonalize(stacked)
        u = diag.rotation
        diagonals = np.einsum("ij,kjl,ml->kim", u, stacked, u)
        pseudo = np.einsum("kii->ki", diagonals).copy()

        order = np.argsort(-np.sum(pseudo**2, axis=0), kind="stable")
        w = u[order] @ s
        # deterministic sign: the largest-magnitude loading of each row is positive
        max_idx = np.argmax(np.abs(w), axis=1)
        signs = np.sign(w[np.arange(w.shape[0]), max_idx])
        signs[signs == 0.0] = 1.0
        w = w * signs[:, None]

        self.unmixing_ = w
        self.mean_ = whitening.mean
        self.covariance_ = whitening.covariance
        self.whitening_ = whitening
        self.component_order_ = [int(i) for i in order]
        self.pseudo_eigenvalues_ = pseudo[:, order]
        self.matrix_labels_ = matrix_labels
        self.diagnostics_ = {
            "off_criterion": [float(v) for v in diag.off_criterion],
            "sweeps": diag.sweeps,
            "converged": diag.converged,
            "n_matrices": len(matrices),
        }
        self.scores_ = (values - self.mean_) @ w.T
        return self

    def transform(self, X) -> np.ndarray:
        """Latent scores for rows of X using the fitted unmixing matrix."""
        values = check_values(X)
        return (values - self.mean_) @ self.unmixing_.T

    def fit_transform(self, X, y=None, **fit_params) -> np.ndarray:
        self.fit(X, y, **fit_params)
        return self.scores_


def run_sbss(
    dataset: SpatialDataset,
    setting: ParameterSetting,
    *,
    normalization: str = "locations",
) -> SbssResult:
    """Run the full estimator for a parameter setting on a dataset."""
    est = SpatialBSS(
        kernel=setting.kernel,
        regionalization=setting.regionalization,
        normalization=normalization,
    )
    est.fit(None, dataset=dataset)
    return SbssResult(
        unmixing=est.unmixing_,
        latent_scores=est.scores_,
        pseudo_eigenvalues=est.pseudo_eigenvalues_,
        component_order=est.component_order_,
        diagnostics=est.diagnostics_,
        mean=est.mean_,
        matrix_labels=est.matrix_labels_,
    )
