"""The seven clustering engines for fixed-length daily series."""
from .density import dbscan_fit, default_eps, optics_fit, reachability_valleys
from .hierarchical import ward_fit, ward_linkage
from .model import (
    Algorithm,
    ClusterModel,
    ClusterSummary,
    cluster_summary,
    compact_labels,
    write_mean_curve_csv,
)
from .partition import kernel_kmeans_fit, kmeans_fit, kshape_fit
from .som import SomGrid, som_fit, som_grid_size

__all__ = [
    "Algorithm", "ClusterModel", "ClusterSummary", "SomGrid", "cluster_summary", "compact_labels",
    "dbscan_fit", "default_eps", "fit", "kernel_kmeans_fit", "kmeans_fit", "kshape_fit",
    "optics_fit", "reachability_valleys", "som_fit", "som_grid_size", "ward_fit", "ward_linkage",
    "write_mean_curve_csv",
]


def fit(algorithm, X, *, k=None, seed=0, eps=None, min_pts=5, gamma=None, grid=None,
        num_users=None, iterations=10_000) -> ClusterModel:
    """Dispatch by algorithm name with the library defaults.

    SOM uses ``grid`` when given, else a square grid sized from
    ``num_users`` (falling back to the number of series).
    """
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.KMEANS:
        return kmeans_fit(X, k, seed=seed)
    if algorithm is Algorithm.KSHAPE:
        return kshape_fit(X, k, seed=seed)
    if algorithm is Algorithm.KERNEL_KMEANS:
        return kernel_kmeans_fit(X, k, gamma=gamma, seed=seed)
    if algorithm is Algorithm.DBSCAN:
        return dbscan_fit(X, eps=eps, min_pts=min_pts)
    if algorithm is Algorithm.OPTICS:
        return optics_fit(X, min_pts=min_pts, eps=eps)
    if algorithm is Algorithm.WARD:
        return ward_fit(X, k)
    if grid is None:
        grid = SomGrid.for_users(num_users or len(X), iterations=iterations)
    return som_fit(X, grid, seed=seed)
