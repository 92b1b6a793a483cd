"""On-demand crisp clustering of the structure store.

Structures are grouped with DBSCAN under the typicality-derived structure
distance; stream points (or grid points) are then labeled by their
nearest structure under the squared-typicality decision distance. Noise
structures keep unique singleton cluster ids so that every structure, and
therefore every point, always has a label.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .engine import SpcModel
from .typicality import Structure, _typicality_of_dsq, _typicality_of_dsq_many
from . import linalg


@dataclass
class ClusterLabels:
    """Map from structure identifier to cluster id; ids dense from 0."""

    labels: dict[int, int]

    @property
    def n_clusters(self) -> int:
        return len(set(self.labels.values()))


def dbscan(items, dist, epsilon: float, min_pts: int) -> list[int]:
    """Classic DBSCAN over an explicit item list and distance function.

    An item is a core point when at least min_pts items (itself included)
    lie within epsilon. Clusters are the maximal density-connected sets;
    border items join the first core cluster that reaches them in scan
    order (scan order is item order). Instead of one shared noise label,
    each unreachable item gets its own fresh cluster id after the dense
    cluster ids.
    """
    n = len(items)
    if n == 0:
        return []
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = dist(items[i], items[j])
    return labels_from_distances(d, epsilon, min_pts)


def labels_from_distances(d: np.ndarray, epsilon: float, min_pts: int) -> list[int]:
    """DBSCAN given a precomputed symmetric distance matrix."""
    n = d.shape[0]
    neighbors = [np.flatnonzero(d[i] <= epsilon) for i in range(n)]
    is_core = [len(nb) >= min_pts for nb in neighbors]

    labels = [-1] * n
    visited = [False] * n
    cluster = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if not is_core[i]:
            continue  # provisional noise; a later cluster may claim it as border
        labels[i] = cluster
        seeds = deque(neighbors[i])
        while seeds:
            j = seeds.popleft()
            if not visited[j]:
                visited[j] = True
                if is_core[j]:
                    seeds.extend(neighbors[j])
            if labels[j] == -1:
                labels[j] = cluster
        cluster += 1

    for i in range(n):
        if labels[i] == -1:
            labels[i] = cluster
            cluster += 1
    return labels


def get_clustering(model: SpcModel) -> ClusterLabels:
    """Cluster the model's structures with DBSCAN over the structure distance."""
    structures = model.snapshot()
    if not structures:
        raise ValueError("model holds no structures to cluster")
    params = model.params
    ids = model.ids()
    d = pairwise_structure_distances(structures, params.m)
    labels = labels_from_distances(d, params.epsilon, params.min_pts)
    return ClusterLabels(labels=dict(zip(ids, labels)))


def pairwise_structure_distances(structures, m: float) -> np.ndarray:
    """Symmetric structure-distance matrix, factoring each spread once.

    Same arithmetic as structure_distance pair by pair; only the Cholesky
    factor of each structure is reused across the row.
    """
    n = len(structures)
    chols = [linalg.cholesky(s.sigma) for s in structures]
    d_sq = np.zeros((n, n))
    for i, s in enumerate(structures):
        for j in range(n):
            if i == j:
                continue
            delta = structures[j].mu - s.mu
            d_sq[i, j] = linalg.solve_norm_sq(chols[i], delta) if np.any(delta) else 0.0
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            u_ij = _typicality_of_dsq(d_sq[i, j], m)
            u_ji = _typicality_of_dsq(d_sq[j, i], m)
            dist[i, j] = dist[j, i] = 1.0 - u_ij * u_ji
    return dist


def assign_points(model: SpcModel, labels: ClusterLabels, points) -> list[int]:
    """Cluster id of the nearest structure for each point.

    Nearest under the decision distance, which favors structures with
    large covariance reach in the far field; ties go to the lowest
    structure identifier.
    """
    cluster_ids, _, _ = assign_with_distances(model, labels, points)
    return cluster_ids.tolist()


def assign_with_distances(model: SpcModel, labels: ClusterLabels, points):
    """Vectorized assignment returning (cluster_ids, structure_ids, distances)."""
    structures = model.snapshot()
    ids = model.ids()
    if not structures:
        raise ValueError("model holds no structures")
    for ident in ids:
        if ident not in labels.labels:
            raise KeyError(f"labels missing structure {ident}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    m = model.params.m

    dist = np.empty((len(structures), pts.shape[0]))
    for row, s in enumerate(structures):
        dist[row] = _decision_distance_many(s, pts, m)
    # argmin returns the first minimum, and rows are in ascending-id order,
    # so ties resolve to the lowest identifier.
    nearest = np.argmin(dist, axis=0)
    id_arr = np.asarray(ids)
    label_arr = np.asarray([labels.labels[i] for i in ids])
    return (
        label_arr[nearest],
        id_arr[nearest],
        dist[nearest, np.arange(pts.shape[0])],
    )


def _decision_distance_many(s: Structure, pts: np.ndarray, m: float) -> np.ndarray:
    deltas = pts - s.mu
    zero_rows = ~np.any(deltas, axis=1)
    if zero_rows.all():
        d_sq = np.zeros(pts.shape[0])
    else:
        d_sq = linalg.solve_norm_sq_many(linalg.cholesky(s.sigma), deltas)
        d_sq[zero_rows] = 0.0
    u = _typicality_of_dsq_many(d_sq, m)
    return 1.0 - u * u
