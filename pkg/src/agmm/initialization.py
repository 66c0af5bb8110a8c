"""Initial turn counts from density-based clustering.

Wrapped data falls apart into disconnected pieces in the ``(x, theta)``
plane.  The pieces are found with DBSCAN; each piece then receives an
integer offset ``s_k`` chosen so that the unwrapped response is continuous
across the closest pair of points between neighbouring pieces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .core import TWO_PI, Basis, Dataset, ParametricAgmm, hard_responsibilities
from .errors import InitFailureError, InvalidArgumentError, SingularDesignError

DEFAULT_EPS = 0.3
DEFAULT_MIN_PTS = 4


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster label per point; 0 marks noise, clusters are 1..num_clusters."""

    labels: np.ndarray
    num_clusters: int

    def members(self, c) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


def _features(data: Dataset, standardize: bool) -> np.ndarray:
    feats = np.column_stack([data.xs, data.thetas])
    if standardize:
        sd = feats.std(axis=0, ddof=1) if data.n > 1 else np.ones(feats.shape[1])
        sd[~(sd > 0)] = 1.0
        feats = (feats - feats.mean(axis=0)) / sd
    return feats


def density_cluster(data: Dataset, eps: float = DEFAULT_EPS, min_pts: int = DEFAULT_MIN_PTS,
                    standardize: bool = True) -> ClusterAssignment:
    """DBSCAN on the stacked vectors ``(x_i, theta_i)``.

    Each coordinate is scaled to unit sample standard deviation first (unless
    ``standardize=False``), so ``eps`` is in standard-deviation units.  A
    point is a core point when its eps-ball, itself included, holds at least
    ``min_pts`` points.  Clusters are numbered in order of discovery.
    """
    if not eps > 0:
        raise InvalidArgumentError("eps must be positive")
    if min_pts < 1:
        raise InvalidArgumentError("min_pts must be >= 1")
    feats = _features(data, standardize)
    neighbours = cKDTree(feats).query_ball_point(feats, r=eps)
    core = np.array([len(nb) >= min_pts for nb in neighbours])

    labels = np.zeros(data.n, dtype=int)
    visited = np.zeros(data.n, dtype=bool)
    c = 0
    for i in range(data.n):
        if visited[i] or not core[i]:
            continue
        c += 1
        visited[i] = True
        labels[i] = c
        stack = [i]
        while stack:
            j = stack.pop()
            for nb in neighbours[j]:
                if labels[nb] == 0:
                    labels[nb] = c
                if core[nb] and not visited[nb]:
                    visited[nb] = True
                    stack.append(nb)
    if c == 0:
        raise InitFailureError(
            f"all {data.n} points classified as noise (eps={eps}, min_pts={min_pts}); "
            "increase eps or decrease min_pts")
    return ClusterAssignment(labels, c)


def attach_noise(clusters: ClusterAssignment, data: Dataset,
                 standardize: bool = True) -> ClusterAssignment:
    """Give every noise point the label of the nearest clustered point."""
    labels = clusters.labels.copy()
    noise = np.flatnonzero(labels == 0)
    if noise.size == 0:
        return clusters
    feats = _features(data, standardize)
    clustered = np.flatnonzero(labels > 0)
    nearest = cdist(feats[noise], feats[clustered]).argmin(axis=1)
    labels[noise] = labels[clustered[nearest]]
    return ClusterAssignment(labels, clusters.num_clusters)


def cluster_gap(a, b, data: Dataset):
    """Closest pair between two index sets, measured on the predictors only.

    Returns ``(distance, i, j)`` with ``i`` from ``a`` and ``j`` from ``b``;
    among tied pairs the one with the smallest ``(i, j)`` wins.
    """
    a = np.sort(np.asarray(a, dtype=int))
    b = np.sort(np.asarray(b, dtype=int))
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("cluster_gap needs two non-empty clusters")
    d = cdist(data.xs[a], data.xs[b])
    ia, jb = np.unravel_index(np.argmin(d), d.shape)  # row-major: lowest (i, j) first
    return float(d[ia, jb]), int(a[ia]), int(b[jb])


def assign_offsets(clusters: ClusterAssignment, data: Dataset) -> np.ndarray:
    """Integer turn count per point, normalised so that ``min(z) == 1``.

    Clusters are visited greedily: starting from cluster 1, the next cluster
    is always the unvisited one closest (in x) to any visited cluster, and it
    takes its offset from that nearest visited cluster ``k*``::

        s_k = s_k* + round((theta_j - theta_i) / 2pi)

    where ``(i, j)`` is the closest pair between the two clusters.  Noise
    points (label 0) take no part in the cluster gaps.  Each one gets its
    own offset from the same rounding rule against its nearest clustered
    point in x, which keeps short pieces at the ends of the range (too small
    to form a cluster) on the right turn.
    """
    labels = np.asarray(clusters.labels)
    if clusters.num_clusters < 1 or not np.any(labels > 0):
        raise InvalidArgumentError("need at least one cluster")
    members = {c: clusters.members(c) for c in range(1, clusters.num_clusters + 1)}
    members = {c: m for c, m in members.items() if m.size}
    first = min(members)
    s = {first: 0}
    pending = set(members) - {first}
    gaps = {}
    while pending:
        best = None
        for k in sorted(pending):
            for kk in sorted(s):
                if (k, kk) not in gaps:
                    gaps[(k, kk)] = cluster_gap(members[k], members[kk], data)
                key = (gaps[(k, kk)][0], k, kk)
                if best is None or key < best:
                    best = key
        _, k, kstar = best
        _, i_k, j_kstar = gaps[(k, kstar)]
        s[k] = s[kstar] + _turns(data.thetas[j_kstar] - data.thetas[i_k])
        pending.remove(k)
    z = np.zeros(data.n, dtype=int)
    for c, m in members.items():
        z[m] = s[c]
    noise = np.flatnonzero(labels == 0)
    if noise.size:
        clustered = np.flatnonzero(labels > 0)
        j = clustered[cdist(data.xs[noise], data.xs[clustered]).argmin(axis=1)]
        z[noise] = z[j] + _turns(data.thetas[j] - data.thetas[noise])
    return z - z.min() + 1


def _turns(dtheta):
    return np.round(np.asarray(dtheta) / TWO_PI).astype(int)


def init_parameters(data: Dataset, z, basis: Basis) -> ParametricAgmm:
    """One hard-assignment M-step: ``psi_ik = 1`` iff ``z_i = k``."""
    from .em_parametric import m_step
    z = np.asarray(z, dtype=int)
    if z.shape[0] != data.n or z.min() < 1:
        raise InvalidArgumentError("z must hold one positive label per observation")
    try:
        return m_step(data, hard_responsibilities(z), basis)
    except SingularDesignError as exc:
        raise InitFailureError(
            f"initial M-step failed ({exc}); try a lower basis degree") from exc


def initial_labels(data: Dataset, eps: float = DEFAULT_EPS,
                   min_pts: int = DEFAULT_MIN_PTS) -> np.ndarray:
    """Cluster and assign offsets in one call."""
    return assign_offsets(density_cluster(data, eps, min_pts), data)
