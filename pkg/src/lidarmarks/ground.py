"""Road-surface isolation: plane RANSAC, surface normals, region growing.

The plane is found by sampling 3-point hypotheses, scoring by inlier count
at a fixed distance threshold, then least-squares refitting on the best
consensus. Region growing then splits the plane inliers into smooth
clusters using per-point normals and curvature, and the cluster whose
member sits closest to the sensor's nadir footprint is taken as the road.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import IndexMask, PointCloud
from .errors import ConfigError, DegenerateInputError, StructuralError


@dataclass(frozen=True)
class PlaneModel:
    """Plane a*x + b*y + c*z + d = 0 with unit normal (a, b, c)."""

    a: float
    b: float
    c: float
    d: float
    inliers: IndexMask
    iterations: int

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        return np.abs(xyz @ self.normal + self.d)


@dataclass
class SurfaceNormal:
    """Per-point unit normals with surface-variation curvature.

    ``curvature`` is lambda_min / (lambda1 + lambda2 + lambda3) of the
    k-neighborhood covariance, hence in [0, 1/3]. ``degenerate`` flags
    coincident neighborhoods where the normal is arbitrary. ``neighbors``
    is the (n, k) nearest-neighbor index table reused by region growing.
    """

    normals: np.ndarray
    curvature: np.ndarray
    degenerate: np.ndarray
    k: int
    neighbors: np.ndarray


@dataclass(frozen=True)
class RegionParams:
    k_neighbors: int = 30
    th_angle_deg: float = 2.0
    th_curve: float = 1.0

    def __post_init__(self):
        if self.k_neighbors < 3:
            raise ConfigError("k_neighbors must be at least 3")
        if not 0.0 < self.th_angle_deg < 90.0:
            raise ConfigError("th_angle_deg must be inside (0, 90)")
        if self.th_curve <= 0:
            raise ConfigError("th_curve must be positive")


@dataclass
class Cluster:
    mask: IndexMask
    seed: int
    mean_normal: np.ndarray


def _canonical_plane(n: np.ndarray, d: float):
    # Deterministic global sign: origin side positive, then lexicographic.
    if d < 0 or (d == 0 and (n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))))):
        n, d = -n, -d
    return n, d


def fit_plane_ransac(cloud: PointCloud, th_plane: float = 0.30, max_iter: int = 200,
                     rng_seed: int = 0) -> PlaneModel:
    """Largest-consensus plane at |distance| <= th_plane, refit on inliers.

    Per-iteration sample indices come from generators seeded with
    (rng_seed, iteration), so results are reproducible and iterations are
    independent. The returned inlier mask is recomputed from the refit
    coefficients, never carried over from the winning hypothesis.
    """
    pts = cloud.xyz()
    ok = cloud.valid
    n = int(ok.sum())
    if n < 3:
        raise DegenerateInputError(f"plane fit needs at least 3 valid points, got {n}")
    valid_idx = np.nonzero(ok)[0]
    P = pts[valid_idx]
    scale = max(1.0, float(np.abs(P).max()))
    best_count = -1
    best_sample = None
    for it in range(max_iter):
        rng = np.random.default_rng([rng_seed, it])
        sample = rng.choice(n, 3, replace=False)
        p0, p1, p2 = P[sample]
        normal = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(normal)
        if norm < 1e-12 * scale * scale:
            continue
        normal = normal / norm
        d = -normal @ p0
        count = int((np.abs(P @ normal + d) <= th_plane).sum())
        if count > best_count:
            best_count = count
            best_sample = (normal, d)
    if best_sample is None:
        raise DegenerateInputError("all sampled point triples were collinear")
    normal, d = best_sample
    consensus = np.abs(P @ normal + d) <= th_plane
    Q = P[consensus]
    centroid = Q.mean(axis=0)
    C = Q - centroid
    cov = C.T @ C
    w, v = np.linalg.eigh(cov)
    refit_n = v[:, 0]
    refit_d = float(-refit_n @ centroid)
    refit_n, refit_d = _canonical_plane(refit_n, refit_d)
    dist = np.abs(P @ refit_n + refit_d)
    inl = valid_idx[dist <= th_plane]
    return PlaneModel(
        float(refit_n[0]), float(refit_n[1]), float(refit_n[2]), refit_d,
        IndexMask(inl, len(cloud), cloud.frame_id), max_iter,
    )


def estimate_normals(cloud: PointCloud, k: int = 30) -> SurfaceNormal:
    """Smallest-eigenvector normals of the k-neighborhood covariance.

    Normals are flipped to face the sensor origin. Raises on clouds with
    fewer than k valid points.
    """
    ok = cloud.valid
    n_valid = int(ok.sum())
    if n_valid < k:
        raise DegenerateInputError(f"normal estimation needs >= {k} points, got {n_valid}")
    n = len(cloud)
    pts = cloud.xyz()
    valid_idx = np.nonzero(ok)[0]
    P = pts[valid_idx]
    tree = cKDTree(P)
    _, nb_local = tree.query(P, k=k, workers=-1)
    if k == 1:
        nb_local = nb_local[:, None]
    g = P[nb_local]
    # scatter = E[g g^T] - k * mean mean^T, avoiding a centered copy of g
    scatter = g.transpose(0, 2, 1) @ g
    m = g.mean(axis=1)
    cov = scatter - k * (m[:, :, None] * m[:, None, :])
    w, v = np.linalg.eigh(cov)
    w = np.maximum(w, 0.0)
    trace = w.sum(axis=1)
    degen = trace <= 1e-18
    curv = np.zeros(len(P))
    np.divide(w[:, 0], trace, out=curv, where=~degen)
    np.clip(curv, 0.0, None, out=curv)
    nrm = v[:, :, 0].copy()
    nrm[degen] = (0.0, 0.0, 1.0)
    flip = np.einsum("ni,ni->n", nrm, P) > 0
    nrm[flip] *= -1.0

    normals = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
    curvature = np.zeros(n)
    degenerate = np.ones(n, dtype=bool)
    neighbors = np.full((n, k), -1, dtype=np.int64)
    normals[valid_idx] = nrm
    curvature[valid_idx] = curv
    degenerate[valid_idx] = degen
    neighbors[valid_idx] = valid_idx[nb_local]
    return SurfaceNormal(normals, curvature, degenerate, k, neighbors)


def region_grow(cloud: PointCloud, normals: SurfaceNormal,
                params: RegionParams = RegionParams()) -> list[Cluster]:
    """Partition the cloud into smooth regions.

    Seeds are visited in ascending-curvature order. A neighbor joins the
    region when the angle between its normal and the growing point's
    normal is below th_angle_deg and their curvature difference is below
    th_curve; joined points whose own curvature is below th_curve keep
    growing the region.
    """
    n = len(cloud)
    if normals.normals.shape[0] != n:
        raise StructuralError("normals were computed for a different cloud")
    if n == 0:
        return []
    nrm = normals.normals
    curv = normals.curvature
    nb = normals.neighbors
    cos_th = np.cos(np.radians(params.th_angle_deg))
    # evaluate the link predicate for every directed k-NN edge up front
    safe_nb = np.maximum(nb, 0)
    dots = (nrm[safe_nb] @ nrm[:, :, None])[:, :, 0]
    curv_diff = np.abs(curv[safe_nb] - curv[:, None])
    edge_ok = (nb >= 0) & (dots > cos_th) & (curv_diff < params.th_curve)
    seedable = curv < params.th_curve

    order = np.argsort(curv, kind="stable")
    assigned = ~cloud.valid  # invalid points never join a cluster
    clusters: list[Cluster] = []
    for seed in order:
        if assigned[seed]:
            continue
        assigned[seed] = True
        members = [np.array([seed], dtype=np.int64)]
        frontier = members[0]
        while frontier.size:
            dst = nb[frontier].reshape(-1)[edge_ok[frontier].reshape(-1)]
            dst = dst[~assigned[dst]]
            if dst.size == 0:
                break
            new = np.unique(dst)
            assigned[new] = True
            members.append(new)
            frontier = new[seedable[new]]
        idx = np.sort(np.concatenate(members))
        mean_n = nrm[idx].mean(axis=0)
        norm = np.linalg.norm(mean_n)
        mean_n = mean_n / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        clusters.append(Cluster(IndexMask(idx, n, cloud.frame_id), int(seed), mean_n))
    return clusters


def select_road_cluster(clusters: list[Cluster], cloud: PointCloud) -> IndexMask:
    """The cluster holding the point nearest the sensor's nadir footprint.

    Nearness is horizontal distance to the point directly below the
    sensor. Ties fall back to the largest cluster.
    """
    if not clusters:
        raise StructuralError("no clusters to select from")
    rho2 = cloud.x ** 2 + cloud.y ** 2
    best = None
    best_key = None
    for c in clusters:
        if len(c.mask) == 0:
            continue
        key = (float(rho2[c.mask.indices].min()), -len(c.mask))
        if best_key is None or key < best_key:
            best_key = key
            best = c
    if best is None:
        raise StructuralError("all clusters are empty")
    return best.mask
