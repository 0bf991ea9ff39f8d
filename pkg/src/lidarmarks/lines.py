"""Sequential RANSAC line extraction over road-marking candidates.

One line is fit at a time; its supporting points are removed and the
search repeats until the line budget is exhausted, the latest line is
under-supported, or fewer than two points remain. Under-supported lines
are kept in the output with ``accepted=False`` so downstream consumers
can inspect what was rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import ConfigError
from .ground import PlaneModel


@dataclass(frozen=True)
class LineParams:
    th_lines: float = 0.15
    max_lines: int = 10
    min_support: int = 10
    max_iter: int = 150
    rng_seed: int = 0
    project_to_plane: bool = False

    def __post_init__(self):
        if self.th_lines <= 0 or self.max_lines <= 0 or self.min_support <= 0 \
                or self.max_iter <= 0:
            raise ConfigError("line parameters must all be positive")


@dataclass
class LineModel:
    """3D line through ``anchor`` along unit ``direction``.

    ``support`` holds indices into the original frame (or into the
    candidate set when no index map was given).
    """

    anchor: np.ndarray
    direction: np.ndarray
    support: np.ndarray
    accepted: bool

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        rel = xyz - self.anchor
        along = rel @ self.direction
        perp = rel - np.outer(along, self.direction)
        return np.linalg.norm(perp, axis=1)


def _canonical_direction(u: np.ndarray) -> np.ndarray:
    for comp in u:
        if comp != 0.0:
            return u if comp > 0 else -u
    return u


def _ransac_line(P: np.ndarray, th: float, max_iter: int, seed_key) -> np.ndarray | None:
    """Indices (into P) of the best consensus set, or None if degenerate."""
    n = P.shape[0]
    scale = max(1.0, float(np.abs(P).max()))
    best_count = -1
    best_pair = None
    for it in range(max_iter):
        rng = np.random.default_rng([*seed_key, it])
        i, j = rng.choice(n, 2, replace=False)
        d = P[j] - P[i]
        norm = np.linalg.norm(d)
        if norm < 1e-12 * scale:
            continue
        u = d / norm
        rel = P - P[i]
        perp = rel - np.outer(rel @ u, u)
        count = int((np.einsum("ij,ij->i", perp, perp) <= th * th).sum())
        if count > best_count:
            best_count = count
            best_pair = (P[i], u)
    if best_pair is None:
        return None
    anchor, u = best_pair
    rel = P - anchor
    perp = rel - np.outer(rel @ u, u)
    return np.nonzero(np.einsum("ij,ij->i", perp, perp) <= th * th)[0]


def _refit_line(Q: np.ndarray):
    anchor = Q.mean(axis=0)
    C = Q - anchor
    cov = C.T @ C
    w, v = np.linalg.eigh(cov)
    u = _canonical_direction(v[:, -1])
    return anchor, u


def fit_lines_sequential(candidates: PointCloud, params: LineParams = LineParams(),
                         index_map: np.ndarray | None = None,
                         plane: PlaneModel | None = None) -> list[LineModel]:
    """Extract up to ``max_lines`` line models from the candidate points.

    ``index_map`` translates candidate-local indices to original-frame
    indices for the support masks. With ``project_to_plane`` set and a
    plane given, candidates are flattened onto the plane before fitting.
    """
    n = len(candidates)
    if index_map is None:
        index_map = np.arange(n, dtype=np.int64)
    else:
        index_map = np.asarray(index_map, dtype=np.int64)
        if index_map.shape != (n,):
            raise ConfigError("index_map length must match the candidate count")
    P = candidates.xyz()
    if params.project_to_plane and plane is not None:
        signed = P @ plane.normal + plane.d
        P = P - np.outer(signed, plane.normal)
    remaining = np.arange(n, dtype=np.int64)
    out: list[LineModel] = []
    while len(out) < params.max_lines and remaining.size >= 2:
        local = _ransac_line(P[remaining], params.th_lines, params.max_iter,
                             (params.rng_seed, len(out)))
        if local is None or local.size == 0:
            break
        anchor, u = _refit_line(P[remaining][local])
        rel = P[remaining] - anchor
        perp = rel - np.outer(rel @ u, u)
        support_local = np.nonzero(
            np.einsum("ij,ij->i", perp, perp) <= params.th_lines ** 2
        )[0]
        if support_local.size == 0:
            break
        support_rows = remaining[support_local]
        accepted = support_rows.size > params.min_support
        out.append(LineModel(anchor, u, np.sort(index_map[support_rows]), accepted))
        remaining = np.setdiff1d(remaining, support_rows, assume_unique=True)
        if not accepted:
            break
    return out


def marking_labels(lines: list[LineModel], frame_size: int) -> np.ndarray:
    """Per-point predicted labels: supports of accepted lines are 'marking'."""
    labels = np.full(frame_size, "other", dtype="U7")
    for line in lines:
        if line.accepted:
            labels[line.support] = "marking"
    return labels


def write_lines(lines: list[LineModel], path) -> None:
    """One line model per row: anchor xyz, direction xyz, support count, accepted."""
    with open(path, "w", encoding="ascii") as fh:
        for ln in lines:
            fh.write(
                f"{ln.anchor[0]:.9g} {ln.anchor[1]:.9g} {ln.anchor[2]:.9g} "
                f"{ln.direction[0]:.9g} {ln.direction[1]:.9g} {ln.direction[2]:.9g} "
                f"{ln.support.size:d} {int(ln.accepted):d}\n"
            )
