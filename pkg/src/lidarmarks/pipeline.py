"""Stage composition: one-shot frame runner, batch runner, channel comparison.

Stages run in order prefilter -> plane fit -> region growing -> adaptive
threshold -> line fit. Every stage's output mask is re-expressed in the
original frame's indices, so the chain

    candidates <= road cluster <= plane inliers <= prefiltered <= frame

is checked on construction of each FrameResult. An empty intermediate set
short-circuits to an empty result; a degenerate non-empty input raises a
stage-tagged error.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cloud import IndexMask, PointCloud, select
from .config import PipelineConfig
from .errors import DegenerateInputError, PipelineStageError, StructuralError
from .ground import (PlaneModel, estimate_normals, fit_plane_ransac,
                     region_grow, select_road_cluster)
from .lines import LineModel, fit_lines_sequential, marking_labels
from .metrics import EvalReport, aggregate, evaluate
from .prefilter import prefilter
from .threshold import extract_candidates

STAGES = ("prefilter", "plane_fit", "region_grow", "threshold", "line_fit")


@dataclass
class FrameResult:
    frame_id: str
    n_points: int
    mask_prefilter: IndexMask
    mask_plane: IndexMask
    mask_road: IndexMask
    mask_candidates: IndexMask
    plane: PlaneModel | None
    lines: list[LineModel]
    predicted_labels: np.ndarray
    timings_ms: dict[str, float]
    ring_thresholds: dict = field(default_factory=dict)
    empty_after: str | None = None

    def __post_init__(self):
        chain = (self.mask_candidates, self.mask_road,
                 self.mask_plane, self.mask_prefilter)
        for inner, outer in zip(chain, chain[1:]):
            if not inner.is_subset_of(outer):
                raise StructuralError("stage masks are not nested")
        if self.mask_prefilter.parent_size != self.n_points:
            raise StructuralError("prefilter mask does not reference the input frame")
        if self.predicted_labels.shape[0] != self.n_points:
            raise StructuralError("predicted labels length mismatch")

    def digest(self) -> str:
        """Content hash of everything downstream consumers can observe."""
        h = hashlib.sha256()
        for mask in (self.mask_prefilter, self.mask_plane,
                     self.mask_road, self.mask_candidates):
            h.update(mask.indices.tobytes())
        if self.plane is not None:
            h.update(np.array([self.plane.a, self.plane.b, self.plane.c,
                               self.plane.d]).tobytes())
        for line in self.lines:
            h.update(line.anchor.tobytes())
            h.update(line.direction.tobytes())
            h.update(line.support.tobytes())
            h.update(bytes([line.accepted]))
        h.update(self.predicted_labels.tobytes())
        return h.hexdigest()


def _empty_mask(cloud: PointCloud) -> IndexMask:
    return IndexMask(np.zeros(0, dtype=np.int64), len(cloud), cloud.frame_id)


def _empty_result(cloud: PointCloud, stage: str, timings, masks) -> FrameResult:
    empty = _empty_mask(cloud)
    filled = list(masks) + [empty] * (4 - len(masks))
    return FrameResult(
        frame_id=cloud.frame_id, n_points=len(cloud),
        mask_prefilter=filled[0], mask_plane=filled[1],
        mask_road=filled[2], mask_candidates=filled[3],
        plane=None, lines=[],
        predicted_labels=np.full(len(cloud), "other", dtype="U7"),
        timings_ms=timings, empty_after=stage,
    )


def run_frame(cloud: PointCloud, config: PipelineConfig) -> FrameResult:
    """Run all stages on one frame; deterministic for a fixed config."""
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    mask_b = prefilter(cloud, config.prefilter)
    timings["prefilter"] = 1000.0 * (time.perf_counter() - t0)
    if len(mask_b) == 0:
        return _empty_result(cloud, "prefilter", timings, [mask_b])

    t0 = time.perf_counter()
    cloud_b = select(cloud, mask_b)
    try:
        plane = fit_plane_ransac(cloud_b, config.ground.th_plane,
                                 config.ground.max_iter, config.ground.seed)
    except DegenerateInputError as e:
        raise PipelineStageError("plane_fit", e) from e
    mask_c = mask_b.compose(plane.inliers)
    timings["plane_fit"] = 1000.0 * (time.perf_counter() - t0)
    if len(mask_c) == 0:
        return _empty_result(cloud, "plane_fit", timings, [mask_b, mask_c])

    t0 = time.perf_counter()
    cloud_c = select(cloud, mask_c)
    try:
        normals = estimate_normals(cloud_c, config.ground.k_neighbors)
        clusters = region_grow(cloud_c, normals, config.ground.region())
        road_local = select_road_cluster(clusters, cloud_c)
    except (DegenerateInputError, StructuralError) as e:
        raise PipelineStageError("region_grow", e) from e
    mask_road = mask_c.compose(road_local)
    timings["region_grow"] = 1000.0 * (time.perf_counter() - t0)
    if len(mask_road) == 0:
        return _empty_result(cloud, "region_grow", timings, [mask_b, mask_c, mask_road])

    t0 = time.perf_counter()
    cloud_road = select(cloud, mask_road)
    cand_local, details = extract_candidates(
        cloud_road, channel=config.threshold.channel,
        n_bins=config.threshold.n_bins, t0_mode=config.threshold.t0_mode,
        return_details=True,
    )
    mask_cand = mask_road.compose(cand_local)
    timings["threshold"] = 1000.0 * (time.perf_counter() - t0)
    if len(mask_cand) == 0:
        result = _empty_result(cloud, "threshold", timings,
                               [mask_b, mask_c, mask_road, mask_cand])
        result.plane = plane
        result.ring_thresholds = details
        return result

    t0 = time.perf_counter()
    cand_cloud = select(cloud, mask_cand)
    lines = fit_lines_sequential(cand_cloud, config.lines,
                                 index_map=mask_cand.indices, plane=plane)
    labels = marking_labels(lines, len(cloud))
    timings["line_fit"] = 1000.0 * (time.perf_counter() - t0)

    return FrameResult(
        frame_id=cloud.frame_id, n_points=len(cloud),
        mask_prefilter=mask_b, mask_plane=mask_c,
        mask_road=mask_road, mask_candidates=mask_cand,
        plane=plane, lines=lines, predicted_labels=labels,
        timings_ms=timings, ring_thresholds=details,
    )


@dataclass
class FrameOutcome:
    frame_id: str
    report: EvalReport | None
    digest: str
    timings_ms: dict[str, float]
    n_lines_accepted: int
    n_predicted_marking: int
    empty_after: str | None
    error: str | None = None


@dataclass
class BatchResult:
    outcomes: list[FrameOutcome]
    aggregate_report: EvalReport | None
    failures: list[tuple[str, str]]

    @property
    def n_frames(self) -> int:
        return len(self.outcomes)


def _process_item(args):
    """Worker body: run one frame, capturing stage failures as outcomes."""
    (frame_id, cloud, truth), config, keep = args
    try:
        res = run_frame(cloud, config)
    except PipelineStageError as e:
        return FrameOutcome(frame_id, None, "", {}, 0, 0, None, str(e)), None
    report = None
    if truth is not None:
        report = evaluate(res.predicted_labels, truth, channel=config.channel)
    outcome = FrameOutcome(
        frame_id=frame_id, report=report, digest=res.digest(),
        timings_ms=res.timings_ms,
        n_lines_accepted=sum(1 for ln in res.lines if ln.accepted),
        n_predicted_marking=int(np.sum(res.predicted_labels == "marking")),
        empty_after=res.empty_after,
    )
    return outcome, (res if keep else None)


def run_batch(items, config: PipelineConfig, keep_frames: bool = False):
    """Run the pipeline over (frame_id, cloud, truth_or_None) items.

    Per-frame failures are recorded and do not abort the batch. Returns a
    BatchResult, plus the list of FrameResults when ``keep_frames``.
    """
    outcomes: list[FrameOutcome] = []
    kept: list[FrameResult] = []

    if config.workers > 1 and not keep_frames:
        args = ((item, config, False) for item in items)
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for outcome, _ in pool.map(_process_item, args, chunksize=4):
                outcomes.append(outcome)
    else:
        for item in items:
            outcome, res = _process_item((item, config, keep_frames))
            outcomes.append(outcome)
            if keep_frames and res is not None:
                kept.append(res)

    failures = [(o.frame_id, o.error) for o in outcomes if o.error is not None]
    reports = [o.report for o in outcomes if o.report is not None]
    agg = aggregate(reports) if reports else None
    result = BatchResult(outcomes, agg, failures)
    if keep_frames:
        return result, kept
    return result


@dataclass
class ChannelComparison:
    results: dict[str, BatchResult]

    def f1(self, channel: str) -> float | None:
        rep = self.results[channel].aggregate_report
        return None if rep is None else rep.f1

    def table_rows(self, dataset: str = "synthetic"):
        return [(dataset, ch, res.aggregate_report)
                for ch, res in self.results.items()
                if res.aggregate_report is not None]


def compare_channels(items_factory, config: PipelineConfig) -> ChannelComparison:
    """Run the full pipeline once per channel on identical frames.

    ``items_factory`` is either a callable producing a fresh item iterable
    per call or a reusable sequence. The two runs share every parameter
    except the channel driving the histogram stage.
    """
    results = {}
    for channel in ("reflectivity", "intensity"):
        items = items_factory() if callable(items_factory) else items_factory
        results[channel] = run_batch(items, config.with_channel(channel))
    return ChannelComparison(results)
