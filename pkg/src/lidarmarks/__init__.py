"""Road-marking extraction from spinning-LIDAR reflectivity data."""

from .cloud import (IndexMask, LidarPoint, PointCloud, empty_cloud, full_mask,
                    points_of_ring, ring_indices, select)
from .cloud_io import read_cloud, read_labels, write_cloud, write_labels
from .config import (GroundParams, PipelineConfig, ThresholdParams,
                     default_config, load_config)
from .ground import (Cluster, PlaneModel, RegionParams, SurfaceNormal,
                     estimate_normals, fit_plane_ransac, region_grow,
                     select_road_cluster)
from .lines import LineModel, LineParams, fit_lines_sequential, marking_labels
from .metrics import EvalReport, aggregate, evaluate
from .pipeline import (BatchResult, ChannelComparison, FrameResult,
                       compare_channels, run_batch, run_frame)
from .prefilter import PrefilterParams, prefilter
from .synth import (GroundTruth, SceneConfig, StripeSpec, VehicleBox,
                    generate, scene_suite)
from .threshold import (LayerStats, RingHistogram, ThresholdResult,
                        extract_candidates, layer_stats, otsu_restricted,
                        quantize, ring_histogram)

__version__ = "0.1.0"
