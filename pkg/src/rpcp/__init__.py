"""Random projected copy-and-paste augmentation for segmentation datasets."""

__version__ = "0.1.0"

from rpcp.dataset_io import (
    AugConfig,
    ClassScheme,
    PairDescriptor,
    RpConfig,
    load_pair,
    parse_config,
    scan_dataset,
    write_pair,
)
from rpcp.errors import (
    ConfigError,
    DataMismatchError,
    DatasetIOError,
    RpcpError,
    TransformCollapse,
)
from rpcp.geom_transform import AugParams, sample_params, transform_patch
from rpcp.metrics_stats import (
    ConfusionCounts,
    MetricReport,
    class_metrics,
    confusion,
    evaluate,
    mean_metrics,
    pixel_distribution,
    sample_pixels,
)
from rpcp.patch_bank import Patch, PatchBank, Region, build_bank, crop_patch, extract_components
from rpcp.paste_engine import (
    PasteEvent,
    PlacementConstraints,
    composite,
    find_placement,
    is_valid_placement,
    paste_k,
)
from rpcp.random_projection import RpFilter, convolve, refine, restandardize, sample_filter
