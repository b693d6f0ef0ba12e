"""Window-to-wall ratio (WWR) estimation from facade segmentation label maps."""

from .errors import ValidationError, WWRError
from .ingest import DatasetItem, PolygonAnnotation, RasterImage, decode_image, parse_annotations, scan_dataset
from .masks import (
    BinaryMask,
    ClassConfig,
    LabelMap,
    decode_label_png,
    encode_label_png,
    fuse_labels,
    mask_from_label,
    rasterize_polygons,
)
from .metrics import ErrorSummary, IoUResult, WWRRecord, compute_iou, compute_wwr, wwr_error
from .preprocess import (
    FloatImage,
    NormalizationParams,
    crop_pad_resize,
    export_tensor,
    import_tensor,
    normalize,
    resize_bilinear,
    resize_nearest,
)
from .stats import DatasetStats, dataset_stats, emit_report

__version__ = "0.1.0"
