"""courtaug: copy-paste augmentation and inference post-processing toolkit
for two-camera court-scene instance segmentation datasets."""

__version__ = "0.1.0"

from .coco_io import (  # noqa: F401
    AnnotationRecord,
    CategoryRecord,
    DatasetDoc,
    ImageRecord,
    Violation,
    load_dataset,
    parse_dataset,
    reindex,
    save_dataset,
    serialize_dataset,
    validate_dataset,
)
from .config import AugmentConfig, GeometricConfig, PaletteEntry, PhotometricConfig, ResizeConfig  # noqa: F401
from .mask_ops import (  # noqa: F401
    Box,
    box_iou,
    composite_paste,
    decode_segmentation,
    mask_area,
    mask_bbox,
    mask_iou,
    mask_to_rle_segmentation,
    rasterize_polygons,
    rle_decode,
    rle_encode,
)
from .object_bank import BankManifest, ObjectPatch, extract_bank, load_bank, save_bank  # noqa: F401
from .augment import (  # noqa: F401
    CategoryPair,
    ImageDirLoader,
    PasteEvent,
    ViewSide,
    apply_geometric,
    apply_photometric,
    augment_dataset,
    augment_image,
    compute_resize_scale,
    duplicate_dataset,
    infer_view,
    paste_interaction_balls,
    paste_objects,
    recolor_pure_ball,
    resize_crop_pad,
    resolve_categories,
    sample_interaction_location,
    sample_view_paste_location,
)
from .inference import (  # noqa: F401
    CropTransform,
    Detection,
    ball_size_gate,
    crop_top,
    load_results,
    max_score_filter,
    run_tsip,
    save_results,
    uncrop_detections,
)
from .metrics import (  # noqa: F401
    DetInstance,
    EvalResult,
    GtInstance,
    IOU_THRESHOLDS,
    ap_at_threshold,
    ap_range,
    evaluate,
    match_at_threshold,
)
from .rng import derive_rng  # noqa: F401
from .synthgen import SceneSpec, generate_corpus, generate_scene  # noqa: F401
