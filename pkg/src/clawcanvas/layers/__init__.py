"""Layered images: documents, compositing, edits and region metrics."""

from .composite import (
    Delete,
    DimensionMismatch,
    EditOp,
    MissingPayload,
    OutOfRange,
    Recolor,
    Reorder,
    ReplacePayload,
    SetOpacity,
    Translate,
    UnknownLayer,
    apply_edit,
    composite,
    edit_from_json,
    footprint,
    unedited_mask,
)
from .doc import (
    DuplicateLayerId,
    Layer,
    LayerDoc,
    MalformedLayerLine,
    MissingHeader,
    NonMonotoneZ,
    SolidFill,
    load_layerdoc,
    parse_layerdoc,
    serialize_layerdoc,
)
from .image import (
    Image,
    ImageFormatError,
    Mask,
    decode_image,
    decode_raw,
    encode_png,
    encode_raw,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .metrics import EmptyMask, RegionTooSmall, psnr, ssim
