"""Binary mask algebra: rasterization, RLE, IoU, bboxes, paste compositing.

Conventions (frozen, other modules and file formats rely on them):

* A mask is a ``np.ndarray`` of dtype bool with shape ``(height, width)``.
* RLE counts are taken in column-major scan order (down each column, columns
  left to right) and alternate background/foreground runs starting with
  background, so an all-background mask encodes to ``[height * width]``.
* Rasterization marks pixel ``(row i, col j)`` foreground iff its center
  ``(j + 0.5, i + 0.5)`` lies inside a polygon under the even-odd rule.
* Boxes are half-open pixel-boundary coordinates: a single foreground pixel
  at column 3, row 5 has the box ``(3, 5, 4, 6)``.
"""

from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegeneratePolygon,
    DimensionMismatch,
    EmptyAfterClip,
    LengthMismatch,
)


class Box(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


def mask_area(mask: np.ndarray) -> int:
    """Number of foreground pixels."""
    return int(np.count_nonzero(mask))


def _as_vertices(poly) -> np.ndarray:
    """Accept either a flat [x0, y0, x1, y1, ...] list or an (N, 2) sequence."""
    arr = np.asarray(poly, dtype=np.float64)
    if arr.ndim == 1:
        if arr.size % 2 != 0:
            raise DegeneratePolygon("flat polygon list has odd length")
        arr = arr.reshape(-1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise DegeneratePolygon(f"polygon needs >= 3 vertices, got shape {arr.shape}")
    return arr


def rasterize_polygons(polys: Sequence, width: int, height: int) -> np.ndarray:
    """Rasterize a list of closed polygons to one union mask.

    Each polygon is filled independently with the even-odd rule at pixel
    centers; the results are OR-ed together. Coordinates may extend past the
    canvas; anything outside is clipped.
    """
    out = np.zeros((height, width), dtype=bool)
    for poly in polys:
        verts = _as_vertices(poly)
        xs, ys = verts[:, 0], verts[:, 1]
        row_lo = max(0, int(np.floor(ys.min())) - 1)
        row_hi = min(height, int(np.ceil(ys.max())) + 1)
        col_lo = max(0, int(np.floor(xs.min())) - 1)
        col_hi = min(width, int(np.ceil(xs.max())) + 1)
        if row_lo >= row_hi or col_lo >= col_hi:
            continue
        cy = np.arange(row_lo, row_hi, dtype=np.float64) + 0.5
        cx = np.arange(col_lo, col_hi, dtype=np.float64) + 0.5
        inside = np.zeros((cy.size, cx.size), dtype=bool)
        x1, y1 = xs, ys
        x2, y2 = np.roll(xs, -1), np.roll(ys, -1)
        for ex1, ey1, ex2, ey2 in zip(x1, y1, x2, y2):
            crosses = (ey1 > cy) != (ey2 > cy)
            if not crosses.any():
                continue
            t = (cy - ey1) / (ey2 - ey1)
            xint = ex1 + t * (ex2 - ex1)
            inside ^= crosses[:, None] & (cx[None, :] < xint[:, None])
        out[row_lo:row_hi, col_lo:col_hi] |= inside
    return out


def rle_encode(mask: np.ndarray) -> List[int]:
    """Column-major RLE counts, alternating background/foreground, bg first."""
    flat = np.asarray(mask, dtype=bool).ravel(order="F")
    if flat.size == 0:
        return []
    changes = np.flatnonzero(np.diff(flat.view(np.int8))) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts: Sequence[int], width: int, height: int) -> np.ndarray:
    """Inverse of :func:`rle_encode`."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise LengthMismatch("negative run length")
    total = sum(counts)
    if total != width * height:
        raise LengthMismatch(f"counts sum to {total}, expected {width * height}")
    values = (np.arange(len(counts)) % 2).astype(bool)
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")


def mask_to_rle_segmentation(mask: np.ndarray) -> dict:
    """Mask as a COCO-style uncompressed RLE segmentation object."""
    h, w = mask.shape
    return {"size": [int(h), int(w)], "counts": rle_encode(mask)}


def decode_segmentation(segmentation, width: int, height: int) -> np.ndarray:
    """Decode either polygon-list or RLE segmentation into a dense mask."""
    if isinstance(segmentation, dict):
        size = segmentation.get("size")
        if size is not None and (int(size[0]) != height or int(size[1]) != width):
            raise DimensionMismatch(
                f"RLE size {size} does not match frame ({height}, {width})"
            )
        return rle_decode(segmentation["counts"], width, height)
    return rasterize_polygons(segmentation, width, height)


def mask_bbox(mask: np.ndarray) -> Optional[Box]:
    """Tightest pixel-boundary box around the foreground, or None if empty."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return Box(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def box_iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when the union has zero area."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(inter / union)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Per-pixel IoU; 0 when both masks are empty."""
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = np.count_nonzero(a & b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return float(inter / union)


def composite_paste(
    canvas_masks: Sequence[np.ndarray],
    patch_mask: np.ndarray,
    position: Tuple[int, int],
    canvas_size: Tuple[int, int],
) -> Tuple[List[np.ndarray], np.ndarray, List[int]]:
    """Paste a patch mask onto a canvas, occluding everything beneath it.

    ``position`` is the (x_min, y_min) anchor of the patch's top-left corner;
    it may place the patch partially off-canvas, in which case the off-canvas
    part is clipped. ``canvas_size`` is (width, height).

    Returns ``(updated_masks, pasted_mask, removed_indices)``:
    ``updated_masks`` parallels the input list with the pasted region
    subtracted from every mask; indices whose remaining area is zero are
    listed in ``removed_indices`` (the caller drops those records).

    Raises EmptyAfterClip when no foreground pixel of the patch survives
    clipping; the caller should resample a position.
    """
    w, h = int(canvas_size[0]), int(canvas_size[1])
    x0, y0 = int(np.floor(position[0])), int(np.floor(position[1]))
    ph, pw = patch_mask.shape

    px0, py0 = max(0, -x0), max(0, -y0)
    px1, py1 = min(pw, w - x0), min(ph, h - y0)
    if px1 <= px0 or py1 <= py0:
        raise EmptyAfterClip("patch rectangle fully outside canvas")

    pasted = np.zeros((h, w), dtype=bool)
    pasted[y0 + py0 : y0 + py1, x0 + px0 : x0 + px1] = patch_mask[py0:py1, px0:px1]
    if not pasted.any():
        raise EmptyAfterClip("no foreground pixel of the patch is on canvas")

    updated = [np.asarray(m, dtype=bool) & ~pasted for m in canvas_masks]
    removed = [i for i, m in enumerate(updated) if not m.any()]
    return updated, pasted, removed
