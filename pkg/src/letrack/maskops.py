"""Run-length encoded masks and IoU geometry.

RLE convention (matching the common COCO/BURST layout): pixels are scanned
in column-major order (down column 0, then column 1, ...), and ``counts``
holds alternating run lengths starting with a run of ZEROS.  A mask whose
first pixel is set therefore starts with ``counts[0] == 0``; a zero-length
run is legal only at index 0.  ``sum(counts) == height * width`` always.

Only the plain integer-array form is handled here.  The COCO compressed
string encoding is a different artifact and is not part of this package.

IoU is computed directly on the runs by merging the two run boundaries, so
no bitmap is ever materialized.  Intersection and union are exact integer
pixel counts and the returned ratio is their exact float64 quotient, which
makes the result bit-identical to a brute-force bitmap computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BBox

__all__ = [
    "RleMask",
    "box_iou",
    "box_iou_matrix",
    "mask_iou",
    "mask_to_box",
    "rle_decode",
    "rle_encode",
    "validate_rle",
]


@dataclass(frozen=True)
class RleMask:
    """Column-major run-length mask: size is (height, width)."""

    size: tuple[int, int]
    counts: tuple[int, ...]

    def area(self) -> int:
        """Number of set pixels (sum of the odd-index runs)."""
        return int(sum(self.counts[1::2]))


def validate_rle(mask: RleMask) -> list[str]:
    """Complete list of RLE invariant violations; empty means valid."""
    issues: list[str] = []
    h, w = mask.size
    if h < 0 or w < 0:
        issues.append(f"size must be non-negative, got ({h}, {w})")
        return issues
    total = h * w
    counts = mask.counts
    if total > 0 and len(counts) == 0:
        issues.append(f"counts is empty for a {h}x{w} mask")
        return issues
    for i, c in enumerate(counts):
        if c < 0:
            issues.append(f"counts[{i}] is negative: {c}")
        elif c == 0 and i != 0:
            issues.append(f"counts[{i}] is a zero-length interior run")
    got = sum(counts)
    if got != total:
        issues.append(f"counts sum to {got} pixels, expected {total} for size ({h}, {w})")
    return issues


def rle_encode(bitmap: np.ndarray) -> RleMask:
    """Encode a 2-D bitmap (height, width) into column-major runs."""
    arr = np.asarray(bitmap)
    if arr.ndim != 2:
        raise ValueError(f"bitmap must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    flat = arr.astype(bool).reshape(-1, order="F")
    n = flat.size
    if n == 0:
        return RleMask(size=(h, w), counts=())
    # Boundaries between runs, plus the two ends.
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [n]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return RleMask(size=(h, w), counts=tuple(int(r) for r in runs))


def rle_decode(mask: RleMask) -> np.ndarray:
    """Decode runs back into a (height, width) boolean bitmap."""
    h, w = mask.size
    total = h * w
    got = sum(mask.counts)
    if got != total:
        raise ValueError(
            f"rle decode: counts sum to {got} pixels, expected {total} for size ({h}, {w})"
        )
    flat = np.zeros(total, dtype=bool)
    ends = np.cumsum(np.asarray(mask.counts, dtype=np.int64)) if mask.counts else np.zeros(0, np.int64)
    for k in range(1, len(mask.counts), 2):
        flat[ends[k - 1] : ends[k]] = True
    return flat.reshape((h, w), order="F")


def mask_iou(a: RleMask, b: RleMask) -> float:
    """IoU of two masks of identical size, computed on the runs.

    Both-empty masks give 0.0.  The merge walks the union of the two run
    boundary sets; each merged segment is constant in both masks, so the
    intersection/union pixel counts are exact integers.
    """
    if tuple(a.size) != tuple(b.size):
        raise ValueError(f"mask size mismatch: {tuple(a.size)} vs {tuple(b.size)}")
    h, w = a.size
    total = h * w
    if total == 0:
        return 0.0
    ca = np.asarray(a.counts, dtype=np.int64)
    cb = np.asarray(b.counts, dtype=np.int64)
    ends_a = np.cumsum(ca)
    ends_b = np.cumsum(cb)
    cuts = np.union1d(ends_a, ends_b)  # sorted, ends with `total`
    starts = np.concatenate(([0], cuts[:-1]))
    lengths = cuts - starts
    # Run k covers [ends[k-1], ends[k]); odd k means set pixels.
    val_a = (np.searchsorted(ends_a, starts, side="right") % 2) == 1
    val_b = (np.searchsorted(ends_b, starts, side="right") % 2) == 1
    inter = int(lengths[val_a & val_b].sum())
    union = int(lengths[val_a | val_b].sum())
    if union == 0:
        return 0.0
    return inter / union


def box_iou(a: BBox, b: BBox) -> float:
    """Open-interval IoU of two boxes; 0.0 when both have zero area."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def box_iou_matrix(boxes_a: list[BBox], boxes_b: list[BBox]) -> np.ndarray:
    """Pairwise open-interval box IoU, shape (len(a), len(b))."""
    n, m = len(boxes_a), len(boxes_b)
    if n == 0 or m == 0:
        return np.zeros((n, m), dtype=np.float64)
    a = np.array([bb.as_tuple() for bb in boxes_a], dtype=np.float64)
    b = np.array([bb.as_tuple() for bb in boxes_b], dtype=np.float64)
    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]
    ix = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :])
    iy = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :])
    inter = np.maximum(ix, 0.0) * np.maximum(iy, 0.0)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    out = np.zeros((n, m), dtype=np.float64)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def mask_to_box(mask: RleMask) -> BBox:
    """Tightest integer-pixel box covering the set pixels.

    Works on the runs without decoding.  A run that spans several columns
    necessarily touches row 0 and row height-1, which bounds the row extent
    without inspecting individual pixels.  Empty mask gives (0, 0, 0, 0).
    """
    h, _ = mask.size
    ends = np.cumsum(np.asarray(mask.counts, dtype=np.int64)) if mask.counts else np.zeros(0, np.int64)
    min_row: int | None = None
    max_row: int | None = None
    min_col: int | None = None
    max_col: int | None = None
    for k in range(1, len(mask.counts), 2):
        start, end = int(ends[k - 1]), int(ends[k])
        if end <= start:
            continue
        c0, c1 = start // h, (end - 1) // h
        r0 = 0 if c1 > c0 else start % h
        r1 = h - 1 if c1 > c0 else (end - 1) % h
        min_col = c0 if min_col is None else min(min_col, c0)
        max_col = c1 if max_col is None else max(max_col, c1)
        min_row = r0 if min_row is None else min(min_row, r0)
        max_row = r1 if max_row is None else max(max_row, r1)
    if min_col is None:
        return BBox(0.0, 0.0, 0.0, 0.0)
    return BBox(
        float(min_col),
        float(min_row),
        float(max_col - min_col + 1),
        float(max_row - min_row + 1),
    )
