"""Anchor filtering and per-phrase selection over precomputed features."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .similarity import ProjectionBundle, hemix


@dataclass(frozen=True)
class AnchorRecord:
    feature: np.ndarray
    confidence: float
    box: tuple

    def __post_init__(self):
        object.__setattr__(self, "feature", np.asarray(self.feature, dtype=np.float64))
        object.__setattr__(self, "box", tuple(float(c) for c in self.box))
        if len(self.box) != 4:
            raise ValueError(f"box must have four coordinates, got {self.box}")
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise ValueError(f"box must satisfy x1<x2 and y1<y2, got {self.box}")
        if not math.isfinite(self.confidence):
            raise ValueError("confidence must be finite")


@dataclass(frozen=True)
class GroundingOutput:
    sample_id: str
    boxes: tuple
    phrases_used: tuple


def filter_anchors(anchors: list, top_fraction: float) -> list:
    """Keep the ceil(top_fraction * n) most confident anchors, at least one.

    Sorting is by confidence descending with ties broken by original index,
    so the result is deterministic and every kept confidence is >= every
    dropped one.
    """
    if not anchors:
        raise ValueError("anchor list is empty")
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must lie in (0, 1], got {top_fraction}")
    keep = max(1, math.ceil(top_fraction * len(anchors)))
    ranked = sorted(range(len(anchors)), key=lambda i: (-anchors[i].confidence, i))
    kept = sorted(ranked[:keep])
    return [anchors[i] for i in kept]


def select_anchor(
    text_feature: np.ndarray,
    anchors: list,
    bundle: ProjectionBundle,
    *,
    score_offset: float = 0.0,
) -> int:
    """Index of the anchor with the highest mixed similarity to the text.

    Ties go to the lowest index. ``score_offset`` is a test hook adding a
    constant to every score; the argmax must not move.
    """
    if not anchors:
        raise ValueError("anchor list is empty")
    scores = [hemix(a.feature, text_feature, bundle) + score_offset for a in anchors]
    return int(np.argmax(scores))


def ground(
    sample_id: str,
    anchors: list,
    phrases: list,
    text_features: list,
    bundle: ProjectionBundle,
    top_fraction: float = 0.10,
    distinct_anchors: bool = False,
) -> GroundingOutput:
    """Select one box per decoupled phrase.

    A zero-phrase sample produces no boxes. The confidence filter runs once
    per image; each phrase then picks its argmax independently, so one anchor
    may serve several phrases unless ``distinct_anchors`` greedily excludes
    already-used anchors (leaving reuse only when nothing else remains).
    """
    if len(phrases) != len(text_features):
        raise ValueError(
            f"expected {len(phrases)} text features to match the phrases, got {len(text_features)}"
        )
    if not phrases:
        return GroundingOutput(sample_id=sample_id, boxes=(), phrases_used=())
    pool = filter_anchors(anchors, top_fraction)
    boxes = []
    used: set = set()
    for feat in text_features:
        candidates = [i for i in range(len(pool)) if i not in used] if distinct_anchors else list(range(len(pool)))
        if not candidates:
            candidates = list(range(len(pool)))
        sub = [pool[i] for i in candidates]
        idx = candidates[select_anchor(np.asarray(feat, dtype=np.float64), sub, bundle)]
        used.add(idx)
        boxes.append(pool[idx].box)
    return GroundingOutput(sample_id=sample_id, boxes=tuple(boxes), phrases_used=tuple(phrases))
