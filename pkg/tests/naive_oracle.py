"""Independent nested-loop re-implementation of the sample matching procedure.

Kept deliberately dumb (no sorting tricks, no early exits) so it can serve as
an oracle for the production matcher.
"""


def naive_iou(a, b):
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    iw = ix2 - ix1 if ix2 > ix1 else 0.0
    ih = iy2 - iy1 if iy2 > iy1 else 0.0
    inter = iw * ih
    area_a = (a[2] - a[0]) * (a[3] - a[1]) if a[2] > a[0] and a[3] > a[1] else 0.0
    area_b = (b[2] - b[0]) * (b[3] - b[1]) if b[2] > b[0] and b[3] > b[1] else 0.0
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def naive_match(gt_boxes, pred_boxes, thresh):
    """Returns (tp, fp, fn, f1) by literal application of the procedure."""
    if len(gt_boxes) == 0:
        f1 = 1.0 if len(pred_boxes) == 0 else 0.0
        return 0, len(pred_boxes), 0, f1

    # Every prediction picks its best ground-truth box at or above the
    # threshold; ties go to the lowest GT index.
    choices = []
    for p in pred_boxes:
        best, best_v = None, None
        for gi, g in enumerate(gt_boxes):
            v = naive_iou(p, g)
            if v < thresh:
                continue
            if best is None or v > best_v:
                best, best_v = gi, v
        choices.append(best)

    tp = 0
    for gi in range(len(gt_boxes)):
        claimed = [c for c in choices if c == gi]
        if claimed:
            tp += 1
    fp = len(pred_boxes) - tp
    fn = len(gt_boxes) - tp
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 1.0
    return tp, fp, fn, f1
