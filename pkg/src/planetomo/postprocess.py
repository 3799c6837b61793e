"""Heatmap binarization and segmentation scoring.

Binarization uses two thresholds: a detection threshold tau picked to
maximize weighted balanced accuracy of the sample-level labels, and an
extension threshold tau' < tau that grows the detected blobs without
ever changing a sample's predicted label.  The mask at tau' keeps only
the connected components whose heatmap maximum reaches tau.

Scoring follows the component-matching convention: a predicted component
counts as a true positive when some ground-truth component overlaps it
with IoU strictly greater than 1/8 (two nested spheres of radius r and
2r sit exactly at 1/8 and do not match).  Box-only ground truth uses the
same rule on axis-aligned bounding boxes and reports the best box IoU in
place of dice.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

MATCH_MIN_IOU = 1.0 / 8.0
SENSITIVITY_WEIGHT = 5.0
TAU_PRIME_CANDIDATES = 64


@dataclass(frozen=True)
class LabeledSample:
    """A heatmap with its binary label and optional ground truth.

    Ground truth is either a binary mask shaped like the heatmap or an
    axis-aligned bounding box ((d0,h0,w0), (d1,h1,w1)) with inclusive
    integer corners.
    """

    heatmap: np.ndarray
    label: int
    mask: np.ndarray = None
    box: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "heatmap", np.asarray(self.heatmap))
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != self.heatmap.shape:
                raise ValueError(
                    f"mask shape {mask.shape} != heatmap shape {self.heatmap.shape}"
                )
            object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class Component:
    """One connected component: voxel count, inclusive bbox, heatmap peak."""

    label: int
    size: int
    bbox: tuple
    peak: float


@dataclass(frozen=True)
class ComponentSet:
    """Label array (0 = background) plus per-component summaries.

    Labels are renumbered so component k+1 is the k-th in lexicographic
    order of first voxel, making the labeling deterministic regardless
    of how the underlying sweep orders its work.
    """

    labels: np.ndarray
    components: tuple

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class SampleScore:
    """Per-sample metrics; entries are None where the ground truth kind
    does not define them (no mask: no dice; empty gt: no precision,
    recall, or F1)."""

    precision: float = None
    recall: float = None
    f1: float = None
    dice: float = None
    max_iou: float = None


def _structure(connectivity):
    if connectivity == 6:
        return ndimage.generate_binary_structure(3, 1)
    if connectivity == 26:
        return ndimage.generate_binary_structure(3, 3)
    raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")


def connected_components(mask, connectivity=26, heatmap=None):
    """Label a binary mask into its connected components.

    Components are ordered (and numbered from 1) by the flat index of
    their first voxel.  When a heatmap is given, each component records
    its maximum heatmap value.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_structure(connectivity))
    if count == 0:
        return ComponentSet(labels=labels, components=())

    flat = labels.ravel()
    values, first = np.unique(flat, return_index=True)
    keep = values != 0
    order = np.argsort(first[keep])
    remap = np.zeros(count + 1, dtype=labels.dtype)
    remap[values[keep][order]] = np.arange(1, count + 1)
    labels = remap[labels]

    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    boxes = ndimage.find_objects(labels)
    if heatmap is not None:
        peaks = ndimage.maximum(np.asarray(heatmap), labels, np.arange(1, count + 1))
        peaks = np.atleast_1d(peaks)
    components = []
    for k in range(1, count + 1):
        sl = boxes[k - 1]
        bbox = (
            tuple(s.start for s in sl),
            tuple(s.stop - 1 for s in sl),
        )
        peak = float(peaks[k - 1]) if heatmap is not None else None
        components.append(Component(label=k, size=int(sizes[k]), bbox=bbox, peak=peak))
    return ComponentSet(labels=labels, components=tuple(components))


def binarize(heatmap, tau, tau_prime, connectivity=26):
    """Two-threshold binarization of a heatmap.

    Voxels >= tau_prime form candidate components; a component survives
    iff its heatmap maximum is >= tau.  Because tau_prime < tau, the
    mask is non-empty exactly when the heatmap maximum reaches tau, so
    the sample-level label induced by tau alone is never changed.
    """
    if not tau_prime < tau:
        raise ValueError(f"need tau_prime < tau, got {tau_prime} >= {tau}")
    heat = np.asarray(heatmap)
    rough = heat >= tau_prime
    comps = connected_components(rough, connectivity, heatmap=heat)
    keep = np.zeros(len(comps) + 1, dtype=bool)
    for comp in comps.components:
        keep[comp.label] = comp.peak >= tau
    return keep[comps.labels]


def weighted_balanced_accuracy(predictions, labels, weight=SENSITIVITY_WEIGHT):
    """(w * sensitivity + specificity) / (w + 1); needs both classes."""
    predictions = np.asarray(predictions, dtype=bool)
    labels = np.asarray(labels, dtype=bool)
    pos = labels.sum()
    neg = len(labels) - pos
    if pos == 0 or neg == 0:
        raise ValueError("both classes must be present")
    sensitivity = (predictions & labels).sum() / pos
    specificity = (~predictions & ~labels).sum() / neg
    return (weight * sensitivity + specificity) / (weight + 1.0)


def select_tau(maxima_and_labels, weight=SENSITIVITY_WEIGHT):
    """Detection threshold maximizing weighted balanced accuracy.

    Candidates are the midpoints between consecutive distinct heatmap
    maxima plus -inf and +inf; a sample is predicted positive when its
    maximum is >= tau.  Ties break toward the larger threshold.
    """
    maxima = np.array([m for m, _ in maxima_and_labels], dtype=np.float64)
    labels = np.array([y for _, y in maxima_and_labels], dtype=bool)
    if not (labels.any() and (~labels).any()):
        raise ValueError("both classes must be present to pick a threshold")
    distinct = np.unique(maxima)
    candidates = np.concatenate(
        ([-np.inf], (distinct[:-1] + distinct[1:]) / 2.0, [np.inf])
    )
    best_tau = None
    best = -np.inf
    for tau in candidates:
        score = weighted_balanced_accuracy(maxima >= tau, labels, weight)
        if score >= best:
            best = score
            best_tau = float(tau)
    return best_tau


def default_tau_prime_candidates(heatmaps, tau, count=TAU_PRIME_CANDIDATES):
    """count evenly spaced candidates in [min heatmap value, tau)."""
    lo = min(float(np.min(h)) for h in heatmaps)
    if not lo < tau:
        raise ValueError(f"no room below tau: min heatmap value {lo} >= tau {tau}")
    return np.linspace(lo, tau, num=count, endpoint=False)


def select_tau_prime(samples, tau, candidates, connectivity=26):
    """Extension threshold maximizing mean dice (or best-box IoU).

    samples: LabeledSample list; ones with a mask score by dice, ones
    with only a box by the maximum predicted-box IoU, ones with neither
    are skipped.  Ties break toward the larger candidate.
    """
    candidates = np.asarray(candidates, dtype=np.float64)
    if len(candidates) == 0:
        raise ValueError("empty tau_prime candidate set")
    if not np.all(candidates < tau):
        raise ValueError("every tau_prime candidate must be < tau")
    scored = [s for s in samples if s.mask is not None or s.box is not None]
    if not scored:
        raise ValueError("no calibration sample carries a mask or box")
    best_tp = None
    best = -np.inf
    for tau_prime in np.sort(candidates):
        total = 0.0
        for sample in scored:
            pred = binarize(sample.heatmap, tau, tau_prime, connectivity)
            if sample.mask is not None:
                total += mask_dice(pred, sample.mask)
            else:
                comps = connected_components(pred, connectivity, sample.heatmap)
                score = score_against_box(comps, sample.box)
                total += score.max_iou
        mean = total / len(scored)
        if mean >= best:
            best = mean
            best_tp = float(tau_prime)
    return best_tp


def mask_dice(a, b):
    """Dice overlap of two binary masks; two empty masks count as 1."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a & b).sum()) / denom


def box_iou(box_a, box_b):
    """IoU of two axis-aligned boxes with inclusive integer corners."""
    (a_lo, a_hi), (b_lo, b_hi) = box_a, box_b
    inter = 1
    vol_a = 1
    vol_b = 1
    for lo_a, hi_a, lo_b, hi_b in zip(a_lo, a_hi, b_lo, b_hi):
        inter *= max(0, min(hi_a, hi_b) - max(lo_a, lo_b) + 1)
        vol_a *= hi_a - lo_a + 1
        vol_b *= hi_b - lo_b + 1
    union = vol_a + vol_b - inter
    return inter / union if union else 0.0


def _f1(precision, recall):
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def match_and_score(pred, gt, min_iou=MATCH_MIN_IOU):
    """Component matching between predicted and ground-truth masks.

    pred and gt are ComponentSets over the same shape.  A predicted
    component is a true positive iff some gt component has voxel IoU
    strictly greater than min_iou with it; a gt component is missed iff
    no predicted component exceeds min_iou.  On empty ground truth,
    precision, recall, and F1 are left as None; dice is always reported.
    """
    n_pred = len(pred)
    n_gt = len(gt)
    dice = mask_dice(pred.labels != 0, gt.labels != 0)
    if n_gt == 0:
        return SampleScore(dice=dice)
    if n_pred == 0:
        return SampleScore(precision=0.0, recall=0.0, f1=0.0, dice=dice)

    joint = pred.labels.ravel().astype(np.int64) * (n_gt + 1) + gt.labels.ravel()
    counts = np.bincount(joint, minlength=(n_pred + 1) * (n_gt + 1))
    inter = counts.reshape(n_pred + 1, n_gt + 1)[1:, 1:].astype(np.float64)
    sizes_pred = np.array([c.size for c in pred.components], dtype=np.float64)
    sizes_gt = np.array([c.size for c in gt.components], dtype=np.float64)
    union = sizes_pred[:, None] + sizes_gt[None, :] - inter
    iou = inter / union
    matched = iou > min_iou

    tp = int(matched.any(axis=1).sum())
    found = int(matched.any(axis=0).sum())
    precision = tp / n_pred
    recall = found / n_gt
    return SampleScore(precision=precision, recall=recall, f1=_f1(precision, recall), dice=dice)


def score_against_box(pred, gt_box, min_iou=MATCH_MIN_IOU):
    """Box-only scoring: component bounding boxes against one gt box.

    Reports the maximum IoU over predicted boxes in place of dice, with
    precision/recall/F1 from the same strictly-greater matching rule.
    """
    ious = [box_iou(c.bbox, gt_box) for c in pred.components]
    max_iou = max(ious, default=0.0)
    if not pred.components:
        return SampleScore(precision=0.0, recall=0.0, f1=0.0, max_iou=0.0)
    tp = sum(1 for v in ious if v > min_iou)
    precision = tp / len(ious)
    recall = 1.0 if tp else 0.0
    return SampleScore(
        precision=precision, recall=recall, f1=_f1(precision, recall), max_iou=max_iou
    )


def _score_sample(sample, tau, tau_prime, connectivity):
    heat = sample.heatmap
    predicted = bool(np.max(heat) >= tau)
    pred_mask = binarize(heat, tau, tau_prime, connectivity)
    pred_set = connected_components(pred_mask, connectivity, heat)
    if sample.mask is not None:
        gt_set = connected_components(sample.mask, connectivity)
        return predicted, match_and_score(pred_set, gt_set)
    if sample.box is not None:
        return predicted, score_against_box(pred_set, sample.box)
    return predicted, SampleScore()


def _mean(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def monte_carlo_eval(
    samples,
    folds=10,
    calibration_masks=5,
    seed=0,
    connectivity=26,
    candidate_count=TAU_PRIME_CANDIDATES,
    weight=SENSITIVITY_WEIGHT,
):
    """Monte-Carlo cross-validated segmentation report.

    Each fold shuffles the dataset, optimizes tau on the first half's
    heatmap maxima and tau_prime on up to calibration_masks randomly
    chosen annotated samples of that half, then scores the second half.
    Per-fold metrics are sample means (precision/recall/F1 over samples
    with non-empty ground truth); balanced accuracy uses equal weights.
    Fully deterministic for a given seed.

    Returns a JSON-ready dict: {"folds": [...], "aggregate": {...}}.
    """
    samples = list(samples)
    reports = []
    for fold in range(folds):
        rng = np.random.default_rng((seed, fold))
        order = rng.permutation(len(samples))
        half = len(samples) // 2
        calib = [samples[i] for i in order[:half]]
        held = [samples[i] for i in order[half:]]

        calib_labels = [s.label for s in calib]
        held_labels = [s.label for s in held]
        for name, labels in (("calibration", calib_labels), ("scoring", held_labels)):
            if len(set(labels)) < 2:
                raise ValueError(
                    f"fold {fold}: {name} half lacks one of the classes"
                )

        tau = select_tau([(float(np.max(s.heatmap)), s.label) for s in calib], weight)
        if not np.isfinite(tau):
            # all calibration maxima identical: fall back to the smallest
            # maximum, which predicts the same labels on this half
            tau = min(float(np.max(s.heatmap)) for s in calib)

        annotated = [i for i, s in enumerate(calib) if s.mask is not None or s.box is not None]
        if not annotated:
            raise ValueError(f"fold {fold}: no annotated sample to calibrate tau_prime")
        take = min(calibration_masks, len(annotated))
        chosen = rng.choice(len(annotated), size=take, replace=False)
        chosen_samples = [calib[annotated[i]] for i in chosen]
        candidates = default_tau_prime_candidates(
            [s.heatmap for s in chosen_samples], tau, candidate_count
        )
        tau_prime = select_tau_prime(chosen_samples, tau, candidates, connectivity)

        predictions = []
        scores = []
        for sample in held:
            predicted, score = _score_sample(sample, tau, tau_prime, connectivity)
            predictions.append(predicted)
            scores.append(score)
        ba = weighted_balanced_accuracy(predictions, held_labels, weight=1.0)
        reports.append(
            {
                "fold": fold,
                "tau": tau,
                "tau_prime": tau_prime,
                "precision": _mean([s.precision for s in scores]),
                "recall": _mean([s.recall for s in scores]),
                "f1": _mean([s.f1 for s in scores]),
                "dice": _mean([s.dice for s in scores]),
                "max_iou": _mean([s.max_iou for s in scores]),
                "balanced_accuracy": float(ba),
            }
        )

    metrics = ("precision", "recall", "f1", "dice", "max_iou", "balanced_accuracy")
    aggregate = {name: _mean([r[name] for r in reports]) for name in metrics}
    return {"folds": reports, "aggregate": aggregate}
