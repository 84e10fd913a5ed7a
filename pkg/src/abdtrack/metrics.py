"""CLEAR-MOT evaluation: MOTA, MOTP, MT/ML, FP/FN, identity switches and
fragmentations.

Per frame, matches from the previous frame persist while their IoU stays
at or above the matching threshold; the remainder is matched by a
maximum-total-IoU assignment (admissible pairs only), preferring more
matches and then lowest gt id on exact ties.  MOTP is the mean IoU over
matched pairs, reported as a percentage.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import BBox2D, iou

__all__ = ["TrackBoxes", "EvalReport", "evaluate", "format_report"]

# track id -> frame -> box
TrackBoxes = dict[int, dict[int, BBox2D]]


@dataclass
class EvalReport:
    mota: float  # percent, may be negative
    motp: float  # percent (mean IoU over matches)
    mt: float  # percent of gt tracks covered >= 80%
    ml: float  # percent of gt tracks covered <= 20%
    fp: int
    fn: int
    idsw: int
    frag: int
    num_gt_boxes: int
    matches: list[tuple[int, int, int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "MOTA": self.mota,
            "MOTP": self.motp,
            "MT": self.mt,
            "ML": self.ml,
            "FP": self.fp,
            "FN": self.fn,
            "IDSW": self.idsw,
            "Frag": self.frag,
            "num_gt_boxes": self.num_gt_boxes,
        }


def _frames_of(tracks: TrackBoxes) -> set[int]:
    out: set[int] = set()
    for boxes in tracks.values():
        out |= set(boxes)
    return out


def evaluate(gt: TrackBoxes, hyp: TrackBoxes, match_iou: float = 0.5) -> EvalReport:
    """Score a hypothesis track set against ground truth.

    Raises ValueError when the hypothesis claims frames outside the
    ground-truth frame range.
    """
    gt_frames = _frames_of(gt)
    hyp_frames = _frames_of(hyp)
    if gt_frames and hyp_frames:
        lo, hi = min(gt_frames), max(gt_frames)
        outside = [f for f in hyp_frames if f < lo or f > hi]
        if outside:
            raise ValueError(
                f"frame-range mismatch: hypothesis frames {sorted(outside)[:5]} "
                f"outside ground-truth range [{lo}, {hi}]"
            )

    frames = sorted(gt_frames | hyp_frames)
    prev_match: dict[int, int] = {}  # gt id -> hyp id at previous frame
    last_match: dict[int, int] = {}  # gt id -> last hyp id ever matched
    covered: dict[int, int] = {g: 0 for g in gt}  # matched-frame counts
    present: dict[int, int] = {g: len(v) for g, v in gt.items()}
    was_matched_then_gap: dict[int, bool] = {g: False for g in gt}

    fp = fn = idsw = frag = 0
    iou_sum = 0.0
    n_matches = 0
    num_gt_boxes = sum(present.values())
    match_log: list[tuple[int, int, int, float]] = []

    for f in frames:
        gt_ids = sorted(g for g in gt if f in gt[g])
        hyp_ids = sorted(h for h in hyp if f in hyp[h])
        matches: dict[int, int] = {}

        # Persist still-valid previous matches.
        for g, h in prev_match.items():
            if g in gt and f in gt[g] and h in hyp and f in hyp[h]:
                v = iou(gt[g][f], hyp[h][f])
                if v >= match_iou:
                    matches[g] = h

        free_g = [g for g in gt_ids if g not in matches]
        used_h = set(matches.values())
        free_h = [h for h in hyp_ids if h not in used_h]
        matches.update(_residual_match(gt, hyp, f, free_g, free_h, match_iou))

        for g, h in sorted(matches.items()):
            v = iou(gt[g][f], hyp[h][f])
            iou_sum += v
            n_matches += 1
            covered[g] += 1
            match_log.append((f, g, h, v))
            if g in last_match and last_match[g] != h:
                idsw += 1
            if was_matched_then_gap.get(g):
                frag += 1
                was_matched_then_gap[g] = False
            last_match[g] = h

        matched_g = set(matches)
        matched_h = set(matches.values())
        fn += len([g for g in gt_ids if g not in matched_g])
        fp += len([h for h in hyp_ids if h not in matched_h])
        for g in gt_ids:
            if g not in matched_g and covered[g] > 0:
                was_matched_then_gap[g] = True
        prev_match = matches

    mota = 100.0 * (1.0 - (fn + fp + idsw) / num_gt_boxes) if num_gt_boxes else 100.0
    motp = 100.0 * iou_sum / n_matches if n_matches else 0.0
    n_tracks = len(gt)
    mt = (
        100.0 * sum(1 for g in gt if covered[g] >= 0.8 * present[g]) / n_tracks
        if n_tracks
        else 0.0
    )
    ml = (
        100.0 * sum(1 for g in gt if covered[g] <= 0.2 * present[g]) / n_tracks
        if n_tracks
        else 0.0
    )
    return EvalReport(
        mota=mota,
        motp=motp,
        mt=mt,
        ml=ml,
        fp=fp,
        fn=fn,
        idsw=idsw,
        frag=frag,
        num_gt_boxes=num_gt_boxes,
        matches=match_log,
    )


def _residual_match(
    gt: TrackBoxes,
    hyp: TrackBoxes,
    f: int,
    free_g: list[int],
    free_h: list[int],
    match_iou: float,
) -> dict[int, int]:
    """Maximum-total-IoU assignment over the still-unmatched boxes.

    Weights are scaled to integers so exact ties resolve deterministically:
    primary total IoU, then more matches, then lowest (gt, hyp) rank.
    """
    if not free_g or not free_h:
        return {}
    n_g, n_h = len(free_g), len(free_h)
    n2 = n_g * n_h + 1
    weight = np.zeros((n_g, n_h))
    admissible = np.zeros((n_g, n_h), dtype=bool)
    for i, g in enumerate(free_g):
        for j, h in enumerate(free_h):
            if f in hyp[h]:
                v = iou(gt[g][f], hyp[h][f])
                if v >= match_iou:
                    iou_int = int(round(v * 10_000_000))
                    weight[i, j] = iou_int * n2 + (n2 - 1 - (i * n_h + j))
                    admissible[i, j] = True
    if not admissible.any():
        return {}
    rows, cols = linear_sum_assignment(weight, maximize=True)
    out: dict[int, int] = {}
    for i, j in zip(rows, cols):
        if admissible[i, j]:
            out[free_g[int(i)]] = free_h[int(j)]
    return out


def format_report(report: EvalReport, name: str = "sequence") -> str:
    """Aligned text table in the benchmark-table shape."""
    header = (
        f"{'SEQUENCE':<16} {'MOTA':>8} {'MOTP':>8} {'ML':>7} {'MT':>7} "
        f"{'FP':>6} {'FN':>6} {'IDsw':>6} {'Frag':>6}"
    )
    row = (
        f"{name:<16} {report.mota:>7.2f}% {report.motp:>7.2f}% "
        f"{report.ml:>6.2f}% {report.mt:>6.2f}% {report.fp:>6d} "
        f"{report.fn:>6d} {report.idsw:>6d} {report.frag:>6d}"
    )
    return header + "\n" + row
