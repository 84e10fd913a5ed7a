"""Shared test helpers: random boxes and randomized solver instances.

Random specs only produce fluent configurations the engine can actually
reach (active tracks are visible and unclipped; halted tracks are either
hidden behind a then-visible occluder or clipped).
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from abdtrack import (
    BBox2D,
    Detection,
    FluentStore,
    ProblemSpec,
    Thresholds,
    TrackPrediction,
    TrackState,
)
from abdtrack.domain import EventKind, EventOccurrence, Visibility, apply_event


def random_box(rng: np.random.Generator, span: float = 300.0) -> BBox2D:
    x = float(rng.uniform(-40, span))
    y = float(rng.uniform(-40, span))
    w = float(rng.uniform(6, 90))
    h = float(rng.uniform(6, 90))
    return BBox2D(x, y, w, h)


def make_random_spec(
    rng: np.random.Generator,
    max_tracks: int = 5,
    max_dets: int = 5,
    thresholds: Thresholds | None = None,
) -> ProblemSpec:
    from abdtrack.geometry import scaled_iou

    classes = ["car", "person", "bus"]
    n_t = int(rng.integers(0, max_tracks + 1))
    n_d = int(rng.integers(0, max_dets + 1))
    if thresholds is None:
        thresholds = Thresholds(
            iou_thresh=float(rng.choice([0.0, 0.1, 0.3])),
            conf_thresh_assign=int(rng.choice([10, 30])),
            conf_thresh_resume=int(rng.choice([30, 50])),
            conf_thresh_new_track=int(rng.choice([40, 50, 70])),
            size_threshold=float(rng.choice([50.0, 100.0])),
        )

    track_ids = sorted(int(t) for t in rng.choice(60, size=n_t, replace=False))
    fluents = FluentStore()
    preds: dict[int, TrackPrediction] = {}
    for tid in track_ids:
        fluents.register_track(tid)
    for tid in track_ids:
        box = random_box(rng)
        if rng.random() < 0.35:
            state = TrackState.HALTED
            age = int(rng.integers(0, 40))
        else:
            state = TrackState.ACTIVE
            age = 0
        preds[tid] = TrackPrediction(
            box=box, state=state, cls=str(rng.choice(classes)), halted_age=age
        )
    for tid in track_ids:
        if preds[tid].state != TrackState.HALTED:
            continue
        visible_others = [
            t
            for t in track_ids
            if t != tid and fluents.visibility(t) == Visibility.FULLY_VISIBLE
        ]
        if visible_others and rng.random() < 0.5:
            occ = int(rng.choice(visible_others))
            apply_event(fluents, EventOccurrence(EventKind.HIDES_BEHIND, 0, tid, occluder=occ))
        else:
            apply_event(fluents, EventOccurrence(EventKind.MISSING_DETECTIONS, 0, tid))

    dets: list[Detection] = []
    for j in range(n_d):
        roll = rng.random()
        if track_ids and roll < 0.55:
            src = preds[int(rng.choice(track_ids))].box
            box = BBox2D(
                src.x + float(rng.uniform(-10, 10)),
                src.y + float(rng.uniform(-10, 10)),
                max(4.0, src.w + float(rng.uniform(-6, 6))),
                max(4.0, src.h + float(rng.uniform(-6, 6))),
            )
        elif dets and roll < 0.70:
            box = dets[int(rng.integers(0, len(dets)))].box  # exact tie bait
        else:
            box = random_box(rng)
        dets.append(
            Detection(j, str(rng.choice(classes)), int(rng.integers(0, 101)), box)
        )

    likelihoods = {}
    for tid, pred in preds.items():
        for det in dets:
            ml = scaled_iou(pred.box, det.box)
            if ml > 0:
                likelihoods[(tid, det.id)] = ml

    return ProblemSpec(
        frame=int(rng.integers(1, 500)),
        detections=tuple(dets),
        predictions=preds,
        likelihoods=likelihoods,
        fluents=fluents,
        config=thresholds,
        frame_geom=(320.0, 320.0),
    )
