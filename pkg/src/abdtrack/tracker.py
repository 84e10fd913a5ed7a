"""Online tracking loop: per frame, build the problem spec, solve, apply
events, and update track lifecycles and histories.

One engine per stream; frames must arrive in strictly increasing order.
Track ids are globally monotone.  Halted tracks keep being dead-reckoned
so resume and anticipation have positions; a resume back-fills the halted
gap with linearly interpolated boxes flagged as such.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .abduction import (
    Action,
    ActionKind,
    ProblemSpec,
    SolveResult,
    Thresholds,
    TrackPrediction,
    solve,
)
from .domain import (
    Detection,
    EventKind,
    EventOccurrence,
    FluentStore,
    HistoryEntry,
    Provenance,
    Track,
    TrackState,
    apply_event,
)
from .geometry import IOU_SCALE, BBox2D, iou_matrix
from .motion import MotionFilter

__all__ = ["EngineConfig", "Explanation", "AbductionEngine"]


def _xywh(b: BBox2D) -> tuple[float, float, float, float]:
    return (b.x, b.y, b.w, b.h)


@dataclass(frozen=True)
class EngineConfig:
    thresholds: Thresholds = Thresholds()
    frame_geom: Optional[tuple[float, float]] = (1242.0, 375.0)


@dataclass
class Explanation:
    """Final output: tracks with full histories and the chronological
    abduced event sequence."""

    tracks: list[Track]
    events: list[EventOccurrence]


@dataclass
class _StepStats:
    frame: int
    solve_ms: float
    total_ms: float


class AbductionEngine:
    """Sequential online tracker for one detection stream."""

    def __init__(self, config: EngineConfig = EngineConfig()):
        self.config = config
        self.fluents = FluentStore()
        self.tracks: dict[int, Track] = {}
        self.events: list[EventOccurrence] = []
        self.latencies: list[_StepStats] = []
        self._next_id = 0
        self._last_frame: Optional[int] = None
        self._predicted: dict[int, BBox2D] = {}
        self._finalized: Optional[Explanation] = None
        self.last_spec: Optional[ProblemSpec] = None

    # -- main loop -----------------------------------------------------

    def step(self, frame: int, detections: Sequence[Detection]) -> SolveResult:
        """Process one frame; returns the per-frame solve result."""
        t0 = time.perf_counter()
        if self._finalized is not None:
            raise RuntimeError("engine already finalized")
        if self._last_frame is not None and frame <= self._last_frame:
            raise ValueError(
                f"frames must be strictly increasing: got {frame} after {self._last_frame}"
            )
        self._last_frame = frame

        spec = self._build_spec(frame, detections)
        self.last_spec = spec
        t1 = time.perf_counter()
        result = solve(spec)
        t2 = time.perf_counter()
        self._apply(frame, detections, result)
        t3 = time.perf_counter()
        self.latencies.append(
            _StepStats(frame, solve_ms=(t2 - t1) * 1e3, total_ms=(t3 - t0) * 1e3)
        )
        return result

    def _build_spec(self, frame: int, detections: Sequence[Detection]) -> ProblemSpec:
        self._predicted = {}
        predictions: dict[int, TrackPrediction] = {}
        for tid, trk in self.tracks.items():
            if trk.state == TrackState.ENDED:
                continue
            box = trk.filter.predict()
            self._predicted[tid] = box
            predictions[tid] = TrackPrediction(
                box=box,
                state=trk.state,
                cls=trk.cls,
                halted_age=trk.halted_age(frame),
            )
        likelihoods: dict[tuple[int, int], int] = {}
        if predictions and detections:
            tids = list(predictions)
            m = iou_matrix(
                np.array([_xywh(predictions[t].box) for t in tids]),
                np.array([_xywh(d.box) for d in detections]),
            )
            for i, j in zip(*np.nonzero(m > 0)):
                ml = int(round(IOU_SCALE * float(m[i, j])))
                if ml > 0:
                    likelihoods[(tids[int(i)], detections[int(j)].id)] = ml
        return ProblemSpec(
            frame=frame,
            detections=tuple(detections),
            predictions=predictions,
            likelihoods=likelihoods,
            fluents=self.fluents.copy(),
            config=self.config.thresholds,
            frame_geom=self.config.frame_geom,
        )

    def _apply(self, frame: int, detections: Sequence[Detection], result: SolveResult) -> None:
        dets = {d.id: d for d in detections}
        frame_events: list[EventOccurrence] = []

        for action in result.actions:
            event = action.event
            if action.kind == ActionKind.ASSIGN:
                self._observe(self.tracks[action.trk], frame, dets[action.det])
            elif action.kind == ActionKind.START:
                tid = self._start_track(frame, dets[action.det])
                event = EventOccurrence(EventKind.ENTERS_FOV, frame, tid)
            elif action.kind == ActionKind.RESUME:
                self._resume_track(self.tracks[action.trk], frame, dets[action.det])
            elif action.kind == ActionKind.HALT:
                trk = self.tracks[action.trk]
                trk.state = TrackState.HALTED
                trk.halted_since = frame
            elif action.kind == ActionKind.END:
                self._end_track(action.trk)
            # IGNORE_TRK / IGNORE_DET: no state change, noise event logged
            if event is not None:
                frame_events.append(event)

        for e in frame_events:
            if e.kind != EventKind.NOISE and not e.subject_is_det:
                apply_event(self.fluents, e)
        self.events.extend(frame_events)
        # leaves_fov implies the track ends; drop its fluents afterwards.
        for e in frame_events:
            if e.kind == EventKind.LEAVES_FOV or e.kind == EventKind.LOST:
                self.fluents.drop_track(e.subject)

    # -- lifecycle helpers ----------------------------------------------

    def _observe(self, trk: Track, frame: int, det: Detection) -> None:
        trk.filter.update(det.box)
        trk.history.append(HistoryEntry(frame, det.box, Provenance.OBSERVED, det.conf))

    def _start_track(self, frame: int, det: Detection) -> int:
        tid = self._next_id
        self._next_id += 1
        trk = Track(
            id=tid,
            cls=det.cls,
            state=TrackState.ACTIVE,
            history=[HistoryEntry(frame, det.box, Provenance.OBSERVED, det.conf)],
            filter=MotionFilter(det.box),
            born_frame=frame,
        )
        self.tracks[tid] = trk
        self.fluents.register_track(tid)
        return tid

    def _resume_track(self, trk: Track, frame: int, det: Detection) -> None:
        last = trk.history[-1]
        gap = frame - last.frame
        for k in range(1, gap):
            f = k / gap
            box = BBox2D(
                last.box.x + f * (det.box.x - last.box.x),
                last.box.y + f * (det.box.y - last.box.y),
                last.box.w + f * (det.box.w - last.box.w),
                last.box.h + f * (det.box.h - last.box.h),
            )
            trk.history.append(
                HistoryEntry(last.frame + k, box, Provenance.INTERPOLATED, 0)
            )
        trk.state = TrackState.ACTIVE
        trk.halted_since = None
        trk.filter.update(det.box)
        trk.history.append(HistoryEntry(frame, det.box, Provenance.OBSERVED, det.conf))

    def _end_track(self, tid: int) -> None:
        trk = self.tracks[tid]
        trk.state = TrackState.ENDED
        trk.halted_since = None

    # -- output ----------------------------------------------------------

    def finalize(self) -> Explanation:
        """Close out live tracks and return the accumulated explanation.

        Idempotent; end-of-stream closure is administrative and abduces no
        further events.
        """
        if self._finalized is None:
            for trk in self.tracks.values():
                if trk.state != TrackState.ENDED:
                    trk.state = TrackState.ENDED
                    self.fluents.drop_track(trk.id)
            self._finalized = Explanation(
                tracks=sorted(self.tracks.values(), key=lambda t: t.id),
                events=list(self.events),
            )
        return self._finalized

    # -- introspection for anticipation ----------------------------------

    def predicted_box(self, tid: int) -> Optional[BBox2D]:
        return self._predicted.get(tid)

    def current_frame(self) -> Optional[int]:
        return self._last_frame
