"""Scene ontology: detections, tracks, events, and the fluent store.

Fluents (per track unless noted): visibility in {fully_visible,
partially_visible, not_visible}, hidden_by (per ordered track pair,
boolean), clipped (boolean), in_fov (boolean).  Values persist by inertia
until an event changes them.  At track birth: fully_visible, not hidden by
anything, not clipped, in the field of view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional

from .geometry import BBox2D, overlapping_top
from .motion import MotionFilter

__all__ = [
    "Detection",
    "TrackState",
    "Provenance",
    "HistoryEntry",
    "Track",
    "Visibility",
    "EventKind",
    "EventOccurrence",
    "FluentStore",
    "PossibleContext",
    "EngineBugError",
    "holds_at",
    "apply_event",
    "possible",
]


class EngineBugError(RuntimeError):
    """An internal consistency violation, e.g. querying an unknown track."""


@dataclass(frozen=True, slots=True)
class Detection:
    """One observed object in a frame: per-frame index, class, confidence
    as an integer percent, and bounding box."""

    id: int
    cls: str
    conf: int
    box: BBox2D

    def __post_init__(self) -> None:
        if not 0 <= self.conf <= 100:
            raise ValueError(f"confidence out of range: {self.conf}")


class TrackState(Enum):
    ACTIVE = "active"
    HALTED = "halted"
    ENDED = "ended"


class Provenance(Enum):
    OBSERVED = "observed"
    INTERPOLATED = "interpolated"


@dataclass(frozen=True, slots=True)
class HistoryEntry:
    frame: int
    box: BBox2D
    provenance: Provenance
    conf: int = 100


@dataclass
class Track:
    """Hypothesized scene object with lifecycle state and motion history."""

    id: int
    cls: str
    state: TrackState
    history: list[HistoryEntry]
    filter: MotionFilter
    born_frame: int
    halted_since: Optional[int] = None

    def last_observed(self) -> HistoryEntry:
        return self.history[-1]

    def halted_age(self, frame: int) -> int:
        if self.halted_since is None:
            return 0
        return frame - self.halted_since


class Visibility(str, Enum):
    FULLY_VISIBLE = "fully_visible"
    PARTIALLY_VISIBLE = "partially_visible"  # declared, never assigned
    NOT_VISIBLE = "not_visible"


class EventKind(IntEnum):
    """High-level abducibles.  Integer values fix the deterministic
    preference order used when several events can explain one action."""

    HIDES_BEHIND = 0
    MISSING_DETECTIONS = 1
    UNHIDES_FROM_BEHIND = 2
    RECOVER = 3
    LEAVES_FOV = 4
    LOST = 5
    ENTERS_FOV = 6
    NOISE = 7


@dataclass(frozen=True, slots=True)
class EventOccurrence:
    """An event instance at a frame.

    subject is a track id, except when subject_is_det is set (noise on an
    ignored detection, or an enters_fov still pending its track id at
    solve time; the tracker rewrites the latter to the allocated id).
    """

    kind: EventKind
    frame: int
    subject: int
    occluder: Optional[int] = None
    subject_is_det: bool = False

    def pretty(self) -> str:
        name = "det" if self.subject_is_det else "trk"
        args = f"{name}_{self.subject}"
        if self.occluder is not None:
            args += f",trk_{self.occluder}"
        return f"{self.kind.name.lower()}({args})"


class FluentStore:
    """Current fluent values for live tracks, with inertia semantics.

    Owned by one engine instance and mutated only between solves;
    snapshots may be shared read-only.
    """

    def __init__(self) -> None:
        self._visibility: dict[int, Visibility] = {}
        self._clipped: dict[int, bool] = {}
        self._in_fov: dict[int, bool] = {}
        self._hidden_pairs: set[tuple[int, int]] = set()

    # -- lifecycle ---------------------------------------------------

    def register_track(self, tid: int) -> None:
        self._visibility[tid] = Visibility.FULLY_VISIBLE
        self._clipped[tid] = False
        self._in_fov[tid] = True

    def drop_track(self, tid: int) -> None:
        self._visibility.pop(tid, None)
        self._clipped.pop(tid, None)
        self._in_fov.pop(tid, None)
        self._hidden_pairs = {p for p in self._hidden_pairs if tid not in p}

    def tracks(self) -> set[int]:
        return set(self._visibility)

    def copy(self) -> "FluentStore":
        out = FluentStore()
        out._visibility = dict(self._visibility)
        out._clipped = dict(self._clipped)
        out._in_fov = dict(self._in_fov)
        out._hidden_pairs = set(self._hidden_pairs)
        return out

    # -- queries -----------------------------------------------------

    def _check(self, tid: int) -> None:
        if tid not in self._visibility:
            raise EngineBugError(f"fluent query for unknown track {tid}")

    def visibility(self, tid: int) -> Visibility:
        self._check(tid)
        return self._visibility[tid]

    def clipped(self, tid: int) -> bool:
        self._check(tid)
        return self._clipped[tid]

    def in_fov(self, tid: int) -> bool:
        self._check(tid)
        return self._in_fov[tid]

    def hidden_by(self, t1: int, t2: int) -> bool:
        self._check(t1)
        self._check(t2)
        return (t1, t2) in self._hidden_pairs

    def hidden_pairs(self) -> set[tuple[int, int]]:
        return set(self._hidden_pairs)

    def occluder_of(self, tid: int) -> list[int]:
        """Tracks t2 with hidden_by(tid, t2) = true, ascending."""
        return sorted(t2 for (t1, t2) in self._hidden_pairs if t1 == tid)


def holds_at(store: FluentStore, fluent: str, *args: int):
    """Generic fluent query: holds_at(store, "visibility", tid) etc."""
    if fluent == "visibility":
        return store.visibility(*args)
    if fluent == "clipped":
        return store.clipped(*args)
    if fluent == "in_fov":
        return store.in_fov(*args)
    if fluent == "hidden_by":
        return store.hidden_by(*args)
    raise EngineBugError(f"unknown fluent {fluent!r}")


def apply_event(store: FluentStore, e: EventOccurrence) -> FluentStore:
    """Apply one event's effects atomically; mutates and returns store.

    hides_behind: visibility(T1)=not_visible, hidden_by(T1,T2)=true.
    unhides_from_behind: visibility(T1)=fully_visible, hidden_by=false.
    missing_detections: clipped=true.       recover: clipped=false.
    leaves_fov: in_fov=false.               enters_fov: in_fov=true.
    lost / noise: no fluent effects (lifecycle only).
    """
    k = e.kind
    if k == EventKind.HIDES_BEHIND:
        store._visibility[e.subject] = Visibility.NOT_VISIBLE
        store._hidden_pairs.add((e.subject, e.occluder))
    elif k == EventKind.UNHIDES_FROM_BEHIND:
        store._visibility[e.subject] = Visibility.FULLY_VISIBLE
        store._hidden_pairs.discard((e.subject, e.occluder))
    elif k == EventKind.MISSING_DETECTIONS:
        store._clipped[e.subject] = True
    elif k == EventKind.RECOVER:
        store._clipped[e.subject] = False
    elif k == EventKind.LEAVES_FOV:
        store._in_fov[e.subject] = False
    elif k == EventKind.ENTERS_FOV:
        if not e.subject_is_det:
            store._in_fov[e.subject] = True
    # LOST, NOISE: no effects
    return store


def touched_fluents(e: EventOccurrence) -> frozenset[tuple]:
    """Fluent instances an event writes; used to assert per-frame
    event sets touch pairwise-disjoint instances."""
    k = e.kind
    if k == EventKind.HIDES_BEHIND or k == EventKind.UNHIDES_FROM_BEHIND:
        return frozenset(
            {("visibility", e.subject), ("hidden_by", e.subject, e.occluder)}
        )
    if k == EventKind.MISSING_DETECTIONS or k == EventKind.RECOVER:
        return frozenset({("clipped", e.subject)})
    if k == EventKind.LEAVES_FOV:
        return frozenset({("in_fov", e.subject)})
    if k == EventKind.ENTERS_FOV and not e.subject_is_det:
        return frozenset({("in_fov", e.subject)})
    return frozenset()


@dataclass
class PossibleContext:
    """Geometric and lifecycle context needed by event preconditions."""

    predicted: dict[int, BBox2D] = field(default_factory=dict)
    halted_age: dict[int, int] = field(default_factory=dict)
    frame_geom: Optional[tuple[float, float]] = None
    fov_margin: float = 10.0
    max_halted_age: int = 30


def _at_fov_boundary(box: BBox2D, ctx: PossibleContext) -> bool:
    if ctx.frame_geom is None:
        return False
    w, h = ctx.frame_geom
    m = ctx.fov_margin
    return box.x < m or box.y < m or box.x2 > w - m or box.y2 > h - m


def _intersects_frame(box: BBox2D, ctx: PossibleContext) -> bool:
    if ctx.frame_geom is None:
        return True
    w, h = ctx.frame_geom
    return box.x2 > 0 and box.y2 > 0 and box.x < w and box.y < h


def possible(
    store: FluentStore,
    ctx: PossibleContext,
    e: EventOccurrence,
    det_box: Optional[BBox2D] = None,
) -> bool:
    """Event precondition check against the pre-solve fluent state.

    hides_behind(T1,T2): predicted boxes overlap with T2's bottom edge at
    or below T1's, and neither track is already not_visible.
    unhides_from_behind(T1,T2): T1 not_visible, T2 not not_visible.
    missing_detections(T): not clipped and not not_visible.
    recover(T): clipped.
    leaves_fov(T): predicted box touches the frame boundary margin.
    enters_fov: the (detection) box intersects the frame.
    lost(T): the track has been halted longer than max_halted_age.
    noise: always possible.
    """
    k = e.kind
    if k == EventKind.HIDES_BEHIND:
        t1, t2 = e.subject, e.occluder
        if t1 == t2:
            return False
        if store.visibility(t1) == Visibility.NOT_VISIBLE:
            return False
        if store.visibility(t2) == Visibility.NOT_VISIBLE:
            return False
        return overlapping_top(ctx.predicted[t1], ctx.predicted[t2])
    if k == EventKind.UNHIDES_FROM_BEHIND:
        return (
            store.visibility(e.subject) == Visibility.NOT_VISIBLE
            and store.visibility(e.occluder) != Visibility.NOT_VISIBLE
        )
    if k == EventKind.MISSING_DETECTIONS:
        return (
            not store.clipped(e.subject)
            and store.visibility(e.subject) != Visibility.NOT_VISIBLE
        )
    if k == EventKind.RECOVER:
        return store.clipped(e.subject)
    if k == EventKind.LEAVES_FOV:
        return _at_fov_boundary(ctx.predicted[e.subject], ctx)
    if k == EventKind.ENTERS_FOV:
        if det_box is not None:
            return _intersects_frame(det_box, ctx)
        return True
    if k == EventKind.LOST:
        return ctx.halted_age.get(e.subject, 0) > ctx.max_halted_age
    if k == EventKind.NOISE:
        return True
    raise EngineBugError(f"unknown event kind {k}")
