"""Forward simulation over abduced state: when and where does a hidden
track leave its occluder, and should the ego vehicle be warned.

Both the hidden track and its occluder are dead-reckoned with their
estimated velocities; with a static occluder this reduces to the plain
moving-out rule.  Positions are anchored at the box corner (x, y).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .geometry import BBox2D, in_front_region, proper_part

__all__ = [
    "TrackView",
    "Anticipation",
    "Warning_",
    "interpolated_position",
    "anticipate_unhide",
    "warnings",
    "engine_views",
    "format_anticipation",
    "format_warning",
]


@dataclass(frozen=True)
class TrackView:
    """Minimal per-track state the queries need: current (dead-reckoned)
    box and estimated velocity in px/frame."""

    box: BBox2D
    velocity: tuple[float, float]


@dataclass(frozen=True)
class Anticipation:
    track: int
    occluder: int
    frame: int
    position: tuple[float, float]


@dataclass(frozen=True)
class Warning_:
    track: int
    frame: int
    position: tuple[float, float]


def interpolated_position(view: TrackView, current_frame: int, frame: int) -> tuple[float, float]:
    """Linear position estimate: corner + velocity * (frame - current)."""
    if frame <= current_frame:
        raise ValueError("interpolation frame must lie in the future")
    dt = frame - current_frame
    vx, vy = view.velocity
    return (view.box.x + vx * dt, view.box.y + vy * dt)


def anticipate_unhide(
    views: Mapping[int, TrackView],
    hidden_pairs: set[tuple[int, int]],
    current_frame: int,
    horizon: int = 60,
) -> list[Anticipation]:
    """Earliest future frame within the horizon at which each hidden
    track's dead-reckoned box stops being a proper part of its occluder's
    dead-reckoned box; omitted when it never does."""
    out: list[Anticipation] = []
    for t1, t2 in sorted(hidden_pairs):
        if t1 not in views or t2 not in views:
            continue
        hidden, occluder = views[t1], views[t2]
        if not proper_part(hidden.box, occluder.box):
            continue
        for k in range(1, horizon + 1):
            b1 = hidden.box.translated(hidden.velocity[0] * k, hidden.velocity[1] * k)
            b2 = occluder.box.translated(
                occluder.velocity[0] * k, occluder.velocity[1] * k
            )
            if not proper_part(b1, b2):
                out.append(
                    Anticipation(
                        track=t1,
                        occluder=t2,
                        frame=current_frame + k,
                        position=interpolated_position(
                            hidden, current_frame, current_frame + k
                        ),
                    )
                )
                break
    return out


def warnings(
    anticipations: list[Anticipation],
    current_frame: int,
    frame_geom: tuple[float, float],
    anticipation_threshold: int = 20,
) -> list[Warning_]:
    """One warning per anticipated reappearance that is both imminent
    (within the anticipation threshold) and inside the ego corridor."""
    out = []
    for a in anticipations:
        if a.frame - current_frame < anticipation_threshold and in_front_region(
            a.position, frame_geom
        ):
            out.append(Warning_(track=a.track, frame=a.frame, position=a.position))
    return out


def engine_views(engine) -> tuple[dict[int, TrackView], set[tuple[int, int]]]:
    """Snapshot an engine's live tracks as TrackViews plus the hidden
    pairs currently in force."""
    views: dict[int, TrackView] = {}
    for tid in engine.fluents.tracks():
        box = engine.predicted_box(tid)
        if box is None:
            box = engine.tracks[tid].filter.current_box()
        views[tid] = TrackView(box=box, velocity=engine.tracks[tid].filter.velocity())
    return views, engine.fluents.hidden_pairs()


def format_anticipation(a: Anticipation) -> str:
    return f"anticipate(unhides_from_behind(trk_{a.track}, trk_{a.occluder}), {a.frame})"


def format_position(a: Anticipation) -> str:
    x, y = int(round(a.position[0])), int(round(a.position[1]))
    return f"point2d(interpolated_position(trk_{a.track}, {a.frame}), {x}, {y})"


def format_warning(w: Warning_) -> str:
    return f"warning(hidden_entity_in_front(trk_{w.track}, {w.frame}))"
