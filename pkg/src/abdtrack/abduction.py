"""Per-frame joint assignment and event abduction.

Every track and every detection must be covered by exactly one action:

    assign(trk, det) | start(det) | end(trk) | halt(trk)
    | resume(trk, det) | ignore_trk(trk) | ignore_det(det)

Candidate actions are generated choice-rule style and pruned by integrity
constraints; each non-assign action must additionally be explainable by at
least one possible high-level event.  The optimum is lexicographic:

    level 10 (maximize): sum of scaled IoU over assign pairs plus the
        number of assign actions (two equal-priority maximize terms);
    level  3 (minimize): 10 * (#ignore_det + #ignore_trk);
    level  2 (minimize): 5 * (#end + #start) + 1 * (#resume).

Ties are broken deterministically: lowest track id first, then lowest
detection id, then the fixed event-preference order of
:class:`~abdtrack.domain.EventKind`.

The solver reduces the cover problem to a maximum-weight bipartite
assignment (the per-action costs are independent once event preconditions
are evaluated against the pre-solve fluent state), folds the three
objective levels into one exact integer weight, and extracts the
tie-break-canonical optimum by fixing per-track actions in preference
order against re-solves.  ``solve_oracle`` exhaustively enumerates every
legal cover on small instances and must agree with ``solve``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .domain import (
    Detection,
    EngineBugError,
    EventKind,
    EventOccurrence,
    FluentStore,
    PossibleContext,
    TrackState,
    possible,
    touched_fluents,
)
from .geometry import IOU_SCALE, BBox2D

__all__ = [
    "Thresholds",
    "TrackPrediction",
    "ProblemSpec",
    "ActionKind",
    "Action",
    "SolveResult",
    "candidate_actions",
    "link_events",
    "solve",
    "solve_oracle",
    "emit_facts",
]


@dataclass(frozen=True)
class Thresholds:
    """Engine constants gating assignment, resume, and track creation.
    All values are configurable; the defaults are engine choices."""

    iou_thresh: float = 0.3
    conf_thresh_assign: int = 30
    conf_thresh_resume: int = 50
    conf_thresh_new_track: int = 50
    size_threshold: float = 100.0
    max_halted_age: int = 30
    anticipation_threshold: int = 20
    anticipation_horizon: int = 60
    fov_margin: float = 10.0
    class_aliases: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.iou_thresh < 1.0:
            raise ValueError("iou_thresh must be in [0, 1)")
        for name in (
            "conf_thresh_assign",
            "conf_thresh_resume",
            "conf_thresh_new_track",
            "size_threshold",
            "max_halted_age",
            "anticipation_threshold",
            "fov_margin",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def match_type(self, a: str, b: str) -> bool:
        return a == b or (a, b) in self.class_aliases or (b, a) in self.class_aliases

    @property
    def iou_thresh_scaled(self) -> int:
        return int(round(self.iou_thresh * IOU_SCALE))


@dataclass(frozen=True)
class TrackPrediction:
    """One live track as the solver sees it."""

    box: BBox2D
    state: TrackState
    cls: str
    halted_age: int = 0


@dataclass(frozen=True)
class ProblemSpec:
    """Per-frame solver input: detections, predictions, matching
    likelihoods (scaled IoU, only pairs with IoU > 0), a read-only fluent
    snapshot, and the threshold configuration."""

    frame: int
    detections: tuple[Detection, ...]
    predictions: dict[int, TrackPrediction]
    likelihoods: dict[tuple[int, int], int]
    fluents: FluentStore
    config: Thresholds = Thresholds()
    frame_geom: Optional[tuple[float, float]] = None

    def context(self) -> PossibleContext:
        return PossibleContext(
            predicted={t: p.box for t, p in self.predictions.items()},
            halted_age={t: p.halted_age for t, p in self.predictions.items()},
            frame_geom=self.frame_geom,
            fov_margin=self.config.fov_margin,
            max_halted_age=self.config.max_halted_age,
        )


class ActionKind(Enum):
    ASSIGN = "assign"
    START = "start"
    END = "end"
    HALT = "halt"
    RESUME = "resume"
    IGNORE_TRK = "ignore_trk"
    IGNORE_DET = "ignore_det"


@dataclass(frozen=True, slots=True)
class Action:
    kind: ActionKind
    trk: Optional[int] = None
    det: Optional[int] = None
    event: Optional[EventOccurrence] = None

    def pretty(self) -> str:
        k = self.kind
        if k == ActionKind.ASSIGN or k == ActionKind.RESUME:
            return f"{k.value}(trk_{self.trk},det_{self.det})"
        if k in (ActionKind.END, ActionKind.HALT, ActionKind.IGNORE_TRK):
            return f"{k.value}(trk_{self.trk})"
        return f"{k.value}(det_{self.det})"


@dataclass(frozen=True)
class SolveResult:
    """The abduced hypothesis: one action per track and per detection,
    the linked events, and the objective value per level (level-10 is
    maximized, levels 3 and 2 are minimized)."""

    actions: tuple[Action, ...]
    events: tuple[EventOccurrence, ...]
    objective: tuple[int, int, int]


# ----------------------------------------------------------------------
# Candidate generation (integrity-constraint level)
# ----------------------------------------------------------------------


def _assign_ok(spec: ProblemSpec, tid: int, det: Detection) -> bool:
    pred = spec.predictions[tid]
    return (
        pred.state == TrackState.ACTIVE
        and spec.config.match_type(pred.cls, det.cls)
        and det.conf > spec.config.conf_thresh_assign
        and spec.likelihoods.get((tid, det.id), 0) > spec.config.iou_thresh_scaled
    )


def _resume_ok(spec: ProblemSpec, tid: int, det: Detection) -> bool:
    pred = spec.predictions[tid]
    return (
        pred.state == TrackState.HALTED
        and spec.config.match_type(pred.cls, det.cls)
        and det.conf > spec.config.conf_thresh_resume
    )


def _start_ok(spec: ProblemSpec, det: Detection) -> bool:
    return (
        det.conf > spec.config.conf_thresh_new_track
        and det.box.area > spec.config.size_threshold
    )


def candidate_actions(
    spec: ProblemSpec,
) -> tuple[dict[int, list[Action]], dict[int, list[Action]]]:
    """Admissible actions per track and per detection after the integrity
    constraints (event explainability is applied separately; see
    :func:`link_events`)."""
    per_track: dict[int, list[Action]] = {}
    per_det: dict[int, list[Action]] = {d.id: [] for d in spec.detections}

    for tid in sorted(spec.predictions):
        pred = spec.predictions[tid]
        acts: list[Action] = []
        if pred.state == TrackState.ACTIVE:
            for det in spec.detections:
                if _assign_ok(spec, tid, det):
                    acts.append(Action(ActionKind.ASSIGN, trk=tid, det=det.id))
            acts.append(Action(ActionKind.HALT, trk=tid))
        elif pred.state == TrackState.HALTED:
            for det in spec.detections:
                if _resume_ok(spec, tid, det):
                    acts.append(Action(ActionKind.RESUME, trk=tid, det=det.id))
            acts.append(Action(ActionKind.END, trk=tid))
            acts.append(Action(ActionKind.IGNORE_TRK, trk=tid))
        else:
            raise EngineBugError(f"ended track {tid} in problem spec")
        if not acts:
            raise EngineBugError(f"track {tid} has no admissible action")
        per_track[tid] = acts
        for a in acts:
            if a.det is not None:
                per_det[a.det].append(a)

    for det in spec.detections:
        if _start_ok(spec, det):
            per_det[det.id].append(Action(ActionKind.START, det=det.id))
        per_det[det.id].append(Action(ActionKind.IGNORE_DET, det=det.id))

    return per_track, per_det


def link_events(action: Action, spec: ProblemSpec) -> list[EventOccurrence]:
    """Admissible explaining events for an action, in the fixed
    preference order (the first entry is the abduced one).

    An empty list makes the action inadmissible.  Assign actions need no
    explanation.  Self-occlusion (a track hiding behind itself) is
    excluded.
    """
    ctx = spec.context()
    store = spec.fluents
    t, frame = action.trk, spec.frame
    out: list[EventOccurrence] = []
    if action.kind == ActionKind.ASSIGN:
        return out
    if action.kind == ActionKind.HALT:
        for t2 in sorted(spec.predictions):
            if t2 == t:
                continue
            e = EventOccurrence(EventKind.HIDES_BEHIND, frame, t, occluder=t2)
            if possible(store, ctx, e):
                out.append(e)
        e = EventOccurrence(EventKind.MISSING_DETECTIONS, frame, t)
        if possible(store, ctx, e):
            out.append(e)
    elif action.kind == ActionKind.RESUME:
        for t2 in store.occluder_of(t):
            if t2 in spec.predictions:
                e = EventOccurrence(EventKind.UNHIDES_FROM_BEHIND, frame, t, occluder=t2)
                if possible(store, ctx, e):
                    out.append(e)
        e = EventOccurrence(EventKind.RECOVER, frame, t)
        if possible(store, ctx, e):
            out.append(e)
    elif action.kind == ActionKind.END:
        e = EventOccurrence(EventKind.LEAVES_FOV, frame, t)
        if possible(store, ctx, e):
            out.append(e)
        e = EventOccurrence(EventKind.LOST, frame, t)
        if possible(store, ctx, e):
            out.append(e)
    elif action.kind == ActionKind.START:
        det = next(d for d in spec.detections if d.id == action.det)
        e = EventOccurrence(EventKind.ENTERS_FOV, frame, action.det, subject_is_det=True)
        if possible(store, ctx, e, det_box=det.box):
            out.append(e)
    elif action.kind == ActionKind.IGNORE_TRK:
        out.append(EventOccurrence(EventKind.NOISE, frame, t))
    elif action.kind == ActionKind.IGNORE_DET:
        out.append(EventOccurrence(EventKind.NOISE, frame, action.det, subject_is_det=True))
    return out


# ----------------------------------------------------------------------
# Objective accounting
# ----------------------------------------------------------------------

_L3_WEIGHT = 10
_L2_END = 5
_L2_START = 5
_L2_RESUME = 1


def _action_levels(spec: ProblemSpec, a: Action) -> tuple[int, int, int]:
    """(level10 gain, level3 cost, level2 cost) of one action."""
    k = a.kind
    if k == ActionKind.ASSIGN:
        return spec.likelihoods.get((a.trk, a.det), 0) + 1, 0, 0
    if k == ActionKind.RESUME:
        return 0, 0, _L2_RESUME
    if k == ActionKind.END:
        return 0, 0, _L2_END
    if k == ActionKind.START:
        return 0, 0, _L2_START
    if k in (ActionKind.IGNORE_TRK, ActionKind.IGNORE_DET):
        return 0, _L3_WEIGHT, 0
    return 0, 0, 0  # HALT


def _objective(spec: ProblemSpec, actions: list[Action]) -> tuple[int, int, int]:
    l10 = l3 = l2 = 0
    for a in actions:
        g, c3, c2 = _action_levels(spec, a)
        l10 += g
        l3 += c3
        l2 += c2
    return l10, l3, l2


def _objective_key(obj: tuple[int, int, int]) -> tuple[int, int, int]:
    """Smaller is better: maximize level 10, then minimize 3, then 2."""
    return (-obj[0], obj[1], obj[2])


def _action_rank(a: Action) -> tuple[int, int]:
    """Per-track preference order used for deterministic tie-breaking."""
    k = a.kind
    if k in (ActionKind.ASSIGN, ActionKind.RESUME):
        return (0, a.det)
    if k in (ActionKind.HALT, ActionKind.END):
        return (1, 0)
    return (2, 0)  # ignore_trk


# ----------------------------------------------------------------------
# Exact solver: lexicographic weights + bipartite matching
# ----------------------------------------------------------------------


class _Instance:
    """Preprocessed solve instance: per-track candidates with scalarized
    integer values, plus per-detection fallbacks."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        per_track, per_det = candidate_actions(spec)
        n_t, n_d = len(per_track), len(spec.detections)
        # Fold levels into one integer: value = l10*C1 - l3*C2 - l2, with
        # constants large enough that no lower level can overturn a
        # higher one.
        max_l2 = _L2_END * n_t + (_L2_START + _L2_RESUME) * n_d + 1
        self.C2 = max_l2 + 1
        self.C1 = self.C2 * (_L3_WEIGHT * (n_t + n_d) + 1) + max_l2 + 1
        # The matching runs on float64; keep every possible total exactly
        # representable (folded weights are integers below 2**53).
        if (IOU_SCALE + 1) * self.C1 * max(min(n_t, n_d), 1) >= 2**53:
            raise ValueError(
                f"instance too large for exact lexicographic folding: {n_t}x{n_d}"
            )

        self.track_ids = sorted(per_track)
        self.det_ids = [d.id for d in spec.detections]

        # Per track: ordered candidate list (with linked events resolved)
        # and the edge map; candidates whose event set is empty are
        # dropped here.
        self.track_cands: dict[int, list[Action]] = {}
        self.edge_value: dict[tuple[int, int], int] = {}
        self.fallback: dict[int, Action] = {}
        self.fallback_value: dict[int, int] = {}
        for tid in self.track_ids:
            cands: list[Action] = []
            for a in per_track[tid]:
                events = link_events(a, spec)
                if a.kind != ActionKind.ASSIGN and not events:
                    continue
                a = replace(a, event=events[0] if events else None)
                cands.append(a)
            if not cands:
                raise EngineBugError(f"track {tid} has no explainable action")
            cands.sort(key=_action_rank)
            self.track_cands[tid] = cands
            for a in cands:
                if a.det is not None:
                    self.edge_value[(tid, a.det)] = self._value(a)
            fb = [a for a in cands if a.det is None]
            if not fb:
                raise EngineBugError(f"track {tid} has no fallback action")
            self.fallback[tid] = fb[0]  # end dominates ignore_trk; halt alone
            self.fallback_value[tid] = self._value(fb[0])

        self.det_fallback: dict[int, Action] = {}
        self.det_fallback_value: dict[int, int] = {}
        for did in self.det_ids:
            acts = [
                a
                for a in per_det[did]
                if a.kind in (ActionKind.START, ActionKind.IGNORE_DET)
                and link_events(a, spec)
            ]
            if not acts:
                raise EngineBugError(f"detection {did} has no fallback action")
            # start (level-2 cost) strictly beats ignore_det (level-3 cost)
            a = acts[0]
            a = replace(a, event=link_events(a, spec)[0])
            self.det_fallback[did] = a
            self.det_fallback_value[did] = self._value(a)

    def _value(self, a: Action) -> int:
        g, c3, c2 = _action_levels(self.spec, a)
        return g * self.C1 - c3 * self.C2 - c2

    # -- matching ------------------------------------------------------

    def best_value(self, tracks: list[int], dets: list[int]) -> tuple[int, dict[int, Action]]:
        """Optimal scalar value over a sub-instance, plus one optimal
        action map (tracks -> Action) realizing it."""
        n_t, n_d = len(tracks), len(dets)
        if n_t == 0:
            return sum(self.det_fallback_value[d] for d in dets), {}
        if n_d == 0:
            return (
                sum(self.fallback_value[t] for t in tracks),
                {t: self.fallback[t] for t in tracks},
            )
        size = n_t + n_d
        cost = np.full((size, size), np.inf)
        for i, t in enumerate(tracks):
            for j, d in enumerate(dets):
                v = self.edge_value.get((t, d))
                if v is not None:
                    cost[i, j] = -float(v)
            cost[i, n_d + i] = -float(self.fallback_value[t])
        for j, d in enumerate(dets):
            cost[n_t + j, j] = -float(self.det_fallback_value[d])
            cost[n_t + j, n_d:] = 0.0
        _, cols = linear_sum_assignment(cost)
        total = 0
        chosen: dict[int, Action] = {}
        for i, t in enumerate(tracks):
            j = int(cols[i])
            if j < n_d:
                d = dets[j]
                total += self.edge_value[(t, d)]
                chosen[t] = self._edge_action(t, d)
            else:
                total += self.fallback_value[t]
                chosen[t] = self.fallback[t]
        for j, d in enumerate(dets):
            if int(cols[n_t + j]) == j:
                total += self.det_fallback_value[d]
        return total, chosen

    def _edge_action(self, t: int, d: int) -> Action:
        for a in self.track_cands[t]:
            if a.det == d:
                return a
        raise EngineBugError(f"missing edge action ({t}, {d})")


def _finalize(spec: ProblemSpec, chosen: dict[int, Action], inst: _Instance) -> SolveResult:
    actions: list[Action] = [chosen[t] for t in inst.track_ids]
    used_dets = {a.det for a in actions if a.det is not None}
    for did in inst.det_ids:
        if did not in used_dets:
            actions.append(inst.det_fallback[did])
    track_part = sorted(
        (a for a in actions if a.trk is not None), key=lambda a: a.trk
    )
    det_part = sorted((a for a in actions if a.trk is None), key=lambda a: a.det)
    ordered = tuple(track_part + det_part)
    events = tuple(a.event for a in ordered if a.event is not None)
    _assert_disjoint_effects(events)
    return SolveResult(
        actions=ordered, events=events, objective=_objective(spec, list(ordered))
    )


def _assert_disjoint_effects(events: tuple[EventOccurrence, ...]) -> None:
    """The abduced per-frame event set must touch pairwise-disjoint fluent
    instances so application order cannot matter."""
    seen: set[tuple] = set()
    for e in events:
        touched = touched_fluents(e)
        if touched & seen:
            raise EngineBugError(f"overlapping fluent effects at frame {e.frame}")
        seen |= touched


def solve(spec: ProblemSpec) -> SolveResult:
    """Lexicographic optimum over all consistent action-and-event covers.

    Deterministic: among optimal covers, returns the one whose per-track
    action sequence (tracks in ascending id order; assigns/resumes
    preferred by ascending detection id, then the fallback action) is
    lexicographically minimal.  Canonical extraction fixes each track's
    most-preferred action that still extends to an optimal completion,
    verified by re-solving the reduced matching.
    """
    inst = _Instance(spec)
    tracks, dets = list(inst.track_ids), list(inst.det_ids)
    best, incumbent = inst.best_value(tracks, dets)

    # Loop invariant: partial + optimum(remaining_t, remaining_d) == best,
    # where partial sums the values of fixed track actions and remaining_d
    # excludes detections consumed by them.
    chosen: dict[int, Action] = {}
    partial = 0
    remaining_t = list(tracks)
    remaining_d = list(dets)
    for t in tracks:
        remaining_t.remove(t)
        incumbent_action = incumbent[t]
        fixed: Optional[Action] = None
        for cand in inst.track_cands[t]:
            if _action_rank(cand) >= _action_rank(incumbent_action):
                break
            v = inst._value(cand)
            rest_d = [d for d in remaining_d if d != cand.det]
            rest_val, rest_chosen = inst.best_value(remaining_t, rest_d)
            if partial + v + rest_val == best:
                fixed = cand
                incumbent = rest_chosen
                break
        if fixed is None:
            fixed = incumbent_action
            incumbent = {k: v for k, v in incumbent.items() if k != t}
        chosen[t] = fixed
        partial += inst._value(fixed)
        if fixed.det is not None:
            remaining_d.remove(fixed.det)
    return _finalize(spec, chosen, inst)


# ----------------------------------------------------------------------
# Exhaustive oracle
# ----------------------------------------------------------------------

ORACLE_LIMIT = 5


def solve_oracle(spec: ProblemSpec) -> SolveResult:
    """Exhaustive enumeration of every legal cover; the lexicographic
    optimum under the same deterministic tie-break as :func:`solve`.

    Refuses instances with more than five tracks or detections.
    """
    if len(spec.predictions) > ORACLE_LIMIT or len(spec.detections) > ORACLE_LIMIT:
        raise ValueError("oracle limited to instances of at most 5x5")

    per_track, per_det = candidate_actions(spec)
    track_ids = sorted(per_track)
    det_ids = [d.id for d in spec.detections]

    # Pre-resolve events; drop unexplainable candidates.
    cands: dict[int, list[Action]] = {}
    for t in track_ids:
        lst = []
        for a in per_track[t]:
            ev = link_events(a, spec)
            if a.kind != ActionKind.ASSIGN and not ev:
                continue
            lst.append(replace(a, event=ev[0] if ev else None))
        lst.sort(key=_action_rank)
        cands[t] = lst
    det_opts: dict[int, list[Action]] = {}
    for d in det_ids:
        lst = []
        for a in per_det[d]:
            if a.kind not in (ActionKind.START, ActionKind.IGNORE_DET):
                continue
            ev = link_events(a, spec)
            if not ev:
                continue
            lst.append(replace(a, event=ev[0]))
        det_opts[d] = lst

    best_key = None
    best_actions: Optional[list[Action]] = None

    def det_completions(i: int, free: list[int], acc: list[Action]):
        if i == len(free):
            yield list(acc)
            return
        for a in det_opts[free[i]]:
            acc.append(a)
            yield from det_completions(i + 1, free, acc)
            acc.pop()

    def recurse(i: int, used: set[int], acc: list[Action]):
        nonlocal best_key, best_actions
        if i == len(track_ids):
            free = [d for d in det_ids if d not in used]
            for completion in det_completions(0, free, []):
                cover = acc + completion
                obj = _objective(spec, cover)
                key = (
                    _objective_key(obj),
                    tuple(_action_rank(a) for a in cover[: len(track_ids)]),
                )
                if best_key is None or key < best_key:
                    best_key = key
                    best_actions = list(cover)
            return
        for a in cands[track_ids[i]]:
            if a.det is not None and a.det in used:
                continue
            if a.det is not None:
                used.add(a.det)
            acc.append(a)
            recurse(i + 1, used, acc)
            acc.pop()
            if a.det is not None:
                used.discard(a.det)

    recurse(0, set(), [])
    assert best_actions is not None
    track_part = sorted((a for a in best_actions if a.trk is not None), key=lambda a: a.trk)
    det_part = sorted((a for a in best_actions if a.trk is None), key=lambda a: a.det)
    ordered = tuple(track_part + det_part)
    events = tuple(a.event for a in ordered if a.event is not None)
    return SolveResult(actions=ordered, events=events, objective=_objective(spec, list(ordered)))


# ----------------------------------------------------------------------
# Fact emission
# ----------------------------------------------------------------------


def emit_facts(spec: ProblemSpec) -> str:
    """Render the problem specification as logic-program facts.

    Grammar (byte-exact, one fact per line, trailing periods):

        #const curr_time=T.
        det(det_I, CLASS, CONF).          (spaces after commas)
        box2d(det_I, X, Y, W, H).
        trk(trk_I, CLASS). / trk_state(trk_I, STATE).   (interleaved)
        box2d(trk_I, X, Y, W, H).
        iou(trk_I,det_J,ML).              (no spaces, pairs with IoU > 0,
                                           ordered by det then track)

    Blocks are separated by single blank lines; box coordinates are
    rounded to integers.
    """
    blocks: list[list[str]] = [[f"#const curr_time={spec.frame}."]]

    if spec.detections:
        blocks.append(
            [f"det(det_{d.id}, {d.cls}, {d.conf})." for d in spec.detections]
        )
        blocks.append(
            [
                "box2d(det_{}, {}, {}, {}, {}).".format(
                    d.id, _px(d.box.x), _px(d.box.y), _px(d.box.w), _px(d.box.h)
                )
                for d in spec.detections
            ]
        )

    tids = sorted(spec.predictions)
    if tids:
        trk_lines = []
        for t in tids:
            p = spec.predictions[t]
            trk_lines.append(f"trk(trk_{t}, {p.cls}).")
            trk_lines.append(f"trk_state(trk_{t}, {p.state.value}).")
        blocks.append(trk_lines)
        blocks.append(
            [
                "box2d(trk_{}, {}, {}, {}, {}).".format(
                    t,
                    _px(spec.predictions[t].box.x),
                    _px(spec.predictions[t].box.y),
                    _px(spec.predictions[t].box.w),
                    _px(spec.predictions[t].box.h),
                )
                for t in tids
            ]
        )

    iou_lines = [
        f"iou(trk_{t},det_{d},{ml})."
        for (t, d), ml in sorted(spec.likelihoods.items(), key=lambda kv: (kv[0][1], kv[0][0]))
        if ml > 0
    ]
    if iou_lines:
        blocks.append(iou_lines)

    return "\n\n".join("\n".join(b) for b in blocks if b) + "\n"


def _px(v: float) -> int:
    return int(round(v))
