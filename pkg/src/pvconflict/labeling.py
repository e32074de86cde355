"""Evasive-action labeling via the expected/observed crossing-time gap.

For every conflict instant the subject's short-term curve is fitted twice at
the decision instant (one reaction delay after the conflict was observed):
once through the positions leading up to it ("expected", how the user was
going to move) and once through the positions following it ("observed", how
the user actually moved).  Both curves are intersected with the conflicting
user's predicted path; the signed difference between the travel times to the
two crossing points, k, measures the intensity of the evasive action.
Negative k means the subject held back (prudent / decelerating), positive k
that it pushed ahead (aggressive / accelerating).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .conflict import ConflictInstant, PredictedPath, predict_path
from .errors import InsufficientData, InvalidInput, NoCrossing
from .geometry import first_polyline_intersection
from .trajectory import ParametricCurve, Trajectory, UserKind, fit_smoothing_spline

log = logging.getLogger(__name__)

_WINDOW = 3  # points on each side of the decision instant used per curve fit


class ReactionClass(enum.Enum):
    """Three-way reaction outcome.

    For vehicles ``PRUDENT`` means decelerating and ``AGGRESSIVE``
    accelerating; for pedestrians the names carry their plain meaning.
    """

    NO_REACTION = "no_reaction"
    PRUDENT = "prudent"
    AGGRESSIVE = "aggressive"

    @classmethod
    def from_tag(cls, tag: str) -> "ReactionClass":
        try:
            return cls(tag)
        except ValueError:
            raise InvalidInput(f"unknown reaction class {tag!r}")


#: Fixed class order used everywhere (baseline first).
CLASS_ORDER = (ReactionClass.NO_REACTION, ReactionClass.PRUDENT, ReactionClass.AGGRESSIVE)


@dataclass(frozen=True)
class ReactionLabel:
    """Classified evasive action of one user at one conflict instant."""

    ci: ConflictInstant
    user_kind: UserKind
    k: float
    reaction: ReactionClass


def expected_trajectory(traj: Trajectory, i: int, smoothing: float = 1e-3) -> ParametricCurve:
    """Curve through the three positions before index i and the one at i."""
    traj._check_index(i)
    if i < _WINDOW:
        raise InsufficientData(
            f"user {traj.user_id!r}: need {_WINDOW} points before index {i}"
        )
    return fit_smoothing_spline(traj.points[i - _WINDOW : i + 1], smoothing)


def observed_trajectory(traj: Trajectory, i: int, smoothing: float = 1e-3) -> ParametricCurve:
    """Curve through the position at index i and the three that follow."""
    traj._check_index(i)
    if i + _WINDOW >= len(traj):
        raise InsufficientData(
            f"user {traj.user_id!r}: need {_WINDOW} points after index {i}"
        )
    return fit_smoothing_spline(traj.points[i : i + _WINDOW + 1], smoothing)


def k_statistic(
    subject: Trajectory,
    other_path: PredictedPath,
    i: int,
    reaction_delay: int = 3,
    *,
    smoothing: float = 1e-3,
    horizon: float = 8.0,
    subgrid: float = 0.1,
) -> float:
    """Signed crossing-time gap of one subject at one conflict instant.

    ``i`` is the subject's point index at the conflict instant; the curves
    are built ``reaction_delay`` steps later.  ``other_path`` must be the
    conflicting user's predicted path at that decision instant.  Returns
    t(expected crossing) - t(observed crossing), so slowing down yields
    negative values.
    """
    j = i + reaction_delay
    if j < _WINDOW or j + _WINDOW >= len(subject):
        raise InsufficientData(
            f"user {subject.user_id!r}: need {_WINDOW} points on both sides "
            f"of decision index {j}"
        )
    expected = expected_trajectory(subject, j, smoothing)
    observed = observed_trajectory(subject, j, smoothing)
    t_dec = float(subject.times[j])

    t_exp = _crossing_travel_time(expected, t_dec, other_path, horizon, subgrid)
    t_obs = _crossing_travel_time(observed, t_dec, other_path, horizon, subgrid)
    if t_exp is None or t_obs is None:
        missing = "expected" if t_exp is None else "observed"
        raise NoCrossing(
            f"{missing} curve of user {subject.user_id!r} never crosses the "
            f"path of {other_path.user_id!r}"
        )
    return t_exp - t_obs


def _crossing_travel_time(curve, t_start, other_path, horizon, subgrid):
    """Travel time from t_start until the curve crosses the other path."""
    n_sub = int(round(horizon / subgrid))
    times = t_start + subgrid * np.arange(n_sub + 1)
    x, y = curve.evaluate(times)
    hit = first_polyline_intersection(
        np.column_stack([x, y]), times, other_path.xy, other_path.times
    )
    if hit is None:
        return None
    return hit[1] - t_start


def classify(k: float, threshold: float = 0.25) -> ReactionClass:
    """Three-way partition of k: beyond +/- threshold is a reaction, the
    closed middle interval is none."""
    if threshold <= 0:
        raise InvalidInput("classification threshold must be positive")
    if not math.isfinite(k):
        raise InvalidInput("k must be finite")
    if k < -threshold:
        return ReactionClass.PRUDENT
    if k > threshold:
        return ReactionClass.AGGRESSIVE
    return ReactionClass.NO_REACTION


def label_conflict_instants(cis, trajs, config: PipelineConfig | None = None):
    """Label both users' reactions at every conflict instant.

    Returns (labels ordered by CI key and user kind, drop counts by reason).
    Instants where a curve cannot be built or never crosses the other path
    are dropped from the labeled set and counted.
    """
    cfg = config or PipelineConfig()
    by_id = {t.user_id: t for t in trajs}
    labels: list[ReactionLabel] = []
    drops = {"subject_window": 0, "other_path": 0, "no_crossing": 0}
    for ci in sorted(cis, key=lambda c: c.key):
        for kind in (UserKind.PEDESTRIAN, UserKind.VEHICLE):
            subject_id = ci.ped_id if kind is UserKind.PEDESTRIAN else ci.veh_id
            other_id = ci.veh_id if kind is UserKind.PEDESTRIAN else ci.ped_id
            try:
                subject = by_id[subject_id]
                other = by_id[other_id]
            except KeyError as exc:
                raise InvalidInput(
                    f"conflict instant references unknown user {exc.args[0]!r}"
                ) from exc
            i = subject.local_index(ci.ts)
            i_other = other.local_index(ci.ts)
            if i is None or i_other is None:
                raise InvalidInput(f"both users must have a point at step {ci.ts}")

            j_other = i_other + cfg.reaction_delay_steps
            if j_other >= len(other) or j_other + 1 < cfg.n_history:
                drops["other_path"] += 1
                continue
            try:
                other_path = predict_path(
                    other, j_other, cfg.horizon, cfg.n_history,
                    cfg.prediction_smoothing, cfg.subgrid,
                )
            except InsufficientData:
                drops["other_path"] += 1
                continue
            try:
                k = k_statistic(
                    subject, other_path, i, cfg.reaction_delay_steps,
                    smoothing=cfg.labeling_smoothing,
                    horizon=cfg.horizon, subgrid=cfg.subgrid,
                )
            except InsufficientData:
                drops["subject_window"] += 1
                continue
            except NoCrossing:
                drops["no_crossing"] += 1
                continue
            labels.append(
                ReactionLabel(ci=ci, user_kind=kind, k=k, reaction=classify(k, cfg.k_threshold))
            )
    dropped = sum(drops.values())
    if dropped:
        log.info(
            "labeling: %d labels, %d dropped (%s)",
            len(labels), dropped,
            ", ".join(f"{k}={v}" for k, v in drops.items()),
        )
    return labels, drops
