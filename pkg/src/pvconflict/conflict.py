"""Near-future path prediction and pedestrian-vehicle conflict detection.

At every grid step each user's next-horizon path is forecast from its last
few observed points; a pedestrian-vehicle pair whose simultaneous-time
predicted distance drops below the threshold produces a conflict instant.
Runs of instants of the same pair form a conflict situation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvalidInput
from .trajectory import Trajectory, UserKind, fit_smoothing_spline

log = logging.getLogger(__name__)

_GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PredictedPath:
    """Forecast positions of one user on a uniform sub-grid.

    ``times`` are absolute seconds starting at the prediction instant;
    ``xy`` is the matching (n, 2) position array.
    """

    user_id: str
    times: np.ndarray
    xy: np.ndarray

    @property
    def subgrid(self) -> float:
        return float(self.times[1] - self.times[0])

    def same_grid(self, other: "PredictedPath") -> bool:
        return len(self.times) == len(other.times) and bool(
            np.all(np.abs(self.times - other.times) <= _GRID_TOL)
        )


@dataclass(frozen=True, order=True)
class ConflictInstant:
    """A (grid step, pedestrian, vehicle) triple whose predicted paths come
    within the conflict threshold."""

    ts: int
    ped_id: str
    veh_id: str
    min_dist: float
    time_min_dist: float

    def __post_init__(self):
        if self.min_dist < 0:
            raise InvalidInput("min_dist must be >= 0")
        if self.time_min_dist < 0:
            raise InvalidInput("time_min_dist must be >= 0")

    @property
    def key(self):
        return (self.ts, self.ped_id, self.veh_id)


@dataclass(frozen=True, eq=False)
class ConflictSituation:
    """Consecutive conflict instants of one pedestrian-vehicle pair."""

    ped_id: str
    veh_id: str
    instants: tuple[ConflictInstant, ...]

    def __post_init__(self):
        for ci in self.instants:
            if (ci.ped_id, ci.veh_id) != (self.ped_id, self.veh_id):
                raise InvalidInput("situation instants must share one user pair")
        steps = [ci.ts for ci in self.instants]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise InvalidInput("situation instants must be strictly increasing in ts")


def predict_path(
    traj: Trajectory,
    i: int,
    horizon: float = 8.0,
    n_history: int = 4,
    smoothing: float = 0.0,
    subgrid: float = 0.1,
) -> PredictedPath:
    """Forecast the path over ``horizon`` seconds from point index ``i``.

    Fits a smoothing spline through the last ``n_history`` observed points
    (up to and including i) and samples its constant-velocity continuation on
    the sub-grid.
    """
    traj._check_index(i)
    if i + 1 < n_history:
        raise InsufficientData(
            f"user {traj.user_id!r} has only {i + 1} points at index {i}, "
            f"needs {n_history}"
        )
    curve = fit_smoothing_spline(traj.points[i + 1 - n_history : i + 1], smoothing)
    n_sub = int(round(horizon / subgrid))
    times = traj.times[i] + subgrid * np.arange(n_sub + 1)
    x, y = curve.evaluate(times)
    return PredictedPath(user_id=traj.user_id, times=times, xy=np.column_stack([x, y]))


_TIE_TOL = 1e-9  # distances closer than this count as tied (fp noise scale)


def min_dist(a: PredictedPath, b: PredictedPath):
    """Minimum simultaneous-time distance between two predicted paths.

    Returns (distance in meters, offset in seconds from the prediction
    instant); ties resolve to the earliest offset.  Distances within a
    nanometer are treated as tied so float noise cannot shift the offset.
    """
    if not a.same_grid(b):
        raise InvalidInput("predicted paths must share the same sub-grid")
    d = np.hypot(a.xy[:, 0] - b.xy[:, 0], a.xy[:, 1] - b.xy[:, 1])
    idx = int(np.argmin(np.round(d / _TIE_TOL)))
    return float(d[idx]), float(a.times[idx] - a.times[0])


def detect_conflict_instants(
    trajs,
    threshold: float = 5.0,
    horizon: float = 8.0,
    *,
    n_history: int = 4,
    smoothing: float = 0.0,
    subgrid: float = 0.1,
    stats: dict | None = None,
) -> list[ConflictInstant]:
    """Scan all grid steps and pedestrian-vehicle pairs for conflict instants.

    A conflict instant is emitted whenever the predicted simultaneous-time
    minimum distance of a pair falls strictly below ``threshold``.  Pairs
    lacking prediction history at a step are skipped; ``stats`` (if given) is
    filled with counts for the run summary.  Output is ordered by
    (ts, ped_id, veh_id).
    """
    if threshold <= 0:
        raise InvalidInput("conflict threshold must be positive")
    trajs = list(trajs)
    if not trajs:
        return []
    steps = {t.step for t in trajs}
    if len(steps) > 1:
        raise InvalidInput(f"trajectories use mixed time steps: {sorted(steps)}")

    peds = sorted((t for t in trajs if t.kind is UserKind.PEDESTRIAN), key=lambda t: t.user_id)
    vehs = sorted((t for t in trajs if t.kind is UserKind.VEHICLE), key=lambda t: t.user_id)
    counters = {"pairs_evaluated": 0, "pairs_skipped_history": 0, "instants": 0}
    out: list[ConflictInstant] = []
    if peds and vehs:
        ts_lo = min(t.start_step for t in trajs)
        ts_hi = max(t.start_step + len(t) - 1 for t in trajs)
        for ts in range(ts_lo, ts_hi + 1):
            ped_present, ped_paths = _paths_at(peds, ts, horizon, n_history, smoothing, subgrid)
            veh_present, veh_paths = _paths_at(vehs, ts, horizon, n_history, smoothing, subgrid)
            # co-present pairs that could not be evaluated for lack of history
            counters["pairs_skipped_history"] += (
                ped_present * veh_present - len(ped_paths) * len(veh_paths)
            )
            for ped_id, ped_path in ped_paths:
                for veh_id, veh_path in veh_paths:
                    counters["pairs_evaluated"] += 1
                    dist, t_off = min_dist(ped_path, veh_path)
                    if dist < threshold:
                        out.append(
                            ConflictInstant(
                                ts=ts,
                                ped_id=ped_id,
                                veh_id=veh_id,
                                min_dist=dist,
                                time_min_dist=t_off,
                            )
                        )
    counters["instants"] = len(out)
    if stats is not None:
        stats.update(counters)
    log.info(
        "conflict scan: %d instants from %d pair evaluations (%d pair-steps lacked history)",
        counters["instants"], counters["pairs_evaluated"], counters["pairs_skipped_history"],
    )
    out.sort(key=lambda ci: ci.key)
    return out


def _paths_at(users, ts, horizon, n_history, smoothing, subgrid):
    """Predicted paths of every user with enough history at grid step ts.

    Returns (number of users present at ts, list of (user_id, path)).
    """
    present = 0
    paths = []
    for traj in users:
        i = traj.local_index(ts)
        if i is None:
            continue
        present += 1
        if i + 1 < n_history:
            continue
        paths.append(
            (traj.user_id, predict_path(traj, i, horizon, n_history, smoothing, subgrid))
        )
    return present, paths


def group_conflicts(cis, max_gap: int = 2) -> list[ConflictSituation]:
    """Group conflict instants into situations.

    Instants of the same pedestrian-vehicle pair belong to one situation as
    long as consecutive steps are at most ``max_gap`` apart.  Output is
    ordered by (ped_id, veh_id, first ts).
    """
    if max_gap < 0:
        raise InvalidInput("max_gap must be >= 0")
    by_pair: dict[tuple[str, str], list[ConflictInstant]] = {}
    for ci in cis:
        by_pair.setdefault((ci.ped_id, ci.veh_id), []).append(ci)
    out = []
    for (ped_id, veh_id) in sorted(by_pair):
        run: list[ConflictInstant] = []
        for ci in sorted(by_pair[(ped_id, veh_id)], key=lambda c: c.ts):
            if run and ci.ts - run[-1].ts > max_gap:
                out.append(ConflictSituation(ped_id, veh_id, tuple(run)))
                run = []
            run.append(ci)
        if run:
            out.append(ConflictSituation(ped_id, veh_id, tuple(run)))
    return out
