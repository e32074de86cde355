"""Explanatory variables computed for each conflict instant.

Each conflict instant yields one predictor vector describing the geometry
and kinematics of the encounter at that step: current and predicted
distances, the crossing point of the two forecast paths, speeds and
accelerations of both users, simultaneous-conflict counts and a leading
(or trailing) vehicle indicator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .conflict import ConflictInstant, PredictedPath, predict_path
from .errors import InvalidInput, NoCrossing
from .geometry import first_polyline_intersection, point_to_polyline
from .trajectory import UserKind, accel_at, speed_at

#: Column order of the exported predictor matrix.
PREDICTOR_COLUMNS = (
    "MinDist",
    "TimeMinDist",
    "ActDist",
    "OrtDist",
    "TimeDelayXP",
    "SpeedVeh",
    "AccVeh",
    "SpeedPed",
    "AccPed",
    "CPConfNr",
    "PCConfNr",
    "CarAhead",
)


@dataclass(frozen=True)
class CrossingPoint:
    """Spatial intersection of the two users' predicted paths.

    Travel times are offsets from the prediction instant at which each user's
    forecast passes through the point.
    """

    exists: bool
    x: float = float("nan")
    y: float = float("nan")
    t_ped: float = float("nan")
    t_veh: float = float("nan")


@dataclass(frozen=True)
class PredictorVector:
    """The explanatory-variable set for one conflict instant."""

    min_dist: float
    time_min_dist: float
    act_dist: float
    ort_dist: float
    time_delay_xp: float
    speed_veh: float
    acc_veh: float
    speed_ped: float
    acc_ped: float
    cp_conf_nr: int
    pc_conf_nr: int
    car_ahead: bool

    def __post_init__(self):
        for name in ("min_dist", "act_dist", "ort_dist", "speed_veh", "speed_ped"):
            if getattr(self, name) < 0:
                raise InvalidInput(f"{name} must be >= 0")
        if self.cp_conf_nr < 0 or self.pc_conf_nr < 0:
            raise InvalidInput("conflict counts must be >= 0")
        values = [getattr(self, f) for f in (
            "min_dist", "time_min_dist", "act_dist", "ort_dist", "time_delay_xp",
            "speed_veh", "acc_veh", "speed_ped", "acc_ped",
        )]
        if not np.all(np.isfinite(values)):
            raise InvalidInput("predictor vector contains non-finite values")

    def to_row(self, columns=PREDICTOR_COLUMNS) -> np.ndarray:
        """Numeric row in the requested column order (CarAhead as 0/1)."""
        mapping = {
            "MinDist": self.min_dist,
            "TimeMinDist": self.time_min_dist,
            "ActDist": self.act_dist,
            "OrtDist": self.ort_dist,
            "TimeDelayXP": self.time_delay_xp,
            "SpeedVeh": self.speed_veh,
            "AccVeh": self.acc_veh,
            "SpeedPed": self.speed_ped,
            "AccPed": self.acc_ped,
            "CPConfNr": float(self.cp_conf_nr),
            "PCConfNr": float(self.pc_conf_nr),
            "CarAhead": 1.0 if self.car_ahead else 0.0,
        }
        try:
            return np.array([mapping[c] for c in columns], dtype=float)
        except KeyError as exc:
            raise InvalidInput(f"unknown predictor column {exc.args[0]!r}") from exc


def vector_from_columns(columns, values) -> PredictorVector:
    """Rebuild a predictor vector from named numeric columns (all required)."""
    table = dict(zip(columns, values))
    missing = [c for c in PREDICTOR_COLUMNS if c not in table]
    if missing:
        raise InvalidInput(f"missing predictor column(s): {', '.join(missing)}")
    return PredictorVector(
        min_dist=float(table["MinDist"]),
        time_min_dist=float(table["TimeMinDist"]),
        act_dist=float(table["ActDist"]),
        ort_dist=float(table["OrtDist"]),
        time_delay_xp=float(table["TimeDelayXP"]),
        speed_veh=float(table["SpeedVeh"]),
        acc_veh=float(table["AccVeh"]),
        speed_ped=float(table["SpeedPed"]),
        acc_ped=float(table["AccPed"]),
        cp_conf_nr=int(table["CPConfNr"]),
        pc_conf_nr=int(table["PCConfNr"]),
        car_ahead=bool(table["CarAhead"]),
    )


def crossing_point(ped_path: PredictedPath, veh_path: PredictedPath) -> CrossingPoint:
    """First spatial intersection of the two predicted polylines.

    The paths are parameterized independently: each user's travel time to the
    point follows its own predicted progression.  A missing intersection is a
    valid outcome (exists=False).
    """
    if not ped_path.same_grid(veh_path):
        raise InvalidInput("predicted paths must share the same sub-grid")
    hit = first_polyline_intersection(ped_path.xy, ped_path.times, veh_path.xy, veh_path.times)
    if hit is None:
        return CrossingPoint(exists=False)
    point, t_ped, t_veh = hit
    t0 = float(ped_path.times[0])
    return CrossingPoint(
        exists=True,
        x=float(point[0]),
        y=float(point[1]),
        t_ped=t_ped - t0,
        t_veh=t_veh - t0,
    )


def time_delay_xp(xp: CrossingPoint) -> float:
    """Pedestrian's delay, relative to the vehicle, in reaching the crossing
    point: negative when the vehicle would get there after the pedestrian."""
    if not xp.exists:
        raise NoCrossing("predicted paths never intersect")
    return xp.t_ped - xp.t_veh


def ort_dist(ped_pos, veh_path: PredictedPath) -> float:
    """Distance from the pedestrian's position to the vehicle's forecast path."""
    if len(veh_path.xy) == 0:
        raise InvalidInput("empty predicted path")
    d, _, _ = point_to_polyline(ped_pos, veh_path.xy)
    return d


def count_simultaneous(cis, user_id: str, ts: int) -> int:
    """Number of conflict instants at step ts that involve the given user."""
    return sum(1 for ci in cis if ci.ts == ts and user_id in (ci.ped_id, ci.veh_id))


def car_ahead(
    trajs,
    veh_id: str,
    ts: int,
    lookahead: float = 15.0,
    *,
    mode: str = "ahead",
    lateral_tol: float = 2.0,
    n_history: int = 4,
    horizon: float = 8.0,
    smoothing: float = 0.0,
    subgrid: float = 0.1,
) -> bool:
    """Whether another vehicle constrains the subject vehicle's maneuvering.

    In "ahead" mode: true when another vehicle currently sits on the subject's
    predicted path (within ``lateral_tol``), at most ``lookahead`` meters
    ahead along it.  In "behind" mode the test mirrors to the half-line behind
    the subject's current heading.
    """
    if mode not in ("ahead", "behind"):
        raise InvalidInput("mode must be 'ahead' or 'behind'")
    by_id = {t.user_id: t for t in trajs}
    subject = by_id.get(veh_id)
    if subject is None:
        raise InvalidInput(f"unknown vehicle {veh_id!r}")
    i = subject.local_index(ts)
    if i is None:
        raise InvalidInput(f"vehicle {veh_id!r} has no point at step {ts}")
    others = [
        t for t in by_id.values()
        if t.kind is UserKind.VEHICLE and t.user_id != veh_id and t.local_index(ts) is not None
    ]
    if not others:
        return False

    if mode == "ahead":
        path = predict_path(subject, i, horizon, n_history, smoothing, subgrid)
        for other in others:
            pos = other.position(other.local_index(ts))
            dist, arc, _ = point_to_polyline(pos, path.xy)
            if dist <= lateral_tol and 1e-9 < arc <= lookahead:
                return True
        return False

    # behind: rectangle on the backward extension of the current heading
    here = subject.position(i)
    nxt = subject.position(i + 1) if i + 1 < len(subject) else None
    prev = subject.position(i - 1) if i >= 1 else None
    heading = (nxt - here) if nxt is not None else (here - prev)
    norm = float(np.hypot(*heading))
    if norm < 1e-12:
        return False
    heading = heading / norm
    for other in others:
        rel = other.position(other.local_index(ts)) - here
        lon = float(rel @ heading)
        lat = abs(float(rel[0] * heading[1] - rel[1] * heading[0]))
        if -lookahead <= lon < -1e-9 and lat <= lateral_tol:
            return True
    return False


def compute_predictors(
    ci: ConflictInstant,
    trajs,
    all_cis,
    config: PipelineConfig | None = None,
) -> PredictorVector:
    """Fully populated predictor vector for one conflict instant."""
    cfg = config or PipelineConfig()
    by_id = {t.user_id: t for t in trajs}
    try:
        ped = by_id[ci.ped_id]
        veh = by_id[ci.veh_id]
    except KeyError as exc:
        raise InvalidInput(f"conflict instant references unknown user {exc.args[0]!r}") from exc
    i_ped = ped.local_index(ci.ts)
    i_veh = veh.local_index(ci.ts)
    if i_ped is None or i_veh is None:
        raise InvalidInput(f"both users must have a point at step {ci.ts}")

    ped_pos = ped.position(i_ped)
    veh_pos = veh.position(i_veh)
    ped_path = predict_path(
        ped, i_ped, cfg.horizon, cfg.n_history, cfg.prediction_smoothing, cfg.subgrid
    )
    veh_path = predict_path(
        veh, i_veh, cfg.horizon, cfg.n_history, cfg.prediction_smoothing, cfg.subgrid
    )

    xp = crossing_point(ped_path, veh_path)
    # no crossing contributes the neutral delay 0 instead of an extra column
    delay = time_delay_xp(xp) if xp.exists else 0.0

    return PredictorVector(
        min_dist=ci.min_dist,
        time_min_dist=ci.time_min_dist,
        act_dist=float(np.hypot(*(ped_pos - veh_pos))),
        ort_dist=ort_dist(ped_pos, veh_path),
        time_delay_xp=delay,
        speed_veh=speed_at(veh, i_veh),
        acc_veh=accel_at(veh, i_veh),
        speed_ped=speed_at(ped, i_ped),
        acc_ped=accel_at(ped, i_ped),
        cp_conf_nr=count_simultaneous(all_cis, ci.veh_id, ci.ts),
        pc_conf_nr=count_simultaneous(all_cis, ci.ped_id, ci.ts),
        car_ahead=car_ahead(
            trajs,
            ci.veh_id,
            ci.ts,
            cfg.car_ahead_range,
            mode=cfg.car_ahead_mode,
            lateral_tol=cfg.car_ahead_lateral_tol,
            n_history=cfg.n_history,
            horizon=cfg.horizon,
            smoothing=cfg.prediction_smoothing,
            subgrid=cfg.subgrid,
        ),
    )


def build_predictor_table(cis, trajs, config: PipelineConfig | None = None):
    """Predictor vectors for every conflict instant, ordered by CI key."""
    ordered = sorted(cis, key=lambda c: c.key)
    return [(ci, compute_predictors(ci, trajs, ordered, config)) for ci in ordered]
