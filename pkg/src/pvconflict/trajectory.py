"""Tracked road users and their smoothed kinematics.

A trajectory is a time-stamped ground-plane track sampled on a fixed grid
(0.5 s by default).  Short windows of a track are summarized by a pair of
cubic smoothing splines x(t), y(t); beyond the last observation the curve is
continued at constant velocity along its end tangent, which is what makes an
8 s position forecast from a 1.5 s window usable as a "no evasive action"
baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import InterpolatedUnivariateSpline, UnivariateSpline

from .errors import InsufficientData, InvalidInput, OutOfDomain, OutOfRange

_TIME_TOL = 1e-6


class UserKind(enum.Enum):
    """Road-user category; the CSV tags are 'ped' and 'veh'."""

    PEDESTRIAN = "ped"
    VEHICLE = "veh"

    @classmethod
    def from_tag(cls, tag: str) -> "UserKind":
        try:
            return cls(tag)
        except ValueError:
            raise InvalidInput(f"unknown user kind {tag!r} (expected 'ped' or 'veh')")


@dataclass(frozen=True)
class TrackPoint:
    """One tracked ground-plane position, in meters, at time t seconds."""

    t: float
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.t) and math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInput(f"non-finite track point (t={self.t}, x={self.x}, y={self.y})")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One road user's track on a constant time step.

    Points must be strictly increasing in t with spacing equal to ``step``;
    at least two points are required.
    """

    user_id: str
    kind: UserKind
    points: tuple[TrackPoint, ...]
    step: float = 0.5
    _t: np.ndarray = field(init=False, repr=False)
    _xy: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = tuple(self.points)
        object.__setattr__(self, "points", points)
        if len(points) < 2:
            raise InsufficientData(
                f"trajectory {self.user_id!r} needs at least 2 points, got {len(points)}"
            )
        if self.step <= 0:
            raise InvalidInput("trajectory step must be positive")
        t = np.array([p.t for p in points], dtype=float)
        dt = np.diff(t)
        if np.any(dt <= 0):
            raise InvalidInput(f"trajectory {self.user_id!r}: times must be strictly increasing")
        if np.any(np.abs(dt - self.step) > _TIME_TOL):
            raise InvalidInput(
                f"trajectory {self.user_id!r}: spacing must equal the step ({self.step} s)"
            )
        xy = np.array([(p.x, p.y) for p in points], dtype=float)
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_xy", xy)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return self._t

    @property
    def positions(self) -> np.ndarray:
        """(n, 2) array of ground-plane positions."""
        return self._xy

    @property
    def start_step(self) -> int:
        """Global grid index of the first point (t / step, rounded)."""
        return int(round(self._t[0] / self.step))

    def position(self, i: int) -> np.ndarray:
        self._check_index(i)
        return self._xy[i]

    def local_index(self, ts: int) -> int | None:
        """Local point index for global grid step ``ts``, or None if uncovered."""
        i = ts - self.start_step
        if 0 <= i < len(self.points):
            return i
        return None

    def _check_index(self, i: int) -> None:
        if not 0 <= i < len(self.points):
            raise OutOfRange(
                f"index {i} outside trajectory {self.user_id!r} of length {len(self.points)}"
            )


@dataclass(frozen=True, eq=False)
class ParametricCurve:
    """Per-coordinate cubic smoothing spline with constant-velocity continuation.

    Inside [t_min, t_max] evaluation is the fitted spline; past t_max the
    curve continues linearly along the end tangent.  Times before t_min are
    out of domain.
    """

    t_min: float
    t_max: float
    _x: object = field(repr=False)
    _y: object = field(repr=False)
    _end_pos: np.ndarray = field(repr=False)
    _end_vel: np.ndarray = field(repr=False)

    def evaluate(self, t):
        """Positions at time(s) t; scalar in, (x, y) floats out."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_min - _TIME_TOL):
            raise OutOfDomain(
                f"cannot evaluate at t={np.min(t_arr)} before domain start {self.t_min}"
            )
        clipped = np.minimum(t_arr, self.t_max)
        x = np.asarray(self._x(clipped), dtype=float)
        y = np.asarray(self._y(clipped), dtype=float)
        over = np.maximum(t_arr - self.t_max, 0.0)
        x = x + over * self._end_vel[0]
        y = y + over * self._end_vel[1]
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(x), float(y)
        return x, y

    def velocity(self, t):
        """Velocity vector(s) at time(s) t (end tangent past t_max)."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < self.t_min - _TIME_TOL):
            raise OutOfDomain(
                f"cannot evaluate at t={np.min(t_arr)} before domain start {self.t_min}"
            )
        clipped = np.minimum(t_arr, self.t_max)
        vx = np.asarray(self._x.derivative()(clipped), dtype=float)
        vy = np.asarray(self._y.derivative()(clipped), dtype=float)
        beyond = t_arr > self.t_max
        vx = np.where(beyond, self._end_vel[0], vx)
        vy = np.where(beyond, self._end_vel[1], vy)
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(vx), float(vy)
        return vx, vy


def fit_smoothing_spline(points, smoothing: float = 0.0) -> ParametricCurve:
    """Fit per-coordinate cubic smoothing splines through track points.

    ``smoothing`` is the spline's residual budget (sum of squared residuals
    allowed by the fit); 0 yields interpolation.  With fewer than 4 points
    the degree drops so the fit stays determined.
    """
    points = tuple(points)
    if len(points) < 2:
        raise InsufficientData(f"spline fit needs at least 2 points, got {len(points)}")
    if smoothing < 0:
        raise InvalidInput("smoothing must be >= 0")
    t = np.array([p.t for p in points], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise InvalidInput("spline fit needs strictly increasing times")
    x = np.array([p.x for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    k = min(3, len(points) - 1)
    if smoothing == 0:
        sx = InterpolatedUnivariateSpline(t, x, k=k)
        sy = InterpolatedUnivariateSpline(t, y, k=k)
    else:
        sx = UnivariateSpline(t, x, k=k, s=smoothing)
        sy = UnivariateSpline(t, y, k=k, s=smoothing)
    t_max = float(t[-1])
    end_pos = np.array([float(sx(t_max)), float(sy(t_max))])
    end_vel = np.array([float(sx.derivative()(t_max)), float(sy.derivative()(t_max))])
    return ParametricCurve(
        t_min=float(t[0]), t_max=t_max, _x=sx, _y=sy, _end_pos=end_pos, _end_vel=end_vel
    )


def extrapolate(curve: ParametricCurve, t: float):
    """Position on the curve at time t (constant velocity past the domain)."""
    return curve.evaluate(t)


def speed_at(traj: Trajectory, i: int) -> float:
    """Ground speed at point index i, m/s.

    Central finite difference over the neighboring points; one-sided at the
    first and last index.  Always non-negative.
    """
    traj._check_index(i)
    xy = traj.positions
    n = len(traj)
    if i == 0:
        v = (xy[1] - xy[0]) / traj.step
    elif i == n - 1:
        v = (xy[n - 1] - xy[n - 2]) / traj.step
    else:
        v = (xy[i + 1] - xy[i - 1]) / (2.0 * traj.step)
    return float(np.hypot(v[0], v[1]))


def accel_at(traj: Trajectory, i: int) -> float:
    """Signed rate of change of speed along the path at index i, m/s².

    Negative values mean the user is decelerating.  Same differencing scheme
    as :func:`speed_at`, applied to the speed series.
    """
    traj._check_index(i)
    n = len(traj)
    if i == 0:
        return (speed_at(traj, 1) - speed_at(traj, 0)) / traj.step
    if i == n - 1:
        return (speed_at(traj, n - 1) - speed_at(traj, n - 2)) / traj.step
    return (speed_at(traj, i + 1) - speed_at(traj, i - 1)) / (2.0 * traj.step)
