"""Deterministic generation of scripted trajectory scenes.

Agents move along a straight (optionally turning) course with a piecewise
speed profile: constant, or a linear ramp between two instants (decelerate /
accelerate scripts).  Positions are produced directly on the tracking grid,
so synthesized scenes are exact test inputs for the detection and labeling
stages; optional Gaussian tracking noise is seeded and reproducible.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInput
from .trajectory import TrackPoint, Trajectory, UserKind

SCENARIO_VERSION = 1

_MANEUVER_TYPES = ("uniform", "decelerate", "accelerate")


def _speed_profile(spec: dict):
    """Initial speed, target speed and ramp window from an agent spec."""
    v0 = float(spec.get("speed", 1.0))
    if v0 < 0:
        raise InvalidInput("agent speed must be >= 0")
    man = spec.get("maneuver") or {"type": "uniform"}
    mtype = man.get("type", "uniform")
    if mtype not in _MANEUVER_TYPES:
        raise InvalidInput(f"unknown maneuver type {mtype!r}")
    if mtype == "uniform":
        return v0, v0, 0.0, 0.0
    v1 = float(man["target_speed"])
    t_from = float(man["t_from"])
    t_to = float(man["t_to"])
    if v1 < 0:
        raise InvalidInput("target_speed must be >= 0")
    if t_to <= t_from:
        raise InvalidInput("maneuver needs t_to > t_from")
    if mtype == "decelerate" and v1 >= v0:
        raise InvalidInput("decelerate needs target_speed below speed")
    if mtype == "accelerate" and v1 <= v0:
        raise InvalidInput("accelerate needs target_speed above speed")
    return v0, v1, t_from, t_to


def _arc_length(v0, v1, t_from, t_to, t):
    """Distance covered by time t under the piecewise-linear speed profile."""
    if t <= 0:
        return 0.0
    s = v0 * min(t, t_from)
    if t > t_from:
        te = min(t, t_to)
        dt = te - t_from
        if dt > 0:
            v_end = v0 + (v1 - v0) * dt / (t_to - t_from)
            s += 0.5 * (v0 + v_end) * dt
        if t > t_to:
            s += v1 * (t - t_to)
    return s


def _agent_track(spec: dict, step: float, rng: np.random.Generator):
    agent_id = spec.get("id")
    if not agent_id:
        raise InvalidInput("every agent needs an id")
    kind = UserKind.from_tag(spec.get("kind", "ped"))
    start = np.asarray(spec.get("start", (0.0, 0.0)), dtype=float)
    if start.shape != (2,):
        raise InvalidInput(f"agent {agent_id!r}: start must be [x, y]")
    heading = math.radians(float(spec.get("heading_deg", 0.0)))
    turn_rate = math.radians(float(spec.get("turn_rate_deg_s", 0.0)))
    duration = float(spec.get("duration", 10.0))
    if duration < step:
        raise InvalidInput(f"agent {agent_id!r}: duration shorter than one step")
    t_start = round(float(spec.get("t_start", 0.0)) / step) * step
    noise_std = float(spec.get("noise_std", 0.0))
    v0, v1, t_from, t_to = _speed_profile(spec)

    n_steps = int(round(duration / step))
    rel_t = step * np.arange(n_steps + 1)
    if turn_rate == 0.0:
        arc = np.array([_arc_length(v0, v1, t_from, t_to, t) for t in rel_t])
        xy = start[None, :] + arc[:, None] * np.array([math.cos(heading), math.sin(heading)])
    else:
        # curved course: fine forward integration, sampled at the grid
        fine = 0.005
        n_fine = int(round(duration / fine))
        tt = fine * np.arange(n_fine + 1)
        v = np.where(
            tt <= t_from, v0,
            np.where(tt >= t_to, v1, v0 + (v1 - v0) * (tt - t_from) / max(t_to - t_from, fine)),
        )
        ang = heading + turn_rate * tt
        dx = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] * np.cos(ang[1:]) + v[:-1] * np.cos(ang[:-1])) * fine)))
        dy = np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] * np.sin(ang[1:]) + v[:-1] * np.sin(ang[:-1])) * fine)))
        idx = np.round(rel_t / fine).astype(int)
        xy = start[None, :] + np.column_stack([dx[idx], dy[idx]])

    if noise_std > 0:
        xy = xy + rng.normal(0.0, noise_std, size=xy.shape)

    points = tuple(
        TrackPoint(t=float(t_start + rel_t[k]), x=float(xy[k, 0]), y=float(xy[k, 1]))
        for k in range(n_steps + 1)
    )
    return Trajectory(user_id=str(agent_id), kind=kind, points=points, step=step)


def synthesize_scene(scenario: dict, step: float | None = None) -> list[Trajectory]:
    """Build trajectories for every agent of a scenario document.

    The scenario's own ``step`` wins unless one is passed explicitly; the
    seed drives all tracking noise, so equal inputs give identical scenes.
    """
    if not isinstance(scenario, dict):
        raise InvalidInput("scenario must be a JSON object")
    version = scenario.get("scenario_version", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise InvalidInput(f"unsupported scenario_version {version!r}")
    agents = scenario.get("agents")
    if not agents:
        raise InvalidInput("scenario has no agents")
    step = float(step if step is not None else scenario.get("step", 0.5))
    if step <= 0:
        raise InvalidInput("step must be positive")
    seed = int(scenario.get("seed", 0))
    ids = [a.get("id") for a in agents]
    if len(set(ids)) != len(ids):
        raise InvalidInput("agent ids must be unique")
    out = []
    for index, spec in enumerate(agents):
        rng = np.random.default_rng([seed, index])
        out.append(_agent_track(spec, step, rng))
    return out


_DEMO_MEET = 7.0  # agent-local arrival time at the scheduled meeting point

# Corridor cells of the demo scene: (vehicle (speed, ramp target, ramp
# window), follower flag, pedestrians as (speed, ramp target, ramp window,
# meeting offset)).  The scene is built so the reaction-choice sample is
# learnable but never completely separable:
#   - every agent is positioned by its constant-speed projection, so a
#     maneuver resolves a genuinely predicted collision instead of being
#     baked into the schedule;
#   - each maneuvering vehicle has an exact constant-speed twin in another
#     cell, and each scripted pedestrian template has a constant-speed twin
#     as well: the maneuvering user's pre-ramp instants then duplicate the
#     twin's no-reaction rows feature for feature while carrying reaction
#     labels, which anchors the likelihood at a finite optimum;
#   - scripted maneuvers repeat three times per template so every labeled
#     cluster survives the train/test split.
_DEMO_CELLS = (
    ((5.2, 1.0, (3.5, 7.5)), False, ((1.15, None, None, 0.0),)),
    ((5.2, None, None), True, ((1.15, None, None, 0.0),)),
    ((2.9, 6.0, (3.5, 7.5)), False, ((1.15, None, None, 0.0),)),
    ((2.9, None, None), False, ((1.15, None, None, 0.0),)),
    ((4.0, None, None), False,
     ((1.35, 0.3, (3.5, 7.5), 0.0), (1.35, 0.3, (3.5, 7.5), 3.0),
      (1.35, 0.3, (3.5, 7.5), 6.0))),
    ((4.0, None, None), False,
     ((0.9, 2.2, (3.5, 5.5), 0.0), (0.9, 2.2, (3.5, 5.5), 3.0),
      (0.9, 2.2, (3.5, 5.5), 6.0))),
    ((4.0, None, None), False, ((1.35, None, None, 0.0), (0.9, None, None, 3.5))),
)


def demo_scene(seed: int = 0, noise_std: float = 0.0, n_cells: int = 7) -> dict:
    """Scripted scene of isolated corridor cells (20 agents by default).

    Each cell is one vehicle corridor 60 m from its neighbors: a vehicle
    (optionally trailed by a follower) meets one or more crossing pedestrians
    at scheduled times.  Yielding and asserting scripts mix with constant
    motion per the twin/anchor layout documented on the cell table, so every
    reaction class occurs for both user kinds, every predictor column varies,
    and the labeled sample stays estimable.  Cells cannot interact, which
    keeps the label structure of the scene exactly as scripted.
    """
    if n_cells < 1:
        raise InvalidInput("n_cells must be >= 1")
    rng = np.random.default_rng(seed)
    agents = []

    pid = 0
    for c in range(n_cells):
        (v0, v1, vramp), follower, peds = _DEMO_CELLS[c % len(_DEMO_CELLS)]
        east = c % 2 == 0
        sign = 1.0 if east else -1.0
        y_c = 60.0 * c
        t0 = 2.0 * c + float(rng.integers(0, 2)) * 0.5

        vehicle = {
            "id": f"v{c + 1}",
            "kind": "veh",
            "start": [round(-sign * v0 * _DEMO_MEET, 3), y_c - 1.2 * sign],
            "heading_deg": 0.0 if east else 180.0,
            "speed": v0,
            "t_start": t0,
            "duration": 19.0,
            "noise_std": noise_std,
        }
        if vramp:
            vehicle["maneuver"] = {
                "type": "decelerate" if v1 < v0 else "accelerate",
                "t_from": vramp[0], "t_to": vramp[1], "target_speed": v1,
            }
        agents.append(vehicle)
        if follower:
            agents.append({
                "id": f"v{c + 1}f",
                "kind": "veh",
                "start": [round(vehicle["start"][0] - sign * 9.0, 3), vehicle["start"][1]],
                "heading_deg": vehicle["heading_deg"],
                "speed": v0,
                "t_start": t0,
                "duration": 19.0,
                "noise_std": noise_std,
            })

        for w, (p0, p1, pramp, t_off) in enumerate(peds):
            pid += 1
            t_local = _DEMO_MEET + t_off
            south = w % 2 == 0
            psign = 1.0 if south else -1.0
            lane_y = vehicle["start"][1]
            ped = {
                "id": f"p{pid}",
                "kind": "ped",
                # constant-speed projections of both users meet at t_local
                "start": [round(vehicle["start"][0] + sign * v0 * t_local, 3),
                          round(lane_y - psign * p0 * _DEMO_MEET, 3)],
                "heading_deg": 90.0 if south else -90.0,
                "speed": p0,
                "t_start": t0 + t_local - _DEMO_MEET,
                "duration": 14.0,
                "noise_std": noise_std,
            }
            if pramp:
                ped["maneuver"] = {
                    "type": "decelerate" if p1 < p0 else "accelerate",
                    "t_from": pramp[0], "t_to": pramp[1], "target_speed": p1,
                }
            agents.append(ped)
    return {
        "scenario_version": SCENARIO_VERSION,
        "step": 0.5,
        "seed": seed,
        "agents": agents,
    }
