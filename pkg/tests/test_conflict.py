"""Tests for path prediction, minimum-distance search and conflict detection."""

import numpy as np
import pytest

from pvconflict.conflict import (
    ConflictInstant,
    detect_conflict_instants,
    group_conflicts,
    min_dist,
    predict_path,
)
from pvconflict.errors import InsufficientData, InvalidInput
from pvconflict.trajectory import UserKind, fit_smoothing_spline

from test_trajectory import line_points, make_traj


def two_agents(ped_xy, veh_xy, step=0.5, ped_t0=0.0, veh_t0=0.0):
    ped = make_traj(ped_xy, step=step, kind=UserKind.PEDESTRIAN, user_id="p1", t0=ped_t0)
    veh = make_traj(veh_xy, step=step, kind=UserKind.VEHICLE, user_id="v1", t0=veh_t0)
    return ped, veh


class TestPredictPath:
    def test_stationary_user(self):
        traj = make_traj([(1.0, 2.0)] * 6)
        path = predict_path(traj, 5)
        assert np.allclose(path.xy, [1.0, 2.0], atol=1e-9)
        assert len(path.times) == 81
        assert abs(path.times[0] - 2.5) < 1e-12

    def test_uniform_motion_reaches_horizon(self):
        traj = make_traj(line_points(6, speed=1.0))  # along +x
        path = predict_path(traj, 5, horizon=8.0)
        assert abs(path.xy[-1, 0] - (traj.position(5)[0] + 8.0)) < 1e-6
        assert abs(path.xy[-1, 1]) < 1e-9

    def test_requires_history(self):
        traj = make_traj(line_points(6))
        with pytest.raises(InsufficientData):
            predict_path(traj, 2, n_history=4)

    def test_curving_history_starts_along_end_tangent(self):
        # quarter-turn-ish arc; the initial predicted heading must match the
        # end tangent of the fitted curve (dense differencing oracle)
        ts = 0.5 * np.arange(4)
        pts = [(np.sin(0.6 * t), 1 - np.cos(0.6 * t)) for t in ts]
        traj = make_traj(pts)
        path = predict_path(traj, 3, horizon=2.0, subgrid=0.01)
        curve = fit_smoothing_spline(traj.points[:4], 0.0)
        h = 1e-6
        x0, y0 = curve.evaluate(curve.t_max - h)
        x1, y1 = curve.evaluate(curve.t_max)
        tangent = np.arctan2(y1 - y0, x1 - x0)
        d = path.xy[1] - path.xy[0]
        heading = np.arctan2(d[1], d[0])
        assert abs(heading - tangent) < 1e-6


class TestMinDist:
    def test_stationary_pair(self):
        ped, veh = two_agents([(0.0, 0.0)] * 6, [(3.0, 0.0)] * 6)
        a = predict_path(ped, 5)
        b = predict_path(veh, 5)
        d, t_off = min_dist(a, b)
        assert d == pytest.approx(3.0, abs=1e-9)
        assert t_off == 0.0

    def test_identical_paths(self):
        ped, _ = two_agents(line_points(6), line_points(6))
        a = predict_path(ped, 5)
        d, t_off = min_dist(a, a)
        assert d == 0.0
        assert t_off == 0.0

    def test_head_on_collision_at_horizon(self):
        # 1 m/s toward each other, 16 m apart at the prediction instant:
        # relative speed 2 m/s closes the gap exactly at 8 s
        ped_xy = [(0.5 * i, 0.0) for i in range(6)]
        veh_xy = [(21.0 - 0.5 * i, 0.0) for i in range(6)]
        ped, veh = two_agents(ped_xy, veh_xy)
        a = predict_path(ped, 5)
        b = predict_path(veh, 5)
        assert abs((b.xy[0, 0] - a.xy[0, 0]) - 16.0) < 1e-9
        d, t_off = min_dist(a, b)
        assert d == pytest.approx(0.0, abs=1e-6)
        assert t_off == pytest.approx(8.0, abs=1e-9)
        # brute force over all sub-grid instants agrees
        gaps = np.hypot(*(a.xy - b.xy).T)
        assert d == pytest.approx(float(gaps.min()), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            ped, veh = two_agents(rng.normal(size=(6, 2)), rng.normal(size=(6, 2)) + 3)
            a = predict_path(ped, 5)
            b = predict_path(veh, 5)
            assert min_dist(a, b) == min_dist(b, a)

    def test_mismatched_grids(self):
        ped, veh = two_agents(line_points(6), line_points(6))
        a = predict_path(ped, 5, subgrid=0.1)
        b = predict_path(veh, 5, subgrid=0.2)
        with pytest.raises(InvalidInput):
            min_dist(a, b)


def brute_force_detect(trajs, threshold, horizon, n_history=4, subgrid=0.1):
    """Double loop over steps and pairs, no shared state."""
    out = []
    peds = [t for t in trajs if t.kind is UserKind.PEDESTRIAN]
    vehs = [t for t in trajs if t.kind is UserKind.VEHICLE]
    all_steps = set()
    for t in trajs:
        all_steps.update(t.start_step + i for i in range(len(t)))
    for ts in sorted(all_steps):
        for ped in peds:
            for veh in vehs:
                ip, iv = ped.local_index(ts), veh.local_index(ts)
                if ip is None or iv is None or ip + 1 < n_history or iv + 1 < n_history:
                    continue
                a = predict_path(ped, ip, horizon, n_history, 0.0, subgrid)
                b = predict_path(veh, iv, horizon, n_history, 0.0, subgrid)
                d, t_off = min_dist(a, b)
                if d < threshold:
                    out.append(ConflictInstant(ts, ped.user_id, veh.user_id, d, t_off))
    out.sort(key=lambda c: c.key)
    return out


class TestDetect:
    def test_converging_pair_emits_instants(self):
        # pedestrian crossing the vehicle's lane: predictions overlap early
        ped_xy = [(0.0, -6.0 + 0.5 * i) for i in range(20)]
        veh_xy = [(-20.0 + 2.0 * i, 0.0) for i in range(20)]
        ped, veh = two_agents(ped_xy, veh_xy)
        cis = detect_conflict_instants([ped, veh], 5.0, 8.0)
        assert cis
        assert cis == brute_force_detect([ped, veh], 5.0, 8.0)

    def test_pedestrians_only_is_empty(self):
        a = make_traj(line_points(8), kind=UserKind.PEDESTRIAN, user_id="p1")
        b = make_traj(line_points(8, start=(0, 1)), kind=UserKind.PEDESTRIAN, user_id="p2")
        assert detect_conflict_instants([a, b], 5.0, 8.0) == []

    def test_parallel_paths_10m_apart_is_empty(self):
        ped = make_traj(line_points(10, speed=1.0), kind=UserKind.PEDESTRIAN, user_id="p1")
        veh = make_traj(line_points(10, speed=1.0, start=(0.0, 10.0)),
                        kind=UserKind.VEHICLE, user_id="v1")
        assert detect_conflict_instants([ped, veh], 5.0, 8.0) == []

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(11)
        trajs = []
        for u in range(3):
            trajs.append(make_traj(np.cumsum(rng.normal(0, 0.4, size=(10, 2)), axis=0),
                                   kind=UserKind.PEDESTRIAN, user_id=f"p{u}"))
        for u in range(3):
            trajs.append(make_traj(np.cumsum(rng.normal(0, 1.0, size=(10, 2)), axis=0) + 4,
                                   kind=UserKind.VEHICLE, user_id=f"v{u}"))
        counts = [len(detect_conflict_instants(trajs, thr, 8.0)) for thr in (1.0, 3.0, 5.0, 8.0)]
        assert counts == sorted(counts)

    def test_matches_brute_force_on_random_scene(self):
        rng = np.random.default_rng(23)
        trajs = []
        for u in range(4):
            start = rng.uniform(-8, 8, 2)
            vel = rng.uniform(-0.8, 0.8, 2)
            xy = [start + vel * 0.5 * i for i in range(12)]
            trajs.append(make_traj(xy, kind=UserKind.PEDESTRIAN, user_id=f"p{u}"))
        for u in range(4):
            start = rng.uniform(-20, 20, 2)
            vel = rng.uniform(-4, 4, 2)
            xy = [start + vel * 0.5 * i for i in range(12)]
            trajs.append(make_traj(xy, kind=UserKind.VEHICLE, user_id=f"v{u}"))
        module = detect_conflict_instants(trajs, 5.0, 8.0)
        brute = brute_force_detect(trajs, 5.0, 8.0)
        assert module == brute

    def test_instants_respect_invariants(self):
        ped_xy = [(0.0, -6.0 + 0.5 * i) for i in range(20)]
        veh_xy = [(-20.0 + 2.0 * i, 0.0) for i in range(20)]
        ped, veh = two_agents(ped_xy, veh_xy)
        for ci in detect_conflict_instants([ped, veh], 5.0, 8.0):
            assert 0 <= ci.min_dist < 5.0
            assert 0.0 <= ci.time_min_dist <= 8.0

    def test_skipped_pairs_are_counted(self):
        # vehicle appears late: at its early steps it lacks history
        ped = make_traj([(0.0, -5 + 0.25 * i) for i in range(16)],
                        kind=UserKind.PEDESTRIAN, user_id="p1")
        veh = make_traj([(-10 + 1.0 * i, 0.0) for i in range(8)],
                        kind=UserKind.VEHICLE, user_id="v1", t0=2.0)
        stats = {}
        detect_conflict_instants([ped, veh], 5.0, 8.0, stats=stats)
        assert stats["pairs_skipped_history"] == 3  # veh steps 4,5,6 lack history
        assert stats["pairs_evaluated"] > 0

    def test_bad_threshold(self):
        with pytest.raises(InvalidInput):
            detect_conflict_instants([], 0.0, 8.0)


class TestGrouping:
    def ci(self, ts, ped="p1", veh="v1"):
        return ConflictInstant(ts, ped, veh, 1.0, 0.5)

    def test_consecutive_instants_form_one_situation(self):
        cis = [self.ci(ts) for ts in range(10, 15)]
        grouped = group_conflicts(cis)
        assert len(grouped) == 1
        assert len(grouped[0].instants) == 5

    def test_gap_splits_situations(self):
        cis = [self.ci(ts) for ts in (1, 2, 3, 13, 14)]
        grouped = group_conflicts(cis, max_gap=2)
        assert [len(s.instants) for s in grouped] == [3, 2]

    def test_interleaved_pairs_stay_separate(self):
        cis = [self.ci(1), self.ci(1, veh="v2"), self.ci(2), self.ci(2, veh="v2")]
        grouped = group_conflicts(cis)
        assert len(grouped) == 2
        assert {(s.ped_id, s.veh_id) for s in grouped} == {("p1", "v1"), ("p1", "v2")}

    def test_gap_boundary_is_inclusive(self):
        cis = [self.ci(1), self.ci(3)]
        assert len(group_conflicts(cis, max_gap=2)) == 1
        assert len(group_conflicts(cis, max_gap=1)) == 2
