"""Tests for the scripted scene generator."""

import numpy as np
import pytest

from pvconflict.config import PipelineConfig
from pvconflict.conflict import detect_conflict_instants
from pvconflict.errors import InvalidInput
from pvconflict.labeling import ReactionClass, label_conflict_instants
from pvconflict.synthesize import _arc_length, demo_scene, synthesize_scene
from pvconflict.trajectory import UserKind, accel_at, speed_at


def agent(**kwargs):
    spec = {"id": "a1", "kind": "ped", "start": [0.0, 0.0], "heading_deg": 0.0,
            "speed": 1.0, "duration": 10.0}
    spec.update(kwargs)
    return spec


def scene_of(*agents_, step=0.5, seed=0):
    return {"step": step, "seed": seed, "agents": list(agents_)}


class TestArcLength:
    def test_matches_numeric_quadrature(self):
        # oracle: dense trapezoid integration of the piecewise-linear speed
        rng = np.random.default_rng(8)
        for _ in range(20):
            v0 = rng.uniform(0.2, 5.0)
            v1 = rng.uniform(0.2, 5.0)
            t_from = rng.uniform(0.5, 4.0)
            t_to = t_from + rng.uniform(0.5, 4.0)
            t_end = rng.uniform(0.1, 10.0)
            tt = np.linspace(0.0, t_end, 20001)
            v = np.where(tt <= t_from, v0,
                         np.where(tt >= t_to, v1,
                                  v0 + (v1 - v0) * (tt - t_from) / (t_to - t_from)))
            expected = np.trapezoid(v, tt)
            got = _arc_length(v0, v1, t_from, t_to, t_end)
            assert got == pytest.approx(expected, abs=1e-5)


class TestAgents:
    def test_uniform_agent_constant_speed(self):
        trajs = synthesize_scene(scene_of(agent(speed=1.4, duration=8.0)))
        traj = trajs[0]
        for i in range(len(traj)):
            assert speed_at(traj, i) == pytest.approx(1.4, abs=1e-9)
            assert accel_at(traj, i) == pytest.approx(0.0, abs=1e-9)

    def test_deceleration_script_labels_prudent(self):
        # scripted slowdown crossing a constant vehicle: the labeler must
        # call the pedestrian prudent somewhere in the ramp
        ped = agent(id="p1", kind="ped", start=[0.0, -7.0], heading_deg=90.0,
                    speed=1.4, duration=14.0,
                    maneuver={"type": "decelerate", "t_from": 3.0, "t_to": 7.0,
                              "target_speed": 0.4})
        veh = agent(id="v1", kind="veh", start=[-28.0, 0.0], heading_deg=0.0,
                    speed=4.0, duration=14.0)
        trajs = synthesize_scene(scene_of(ped, veh))
        cis = detect_conflict_instants(trajs, 5.0, 8.0)
        labels, _ = label_conflict_instants(cis, trajs, PipelineConfig())
        ped_labels = [l for l in labels if l.user_kind is UserKind.PEDESTRIAN]
        assert any(l.reaction is ReactionClass.PRUDENT for l in ped_labels)

    def test_seeded_noise_is_reproducible(self):
        spec = agent(noise_std=0.05)
        a = synthesize_scene(scene_of(spec, seed=7))[0]
        b = synthesize_scene(scene_of(spec, seed=7))[0]
        assert np.array_equal(a.positions, b.positions)
        c = synthesize_scene(scene_of(spec, seed=8))[0]
        assert not np.array_equal(a.positions, c.positions)

    def test_curved_agent_keeps_speed(self):
        spec = agent(turn_rate_deg_s=20.0, speed=2.0, duration=8.0)
        traj = synthesize_scene(scene_of(spec))[0]
        for i in range(2, len(traj) - 2):
            assert speed_at(traj, i) == pytest.approx(2.0, rel=0.02)

    def test_t_start_snaps_to_grid(self):
        traj = synthesize_scene(scene_of(agent(t_start=1.27)))[0]
        assert traj.times[0] == pytest.approx(1.5)


class TestValidation:
    def test_unknown_maneuver_type(self):
        spec = agent(maneuver={"type": "teleport"})
        with pytest.raises(InvalidInput):
            synthesize_scene(scene_of(spec))

    def test_decelerate_needs_lower_target(self):
        spec = agent(maneuver={"type": "decelerate", "t_from": 1.0, "t_to": 2.0,
                               "target_speed": 5.0})
        with pytest.raises(InvalidInput):
            synthesize_scene(scene_of(spec))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidInput):
            synthesize_scene(scene_of(agent(), agent()))

    def test_empty_scenario_rejected(self):
        with pytest.raises(InvalidInput):
            synthesize_scene({"agents": []})

    def test_unsupported_version(self):
        with pytest.raises(InvalidInput):
            synthesize_scene({"scenario_version": 99, "agents": [agent()]})


class TestDemoScene:
    def test_holds_twenty_agents(self):
        trajs = synthesize_scene(demo_scene(seed=3))
        assert len(trajs) == 20
        kinds = {t.kind for t in trajs}
        assert kinds == {UserKind.PEDESTRIAN, UserKind.VEHICLE}

    def test_produces_all_reaction_classes_for_both_kinds(self):
        cfg = PipelineConfig()
        trajs = synthesize_scene(demo_scene(seed=3))
        cis = detect_conflict_instants(trajs, cfg.conflict_threshold, cfg.horizon)
        labels, _ = label_conflict_instants(cis, trajs, cfg)
        for kind in (UserKind.PEDESTRIAN, UserKind.VEHICLE):
            classes = {l.reaction for l in labels if l.user_kind is kind}
            assert classes == set(ReactionClass)

    def test_deterministic_for_fixed_seed(self):
        a = demo_scene(seed=5)
        b = demo_scene(seed=5)
        assert a == b
