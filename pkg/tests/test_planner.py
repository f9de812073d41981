import json
import math

import pytest

from abot_explorer.errors import SchemaError, Unreachable
from abot_explorer.generate import GenParams, generate_scene
from abot_explorer.geometry import Pose
from abot_explorer.perception import NoiseModel
from abot_explorer.planner import (
    EpisodeLog,
    PlannerParams,
    execute_leg,
    replay_memo,
    run_episode,
    select_subgoal,
)
from abot_explorer.scene import Scene, SnaType, scene_from_dict
from abot_explorer.sgmemo import (
    MemoParams,
    SgMemo,
    Status,
    insert_remote,
    serialize,
    validate_memo,
)


def open_scene(size_m=10.0):
    n = int(size_m / 0.1)
    rows = []
    for r in range(n):
        if r == 0 or r == n - 1:
            rows.append("#" * n)
        else:
            rows.append("#" + "." * (n - 2) + "#")
    return scene_from_dict(
        {
            "resolution": 0.1,
            "floors": [
                {
                    "grid": rows,
                    "rooms": [],
                    "nodes": [],
                    "edges": [],
                    "objects": [],
                }
            ],
            "stair_links": [],
        }
    )


def memo_with_unvisited(current_pos, *entries, floor=0):
    memo = SgMemo.initial(Pose(*current_pos, 0.0, floor=floor), "corridor")
    for pos, node_floor in entries:
        insert_remote(memo, pos, node_floor, SnaType.NORMAL, 0)
    return memo


class TestParams:
    def test_defaults(self):
        p = PlannerParams()
        assert p.heading_cone_deg == 60.0
        assert p.step_m == 0.25
        assert p.observe_every_m == 1.0
        assert p.use_stairs

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"heading_cone_deg": 0.0},
            {"heading_cone_deg": 361.0},
            {"budget_m": 0.0},
            {"step_m": -0.1},
            {"observe_every_m": 0.0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            PlannerParams(**kwargs)


class TestSelect:
    def test_prefers_cone_over_distance(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((8.0, 5.0), 0), ((5.0, 5.5), 0)
        )
        # Node 2 is nearer but 90 degrees off the +x heading.
        pose = Pose(5.0, 5.0, 0.0)
        assert select_subgoal(memo, pose, PlannerParams()) == 1

    def test_cone_nearest_wins(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((9.0, 5.0), 0), ((7.0, 5.2), 0)
        )
        assert select_subgoal(memo, Pose(5.0, 5.0, 0.0), PlannerParams()) == 2

    def test_cone_boundary_inclusive(self):
        memo = memo_with_unvisited((5.0, 5.0), ((8.0, 5.0), 0))
        # Exactly 30 degrees off a 60 degree cone still counts.
        pose = Pose(5.0, 5.0, math.radians(30.0))
        assert select_subgoal(memo, pose, PlannerParams()) == 1

    def test_fallback_farthest_graph_distance(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((2.0, 5.0), 0), ((5.0, 1.0), 0)
        )
        # Both behind the agent: pick the graph-farthest (node 2, 4 m).
        pose = Pose(5.0, 5.0, 0.0)
        assert select_subgoal(memo, pose, PlannerParams()) == 2

    def test_fallback_tie_lowest_id(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((2.0, 5.0), 0), ((8.0, 5.0), 0)
        )
        pose = Pose(5.0, 5.0, math.pi / 2.0)
        assert select_subgoal(memo, pose, PlannerParams()) == 1

    def test_cross_floor_edge_costs_stair_constant(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((2.5, 5.0), 0), ((5.0, 5.0), 1)
        )
        pose = Pose(5.0, 5.0, math.pi / 2.0)
        # Node 1 sits 2.5 m away through the graph; the upstairs node costs
        # the fixed 3.0 m hop, so it is selected as farthest.
        assert select_subgoal(memo, pose, PlannerParams()) == 2

    def test_exclude_and_empty(self):
        memo = memo_with_unvisited((5.0, 5.0), ((8.0, 5.0), 0))
        pose = Pose(5.0, 5.0, 0.0)
        assert select_subgoal(memo, pose, PlannerParams(), exclude={1}) is None
        assert select_subgoal(memo, pose, PlannerParams()) == 1

    def test_stairs_disabled_filters_other_floors(self):
        memo = memo_with_unvisited(
            (5.0, 5.0), ((5.0, 5.0), 1), ((2.0, 5.0), 0)
        )
        pose = Pose(5.0, 5.0, 0.0)
        params = PlannerParams(use_stairs=False)
        assert select_subgoal(memo, pose, params) == 2
        memo2 = memo_with_unvisited((5.0, 5.0), ((5.0, 5.0), 1))
        assert select_subgoal(memo2, pose, params) is None


class TestLeg:
    def test_straight_leg_sample_count_and_headings(self):
        scene = open_scene()
        memo = memo_with_unvisited((4.0, 5.0), ((8.0, 5.0), 0))
        pose = Pose(4.0, 5.0, 0.0)
        leg = execute_leg(scene, memo, pose, 1, PlannerParams())
        assert len(leg) == 17
        total = sum(inc for _, inc in leg)
        assert total == pytest.approx(4.07, abs=0.05)
        # After the first diagonal nudge onto the cell lattice, motion runs
        # straight along +x.
        for p, _ in leg[2:]:
            assert abs(p.heading) < 1e-9
        last = leg[-1][0]
        assert math.hypot(last.x - 8.0, last.y - 5.0) < 0.15

    def test_snaps_target_off_wall(self):
        scene = open_scene()
        memo = memo_with_unvisited((4.0, 5.0), ((9.98, 5.0), 0))
        # Position inside the boundary wall: the leg lands on the nearest
        # free cell instead of failing.
        leg = execute_leg(
            scene, memo, Pose(4.0, 5.0, 0.0), 1, PlannerParams()
        )
        last = leg[-1][0]
        assert scene.floors[0].grid.is_free_world(last.x, last.y)
        assert math.hypot(last.x - 9.98, last.y - 5.0) < 0.5

    def test_unreachable_sealed_target(self):
        n = 100
        rows = []
        for r in range(n):
            if r == 0 or r == n - 1:
                rows.append("#" * n)
            elif 40 <= r <= 60:
                rows.append(
                    "#" + "." * 38 + "#" * 22 + "." * 38 + "#"
                )
            else:
                rows.append("#" + "." * (n - 2) + "#")
        rows[50] = "#" + "." * 38 + "#" * 10 + ".." + "#" * 10 + "." * 38 + "#"
        scene = scene_from_dict(
            {
                "resolution": 0.1,
                "floors": [
                    {
                        "grid": rows,
                        "rooms": [],
                        "nodes": [],
                        "edges": [],
                        "objects": [],
                    }
                ],
                "stair_links": [],
            }
        )
        # Target is the pocket at the center of the block, ringed by walls.
        memo = memo_with_unvisited((2.0, 2.0), ((4.95, 5.05), 0))
        with pytest.raises(Unreachable):
            execute_leg(scene, memo, Pose(2.0, 2.0, 0.0), 1, PlannerParams())

    def test_two_floor_leg_contains_stair_hop(self):
        scene = generate_scene(11, GenParams(floors=2, rooms_per_floor=3))
        f0, stairs0 = scene.node("f0_stairs")
        f1, stairs1 = scene.node("f1_stairs")
        memo = SgMemo.initial(
            Pose(*stairs0.position, 0.0, floor=f0), "corridor"
        )
        insert_remote(memo, stairs1.position, f1, SnaType.STAIRS, 0)
        leg = execute_leg(
            scene,
            memo,
            Pose(*stairs0.position, 0.0, floor=f0),
            1,
            PlannerParams(),
        )
        hops = [(p, inc) for p, inc in leg if inc == 3.0]
        assert len(hops) == 1
        assert hops[0][0].floor == f1
        assert leg[-1][0].floor == f1

    def test_stairs_disabled_raises(self):
        scene = generate_scene(11, GenParams(floors=2, rooms_per_floor=3))
        f0, stairs0 = scene.node("f0_stairs")
        f1, stairs1 = scene.node("f1_stairs")
        memo = SgMemo.initial(
            Pose(*stairs0.position, 0.0, floor=f0), "corridor"
        )
        insert_remote(memo, stairs1.position, f1, SnaType.STAIRS, 0)
        with pytest.raises(Unreachable):
            execute_leg(
                scene,
                memo,
                Pose(*stairs0.position, 0.0, floor=f0),
                1,
                PlannerParams(use_stairs=False),
            )


def start_pose_for(scene: Scene) -> Pose:
    _, node = scene.node("f0_room00")
    return Pose(node.position[0], node.position[1], 0.0, floor=0)


class TestEpisode:
    def test_explores_generated_scene(self):
        scene = generate_scene(1)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=300.0),
        )
        assert log.termination == "explored"
        assert log.final_memo is not None
        validate_memo(log.final_memo)
        assert log.final_memo.unvisited_ids() == []
        # Every room entry of the scene should be near some visited node.
        visited = [
            log.final_memo.nodes[i] for i in log.final_memo.visited_ids()
        ]
        for _, node in scene.nodes():
            best = min(
                math.hypot(
                    v.position[0] - node.position[0],
                    v.position[1] - node.position[1],
                )
                for v in visited
            )
            assert best < 1.5, f"{node.id} unexplored"

    def test_event_stream_shape(self):
        scene = generate_scene(2)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=60.0),
        )
        kinds = [ev["kind"] for ev in log.events]
        assert kinds[0] == "observed"
        assert kinds[-1] == "terminated"
        assert kinds.count("terminated") == 1
        cum = [ev["cum_dist"] for ev in log.events if ev["kind"] == "pose"]
        assert all(b > a for a, b in zip(cum, cum[1:]))
        assert log.path_length_m == pytest.approx(cum[-1])

    def test_budget_termination_overshoot_bounded(self):
        scene = generate_scene(3)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=10.0),
        )
        assert log.termination == "budget"
        assert 10.0 <= log.path_length_m <= 10.0 + 3.0

    def test_poses_with_distance_starts_at_zero(self):
        scene = generate_scene(2)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=30.0),
        )
        samples = log.poses_with_distance()
        start = start_pose_for(scene)
        assert samples[0][1] == 0.0
        assert samples[0][0].x == start.x
        assert samples[-1][1] == pytest.approx(log.path_length_m)

    def test_jsonl_round_trip(self):
        scene = generate_scene(2)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=40.0),
        )
        text = log.to_jsonl()
        back = EpisodeLog.from_jsonl(text)
        assert back.events == log.events
        assert back.termination == log.termination
        assert back.path_length_m == log.path_length_m
        assert back.to_jsonl() == text

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "not json\n",
            json.dumps({"schema": "other/1"}) + "\n",
            json.dumps({"schema": "abot-events/1"}) + "\n",
        ],
    )
    def test_jsonl_rejects(self, text):
        with pytest.raises(SchemaError):
            EpisodeLog.from_jsonl(text)

    def test_replay_rebuilds_memo_exactly(self):
        scene = generate_scene(4)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=200.0),
        )
        rebuilt = replay_memo(log.events)
        assert serialize(rebuilt) == serialize(log.final_memo)

    def test_replay_exact_under_noise(self):
        scene = generate_scene(5)
        noise = NoiseModel(
            pixel_sigma_px=3.0, dropout_prob=0.3, type_confusion_prob=0.1
        )
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=120.0),
            noise=noise,
            noise_seed=9,
        )
        validate_memo(log.final_memo)
        rebuilt = replay_memo(log.events)
        assert serialize(rebuilt) == serialize(log.final_memo)

    def test_replay_survives_jsonl_round_trip(self):
        scene = generate_scene(6)
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=80.0),
        )
        back = EpisodeLog.from_jsonl(log.to_jsonl())
        assert serialize(replay_memo(back.events)) == serialize(log.final_memo)

    def test_determinism(self):
        scene = generate_scene(7)
        kwargs = dict(
            planner_params=PlannerParams(budget_m=90.0),
            noise=NoiseModel(pixel_sigma_px=2.0, dropout_prob=0.2),
            noise_seed=3,
        )
        a = run_episode(scene, start_pose_for(scene), **kwargs)
        b = run_episode(scene, start_pose_for(scene), **kwargs)
        assert a.to_jsonl() == b.to_jsonl()
        assert serialize(a.final_memo) == serialize(b.final_memo)


class TestStairs:
    def test_two_floor_episode_reveals_and_climbs(self):
        scene = generate_scene(12, GenParams(floors=2, rooms_per_floor=4))
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=400.0),
        )
        reveals = [
            ev for ev in log.events if ev["kind"] == "stair_revealed"
        ]
        assert reveals
        assert reveals[0]["floor"] == 1
        memo = log.final_memo
        floors = {n.floor for n in memo.nodes.values()}
        assert floors == {0, 1}
        cross = [
            (a, b)
            for a, b in memo.edges
            if memo.nodes[a].floor != memo.nodes[b].floor
        ]
        assert cross
        assert any(
            ev["kind"] == "pose" and ev["floor"] == 1 for ev in log.events
        )

    def test_stairs_disabled_stays_downstairs(self):
        scene = generate_scene(12, GenParams(floors=2, rooms_per_floor=4))
        log = run_episode(
            scene,
            start_pose_for(scene),
            planner_params=PlannerParams(budget_m=400.0, use_stairs=False),
        )
        assert all(ev["kind"] != "stair_revealed" for ev in log.events)
        assert all(n.floor == 0 for n in log.final_memo.nodes.values())
        assert all(
            ev["floor"] == 0
            for ev in log.events
            if ev["kind"] == "pose"
        )
