"""Two-tier controller: app registration, tick dispatch, tier isolation,
action application and the built-in app set."""

import pytest

from rrsim.ric import (
    Action,
    Controller,
    ControllerApp,
    DuplicateName,
    InvalidInterval,
    RicError,
    builtin_apps,
)
from rrsim.runner import Simulation
from rrsim.scenario import scenario_from_dict
from rrsim.simcore import EventKind, Kernel
from rrsim.world import World

BASE = {
    "nodes": [
        {"id": "gw", "kind": "Gateway", "position": [0, 0, 10]},
        {"id": "bs1", "kind": "TerrestrialBS", "position": [0, 0, 25], "tx_power_dbm": 40},
        {"id": "ue1", "kind": "UE", "position": [100, 0, 1.5]},
    ]
}


def make_controller(ric_cfg=None, data=None):
    world = World(scenario_from_dict(data or BASE))
    kernel = Kernel(0)
    return Controller(world, kernel, ric_cfg), kernel


def nonrt(name, handler, interval=60_000):
    return ControllerApp(name, "NonRT", handler, interval)


def nearrt(name, handler, interval=100):
    return ControllerApp(name, "NearRT", handler, interval)


class TestRegistration:
    def test_duplicate_names_rejected(self):
        ctl, _ = make_controller()
        ctl.register_app(nonrt("a", lambda c, s: []))
        with pytest.raises(DuplicateName):
            ctl.register_app(nonrt("a", lambda c, s: []))

    def test_non_rt_interval_floor(self):
        ctl, _ = make_controller()
        with pytest.raises(InvalidInterval):
            ctl.register_app(nonrt("fast", lambda c, s: [], interval=500))
        ctl.register_app(nonrt("ok", lambda c, s: [], interval=1_000))

    def test_near_rt_interval_band(self):
        ctl, _ = make_controller()
        with pytest.raises(InvalidInterval):
            ctl.register_app(nearrt("too_fast", lambda c, s: [], interval=5))
        with pytest.raises(InvalidInterval):
            ctl.register_app(nearrt("too_slow", lambda c, s: [], interval=1_500))
        ctl.register_app(nearrt("lo", lambda c, s: [], interval=10))
        ctl.register_app(nearrt("hi", lambda c, s: [], interval=1_000))


class TestDispatch:
    def test_periodic_ticks(self):
        ctl, kernel = make_controller()
        calls = []
        ctl.register_app(nearrt("ticker", lambda c, s: calls.append(c.kernel.clock) or [], 100))
        kernel.run_until(350)
        assert calls == [100, 200, 300]

    def test_failing_handler_is_logged_not_fatal(self):
        ctl, kernel = make_controller()

        def broken(c, s):
            raise RuntimeError("boom")

        ctl.register_app(nearrt("bad", broken, 100))
        ctl.register_app(nearrt("good", lambda c, s: [Action("Note", {"text": "alive"})], 100))
        kernel.run_until(100)
        texts = [d for _, d in kernel.log.actions]
        assert any("AppError bad" in t for t in texts)
        assert any("alive" in t for t in texts)

    def test_snapshot_cached_within_instant(self):
        ctl, kernel = make_controller()
        seen = []
        ctl.register_app(nearrt("a", lambda c, s: seen.append(s) or [], 100))
        ctl.register_app(nearrt("b", lambda c, s: seen.append(s) or [], 100))
        kernel.run_until(100)
        assert seen[0] is seen[1]

    def test_snapshot_refreshes_on_topology_change(self):
        ctl, kernel = make_controller()
        first = ctl.snapshot()
        ctl.topology_version += 1
        assert ctl.snapshot() is not first


class TestTierIsolation:
    def test_deploy_reserved_to_non_rt(self):
        ctl, _ = make_controller()
        from rrsim.ntn_planner import DeploymentPlan

        action = Action("DeployPlan", {"plan": DeploymentPlan()})
        with pytest.raises(RicError):
            ctl.apply_action(action, nearrt("x", lambda c, s: []))

    def test_ris_config_reserved_to_near_rt(self):
        data = dict(BASE)
        data["nodes"] = BASE["nodes"] + [
            {"id": "r1", "kind": "RisPanel", "position": [10, 0, 2], "ris": {"rows": 1, "cols": 4}}
        ]
        ctl, _ = make_controller(data=data)
        action = Action("ApplyRisConfig", {"panel": "r1", "part": 0, "config": [1, 1, 1, 1]})
        with pytest.raises(RicError):
            ctl.apply_action(action, nonrt("x", lambda c, s: []))
        ctl.apply_action(action, nearrt("y", lambda c, s: []))
        assert list(ctl.world.panel_states["r1"].config) == [1, 1, 1, 1]

    def test_unknown_action_kind(self):
        ctl, _ = make_controller()
        with pytest.raises(RicError):
            ctl.apply_action(Action("Reboot"), nonrt("x", lambda c, s: []))


class TestActions:
    def test_switch_policy(self):
        ctl, _ = make_controller()
        ctl.apply_action(Action("SwitchPolicy", {"name": "ris-off"}), nearrt("x", lambda c, s: []))
        assert ctl.policy == "ris-off"

    def test_deploy_plan_adds_nodes_and_bumps_version(self):
        from rrsim.ntn_planner import DeploymentPlan, Placement
        from rrsim.scenario import NodeKind

        ctl, _ = make_controller()
        before = ctl.topology_version
        plan = DeploymentPlan(
            placements=[Placement("uav_0", NodeKind.UAV, (50, 50, 120), 35.0, 3.5)],
            estimated_coverage_ratio=1.0,
        )
        ctl.apply_action(Action("DeployPlan", {"plan": plan}), nonrt("x", lambda c, s: []))
        assert ctl.topology_version == before + 1
        assert ctl.blackboard["plan_deployed"]
        deployed = [n for n in ctl.world.nodes.values() if n.node_id.startswith("deployed_")]
        assert len(deployed) == 1 and deployed[0].serving

    def test_recluster_builds_assignment(self):
        ctl, _ = make_controller()
        ctl.world.heartbeat(0)
        ctl.apply_action(Action("Recluster", {"L": 1}), nearrt("x", lambda c, s: []))
        assert ctl.cluster_assignment.aps_for("ue1") == ("bs1",)


class TestBuiltinApps:
    def test_expected_app_set(self):
        names = {a.name for a in builtin_apps()}
        assert {
            "FailureMonitor",
            "RecoveryPlanner",
            "RisCodebookTracker",
            "RisIterativeTuner",
            "CfClusterer",
            "ScriptRunner",
            "EnergyManager",
            "SensingManager",
        } == names

    def test_tier_assignment(self):
        tiers = {a.name: a.tier for a in builtin_apps()}
        assert tiers["RecoveryPlanner"] == "NonRT"
        assert tiers["RisIterativeTuner"] == "NearRT"

    def test_codebook_tracker_idle_under_max_throughput(self, two_ue_scenario):
        sim = Simulation(two_ue_scenario)
        sim.controller.policy = "max-throughput"
        snapshot = sim.controller.snapshot()
        from rrsim.ric import _ris_codebook_tracker

        assert _ris_codebook_tracker(sim.controller, snapshot) == []

    def test_offline_codebooks_built_from_config(self, two_ue_scenario):
        sim = Simulation(two_ue_scenario)
        assert set(sim.controller.codebooks) == {("ris1", 0), ("ris1", 1)}
        for cb in sim.controller.codebooks.values():
            assert len(cb.codewords) == 7
            assert all(len(cw) == 38 for cw in cb.codewords)

    def test_script_runner_emits_switch_and_shutdown(self, indoor_scenario):
        sim = Simulation(indoor_scenario)
        log = sim.run(30_000)
        texts = [d for t, d in log.actions if t == 30_000]
        assert any("SwitchPolicy by ScriptRunner: ris-off" in t for t in texts)
        assert any("ApplyRisConfig by ScriptRunner" in t for t in texts)
        assert list(sim.world.panel_states["ris1"].config) == [0] * 76
