"""
Tests for the simulation loop, preset missions and result files
"""
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from functools import lru_cache

import numpy as np
import pytest


@lru_cache(maxsize=None)
def _mission(mission_id: int, radio: str, seed: int = 0):
    from core.missions import replicate_mission

    return replicate_mission(mission_id, radio, seed=seed)


def _scenario(text: str, **sections):
    from core.scenario import parse_scenario

    data = tomllib.loads(text)
    data.update(sections)
    return parse_scenario(data)


def _with_ca(text: str, policy: str = "lower_id_first", duration: float = 20.0):
    data = tomllib.loads(text)
    for drone in data["drones"]:
        drone["collision_avoidance"] = True
    data["duration"] = duration
    data["protocol"] = {"hold_policy": policy}
    return data


def _encounter(seed: int, duration: float = 30.0) -> dict:
    """
    Two COTS drones converging at 30 m altitude under hold_both. Each reaches
    the crossing point 14-16 s in, the second track is offset by up to 8 m, so
    the unavoided paths always pass closer than the 20 m threshold.
    """
    from utils.rng import stream

    rng = stream(seed, "encounter")
    heading = float(rng.uniform(0.0, 2 * math.pi))
    headings = (heading, heading + float(rng.uniform(math.radians(30.0), math.pi)))
    speeds = rng.uniform(4.0, 12.0, 2)
    arrivals = 15.0 + rng.uniform(-1.0, 1.0, 2)
    miss = float(rng.uniform(-8.0, 8.0))
    drones = []
    for k in range(2):
        u = np.array([math.cos(headings[k]), math.sin(headings[k])])
        centre = miss * np.array([-u[1], u[0]]) if k else np.zeros(2)
        reach = float(speeds[k] * arrivals[k])
        start, end = centre - reach * u, centre + reach * u
        drones.append({"id": k + 1, "radio": "cots", "collision_avoidance": True, "waypoints": [
            {"position": [float(start[0]), float(start[1]), 30.0], "speed": float(speeds[k])},
            {"position": [float(end[0]), float(end[1]), 30.0]},
        ]})
    return {"name": f"encounter-{seed}", "seed": seed, "duration": duration,
            "scene": {"area": [-400.0, -400.0, 400.0, 400.0], "elements": False},
            "drones": drones, "protocol": {"hold_policy": "hold_both"}}


def _encounter_outcome(seed: int):
    """(achieved minimum separation, allowed floor, worst beacon delivery) of one encounter"""
    from core.scenario import parse_scenario
    from core.simulation import run

    scenario = parse_scenario(_encounter(seed))
    report = run(scenario)
    v_max = max(d.trajectory.waypoints[0].speed_to_next for d in scenario.drones)
    floor = scenario.protocol.threshold_m - v_max * (scenario.protocol.dt_s + scenario.time_step)
    delivery = min(report.links[link].delivered / report.links[link].transmissions for link in ((1, 2), (2, 1)))
    return report.min_separation, floor, delivery


def _check_encounters(seeds):
    outcomes = [_encounter_outcome(seed) for seed in seeds]
    assert all(delivery >= 0.9 for _, _, delivery in outcomes)
    kept = sum(1 for separation, floor, _ in outcomes if separation >= floor)
    assert kept >= 0.99 * len(outcomes)


class TestMissions:
    """Flight mission replication with the calibrated radio profiles"""

    def test_mission1_experimental_band(self):
        report = _mission(1, "experimental")
        assert 0.01 <= report.per <= 0.10

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_mission2_worse_than_mission1(self, seed):
        m1, m2 = _mission(1, "experimental", seed), _mission(2, "experimental", seed)
        assert m2.per > m1.per
        assert 0.02 <= m2.per <= 0.14

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_mission3_loss_reasons_by_distance(self, seed):
        """Overdrive only in the closest quartile of distance, weak signal only in the farthest"""
        from models.radio import LossReason

        report = _mission(3, "experimental", seed)
        distances = np.array([p.distance for p in report.packets])
        q1, q3 = np.percentile(distances, [25, 75])
        overdrive = [p.distance for p in report.losses(LossReason.OVERDRIVE)]
        weak = [p.distance for p in report.losses(LossReason.WEAK_SIGNAL)]
        assert overdrive and weak
        assert max(overdrive) <= q1
        assert min(weak) >= q3
        assert 0.02 <= report.per <= 0.12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("mission_id", [1, 2, 3])
    def test_cots_loses_nothing(self, mission_id, seed):
        report = _mission(mission_id, "cots", seed)
        assert report.totals.transmissions > 0
        assert report.per == 0.0

    def test_flight_window_only_for_radios_without_agc(self):
        from config import config
        from core.missions import flight_profile
        from models.radio import COTS, EXPERIMENTAL

        flown = flight_profile(EXPERIMENTAL)
        assert flown.snr_decode_min == config.mission.flight_snr_decode_min
        assert flown.edge_steepness == config.mission.flight_edge_steepness
        assert flown.tx_power == EXPERIMENTAL.tx_power and flown.amp_gain == EXPERIMENTAL.amp_gain
        assert flight_profile(COTS) is COTS

    def test_mission1_losses_follow_airframe_lobes(self):
        """Weak-signal losses happen where the TX lobe attenuation is high"""
        from models.radio import LossReason

        report = _mission(1, "experimental")
        losses = report.losses()
        weak = report.losses(LossReason.WEAK_SIGNAL)
        assert len(weak) >= 0.9 * len(losses)
        in_lobe = [p for p in weak if math.cos(6 * math.radians(p.tx_azimuth)) > 0]
        assert len(in_lobe) >= 0.95 * len(weak)

    def test_mission1_snr_span(self):
        report = _mission(1, "experimental")
        assert report.snr_span() >= 20.0

    def test_mission_durations(self):
        assert _mission(1, "cots").duration == pytest.approx(2 * math.pi * 30.0 * 4 / 5.0, rel=0.01)
        assert _mission(3, "cots").duration == pytest.approx(10 * 2 * 25.0 / 1.5)

    def test_unknown_mission(self):
        from core.missions import replicate_mission

        with pytest.raises(ValueError):
            replicate_mission(4)


class TestSimulationLoop:
    """Determinism, bookkeeping and metrics of a short run"""

    def test_deterministic(self, scenario_text):
        from core.simulation import run

        scenario = _scenario(scenario_text)
        first, second = run(scenario), run(scenario)
        assert first.summary() == second.summary()
        assert [p.to_row() for p in first.packets] == [p.to_row() for p in second.packets]
        assert first.tracks == second.tracks

    def test_seed_changes_beacon_phases(self, scenario_text):
        from core.simulation import Simulation

        scenario = _scenario(scenario_text)
        a, b = Simulation(scenario, 3), Simulation(scenario, 4)
        assert a.seed == 3 and Simulation(scenario).seed == scenario.seed
        assert [n.phase for n in a.nodes] != [n.phase for n in b.nodes]

    def test_link_counters_conserved(self, scenario_text):
        from core.simulation import run

        report = run(_scenario(scenario_text))
        assert report.links
        assert all(stats.conserved for stats in report.links.values())
        assert report.totals.transmissions == len(report.packets)
        assert (1, 2) in report.links and (2, 1) in report.links and (1, 1000) in report.links

    def test_monitor_tracks_both_drones(self, scenario_text):
        from core.simulation import run

        report = run(_scenario(scenario_text))
        assert len(report.tracks) == 6
        last = report.tracks[-1]
        assert [row["drone_id"] for row in last["tracks"]] == [1, 2]
        assert report.tracker_availability > 0.7
        assert report.summary()["beacon_age_s"]["p50"] == pytest.approx(0.1, abs=0.02)

    def test_separation_without_avoidance(self, scenario_text):
        """Without avoidance the crossing drones meet at the origin"""
        from core.simulation import run

        report = run(_scenario(scenario_text))
        assert report.min_separation < 1.0
        assert report.ca_events == []

    def test_run_seeds_in_parallel_matches_sequential(self, scenario_text):
        from core.simulation import run_seeds

        scenario = _scenario(scenario_text)
        sequential = run_seeds(scenario, [1, 2])
        parallel = run_seeds(scenario, [1, 2], jobs=2)
        assert [r.seed for r in parallel] == [1, 2]
        assert [r.summary() for r in parallel] == [r.summary() for r in sequential]

    def test_malformed_injection(self, scenario_text):
        from core.simulation import run

        report = run(_scenario(scenario_text, protocol={"malformed_rate": 0.2}))
        malformed = report.totals.malformed
        assert malformed > 0
        assert malformed < 0.4 * report.totals.transmissions


def _hovering(positions, **scene):
    """Silent COTS drones hovering at the given points"""
    from core.scenario import parse_scenario

    drones = [{"id": k + 1, "radio": "cots", "beacon": False, "waypoints": [{"position": list(p)}]}
              for k, p in enumerate(positions)]
    area = {"area": [-200.0, -200.0, 200.0, 200.0], "elements": False}
    return parse_scenario({"name": "hover", "duration": 1.0, "scene": {**area, **scene}, "drones": drones})


class TestReception:
    """Frames on air, their reception and the per-step channel table"""

    def test_frame_spanning_steps_meets_later_frame(self):
        """A frame still on air at the step boundary collides with one started in the next step"""
        from core.mac import Transmission
        from core.simulation import Simulation, _PowerTable
        from models.protocol import BeaconStatus

        sim = Simulation(_hovering([(30.0, 0.0, 30.0), (0.0, 0.0, 30.0), (-30.0, 0.0, 30.0)]))
        sim._advance_kinematics()
        first = Transmission(1, 0.0095, 0.001, sim._beacon_frame(sim.node(1), 0.0, BeaconStatus.CRUISE))
        sim.launch([first])
        sim.settle(0.01, _PowerTable(sim, 0.0))
        assert sim.pending == [first]
        assert sim.report.links == {}

        second = Transmission(3, 0.0101, 0.001, sim._beacon_frame(sim.node(3), 0.01, BeaconStatus.CRUISE))
        sim.launch([second])
        sim.settle(0.02, _PowerTable(sim, 0.01))
        assert sim.pending == []
        assert sim.report.links[(1, 2)].collided == 1
        assert sim.report.links[(3, 2)].collided == 1

    def test_frames_apart_are_both_received(self):
        from core.mac import Transmission
        from core.simulation import Simulation, _PowerTable
        from models.protocol import BeaconStatus

        sim = Simulation(_hovering([(30.0, 0.0, 30.0), (0.0, 0.0, 30.0), (-30.0, 0.0, 30.0)]))
        sim._advance_kinematics()
        sim.launch([Transmission(1, 0.0095, 0.001, sim._beacon_frame(sim.node(1), 0.0, BeaconStatus.CRUISE))])
        sim.settle(0.01, _PowerTable(sim, 0.0))
        sim.launch([Transmission(3, 0.0110, 0.001, sim._beacon_frame(sim.node(3), 0.01, BeaconStatus.CRUISE))])
        sim.settle(0.02, _PowerTable(sim, 0.01))
        assert sim.report.links[(1, 2)].delivered == 1
        assert sim.report.links[(3, 2)].delivered == 1

    def test_coincident_nodes_have_no_channel(self):
        from core.simulation import Simulation, _PowerTable

        building = {"buildings": [{"min": [100.0, 100.0], "max": [120.0, 120.0], "height": 10.0}]}
        sim = Simulation(_hovering([(0.0, 0.0, 30.0), (0.0, 0.0, 30.0), (30.0, 0.0, 30.0)], **building))
        assert not sim.open_air
        sim._advance_kinematics()
        powers = _PowerTable(sim, 0.0)
        assert powers.channel_db(1, 2) == -math.inf
        assert math.isfinite(powers.channel_db(1, 3))

    def test_channel_errors_propagate(self, monkeypatch):
        """Only coincident ends are treated as no channel; other geometry errors surface"""
        import core.simulation
        from core.simulation import Simulation, _PowerTable

        def broken(*args, **kwargs):
            raise ValueError("degenerate segment")

        building = {"buildings": [{"min": [100.0, 100.0], "max": [120.0, 120.0], "height": 10.0}]}
        sim = Simulation(_hovering([(0.0, 0.0, 30.0), (30.0, 0.0, 30.0)], **building))
        sim._advance_kinematics()
        monkeypatch.setattr(core.simulation, "channel_snapshot", broken)
        with pytest.raises(ValueError, match="degenerate"):
            _PowerTable(sim, 0.0).channel_db(1, 2)


class TestCollisionAvoidanceRun:
    """Crossing encounter with avoidance enabled"""

    def test_lower_id_yields(self, scenario_text):
        from core.scenario import parse_scenario
        from core.simulation import run

        report = run(parse_scenario(_with_ca(scenario_text)))
        first = [e.label for e in report.ca_events if e.drone_id == 1]
        assert first[:2] == ["CRUISE->CONFLICT", "CONFLICT->HOLDING"]
        assert "HOLDING->RESUME" in first
        assert "CONFLICT->HOLDING" not in [e.label for e in report.ca_events if e.drone_id == 2]
        assert report.min_separation > 20.0

    def test_emergency_reaches_monitor(self, scenario_text):
        from core.scenario import parse_scenario
        from core.simulation import run

        report = run(parse_scenario(_with_ca(scenario_text)))
        assert report.emergencies_at_ground >= 1
        assert any(p.kind == "EMERGENCY" for p in report.packets)

    def test_hold_both_keeps_separation(self, scenario_text):
        from core.scenario import parse_scenario
        from core.simulation import run

        report = run(parse_scenario(_with_ca(scenario_text, "hold_both", 12.0)))
        holds = {e.drone_id for e in report.ca_events if e.label == "CONFLICT->HOLDING"}
        assert holds == {1, 2}
        assert report.min_separation > 20.0

    def test_encounters_are_real_conflicts(self):
        """Unavoided paths pass inside the threshold; the 0.1 s predictor agrees with a 0.01 s one"""
        from core.collision_avoidance import predict_min_separation
        from core.scenario import parse_scenario

        for seed in range(20):
            scenario = parse_scenario(_encounter(seed))
            a, b = (d.trajectory for d in scenario.drones)
            v_sum = sum(d.trajectory.waypoints[0].speed_to_next for d in scenario.drones)
            coarse, _ = predict_min_separation(a, b, 0.0, scenario.duration, 0.1)
            fine, _ = predict_min_separation(a, b, 0.0, scenario.duration, 0.01)
            assert fine < scenario.protocol.threshold_m
            assert fine - 1e-9 <= coarse <= fine + v_sum * 0.05

    def test_randomized_encounters_hold_separation(self):
        _check_encounters(range(40))

    @pytest.mark.slow
    def test_randomized_encounters_full_sweep(self):
        _check_encounters(range(1000))


class TestGroundServices:
    """Authenticated broadcasts and the backup link"""

    def test_vertiport_broadcasts_verified(self, scenario_text):
        from core.scenario import parse_scenario
        from core.simulation import run

        data = tomllib.loads(scenario_text)
        data["duration"] = 8.0
        data["ground_stations"].append({"id": 2000, "role": "VERTIPORT", "position": [10.0, 10.0, 5.0]})
        report = run(parse_scenario(data))
        counts = report.tesla_counts()
        assert counts["ACCEPT"] > 0
        assert counts["REJECT"] == 0
        assert {e.receiver for e in report.tesla_events} == {1, 2}

    def test_backup_link_keeps_tracks_alive(self, scenario_text):
        """Direct links too faint to decode; the monitor still tracks via the backup path"""
        from core.scenario import parse_scenario
        from core.simulation import run

        data = tomllib.loads(scenario_text)
        data["radio_profiles"] = {"faint": {"preset": "cots", "tx_power": -60.0}}
        for drone in data["drones"]:
            drone["radio"] = "faint"
        data["multilink"] = {"enabled": True, "availability": 1.0}
        report = run(parse_scenario(data))
        assert report.links[(1, 1000)].delivered == 0
        assert report.backup_deliveries > 0
        assert report.tracker_availability > 0.7

    def test_backup_disabled(self, scenario_text):
        from core.scenario import parse_scenario
        from core.simulation import run

        data = tomllib.loads(scenario_text)
        data["radio_profiles"] = {"faint": {"preset": "cots", "tx_power": -60.0}}
        for drone in data["drones"]:
            drone["radio"] = "faint"
        report = run(parse_scenario(data))
        assert report.backup_deliveries == 0
        assert report.tracker_availability == 0.0


class TestDensity:
    """Many-drone requirement scenario"""

    def test_small_density_run(self):
        from core.missions import density_stress

        report = density_stress(9, area_km2=0.09, duration=4.0, seed=1)
        assert len({tx for tx, _ in report.links}) == 9
        assert all(stats.conserved for stats in report.links.values())
        assert report.mac_collision_rate < 0.05
        assert report.tracker_availability > 0.5
        assert report.min_separation > 0.0

    @pytest.mark.slow
    def test_full_density_requirement(self):
        """100 drones per km² for one minute; collision rate and tracking are reported, not bounded"""
        import time

        from core.missions import density_stress

        started = time.perf_counter()
        report = density_stress(100, area_km2=1.0, duration=60.0)
        assert time.perf_counter() - started < 300.0
        summary = report.summary()
        assert len({tx for tx, _ in report.links}) == 100
        assert 0.0 <= summary["mac_collision_rate"] <= 1.0
        assert summary["tracker_availability"] is not None
        assert summary["beacon_age_s"]["p95"] > 0.0

    def test_invalid_arguments(self):
        from core.missions import density_scenario

        with pytest.raises(ValueError):
            density_scenario(0, 1.0, 10.0)
        with pytest.raises(ValueError):
            density_scenario(5, 0.0, 10.0)


class TestResultFiles:
    """Files written for one run"""

    def test_files_written(self, scenario_text, out_dir):
        import json

        from core.output import write_outputs
        from core.simulation import run

        scenario = _scenario(scenario_text)
        report = run(scenario)
        written = write_outputs(report, out_dir, scenario.output)
        assert set(written) == {"packets.csv", "snr.csv", "ca_events.csv", "tesla_events.csv",
                                "tracks.jsonl", "report.json"}
        with open(written["report.json"], encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["per"] == report.per
        with open(written["packets.csv"], encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0].startswith("t,tx_id,rx_id,seq,kind")
        assert len(lines) == len(report.packets) + 1

    def test_flags_respected(self, scenario_text, out_dir):
        from core.output import write_outputs
        from core.simulation import run

        scenario = _scenario(scenario_text, output={"packet_log": False, "snr_trace": False})
        written = write_outputs(run(scenario), out_dir, scenario.output)
        assert "packets.csv" not in written and "snr.csv" not in written
        assert not os.path.exists(os.path.join(out_dir, "packets.csv"))

    def test_repeat_run_byte_identical(self, scenario_text, temp_workspace):
        from core.output import write_outputs
        from core.simulation import run

        scenario = _scenario(scenario_text)
        first = write_outputs(run(scenario), os.path.join(temp_workspace, "a"), scenario.output)
        second = write_outputs(run(scenario), os.path.join(temp_workspace, "b"), scenario.output)
        for name, path in first.items():
            with open(path, "rb") as fa, open(second[name], "rb") as fb:
                assert fa.read() == fb.read(), name

    def test_scene_files_for_buildings(self, scenario_text, out_dir):
        from core.output import write_outputs
        from core.simulation import run

        scene = {"area": [-200.0, -200.0, 200.0, 200.0],
                 "buildings": [{"min": [20.0, 20.0], "max": [40.0, 40.0], "height": 15.0}]}
        scenario = _scenario(scenario_text, scene=scene, duration=1.0)
        written = write_outputs(run(scenario), out_dir, scenario.output)
        with open(written["buildings.csv"], encoding="utf-8") as f:
            assert f.read().splitlines()[1] == "20.0,20.0,40.0,40.0,15.0"
        assert "elements.csv" in written

    def test_bench_file(self, out_dir):
        from core.missions import run_lab_bench
        from core.output import write_bench

        points = run_lab_bench(21.0, attenuations_db=[80.0, 100.0], packets_per_point=50)
        path = write_bench(points, out_dir)
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        assert lines[0] == "attenuation_db,snr_db,success_probability,sent,delivered,weak,overdrive,per"
        assert len(lines) == 3
