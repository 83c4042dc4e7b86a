"""
Fixed-step simulation loop binding kinematics, channel, radio, MAC,
protocol and broadcast authentication.

Step order: backup deliveries, kinematics, frame generation, MAC, channel
and radio per reception, protocol and authentication, collision
avoidance, track snapshots, separation.
"""
import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from core.beacon import BeaconDecodeError, GeodeticOrigin, build_beacon, decode_beacon, encode_beacon
from core.channel import (channel_snapshot, link_power_matrix, narrowband_gain, place_channel_elements,
                          relative_direction)
from core.collision_avoidance import ca_step
from core.environment import TimedPath, jitter_trajectory, trajectory_state, upcoming_waypoints
from core.mac import MacContext, MacVerdict, Transmission, TxRequest, csma_schedule, mac_arbitrate
from core.radio import airtime_s, packet_outcome, received_power, snr
from core.scenario import build_scene
from core.tesla import (TeslaVerifier, broadcaster_chain, decode_authenticated, encode_authenticated, sign_message,
                        verify_message)
from core.tracking import ground_track_age, ground_track_update, track_snapshot
from models.channel import AirframeShadowMask, LinkEnd
from models.protocol import BeaconMessage, BeaconStatus, CAState, CommandKind, TrackStatus, TrackTable
from models.radio import COTS, LossReason, RadioProfile
from models.report import LinkStats, PacketRecord, SimulationReport, SnrSample
from models.scenario import Scenario, StationRole
from models.scene import DroneState, Trajectory, UrbanScene
from models.tesla import (ChainExhaustedError, KeyChain, TeslaDecodeError, TooEarlyError, VerificationEvent,
                          VerifyStatus)
from utils.logger import get_logger
from utils.rng import StreamPool
from utils.telemetry import get_performance_monitor, get_tracer

logger = get_logger()
perf = get_performance_monitor()

BEACON = "BEACON"
EMERGENCY = "EMERGENCY"


@dataclass(frozen=True)
class Frame:
    kind: str
    data: bytes
    seq: int
    payload_bytes: int


@dataclass
class _Node:
    id: int
    radio: RadioProfile
    mask: Optional[AirframeShadowMask] = None
    trajectory: Optional[Trajectory] = None
    role: Optional[StationRole] = None
    beacon: bool = False
    collision_avoidance: bool = False
    state: Optional[DroneState] = None
    mission_clock: float = 0.0
    holding: bool = False
    seq: int = 0
    next_epoch: int = 0
    phase: float = 0.0
    emergency_pending: bool = False
    ca_state: CAState = field(default_factory=CAState)
    heard: Dict[int, BeaconMessage] = field(default_factory=dict)
    clock_skew: float = 0.0
    chain: Optional[KeyChain] = None
    payload_rng: Optional[np.random.Generator] = None

    @property
    def is_drone(self) -> bool:
        return self.trajectory is not None

    @property
    def is_monitor(self) -> bool:
        return self.role == StationRole.MONITOR

    @property
    def broadcasts(self) -> bool:
        return self.role is not None and self.role.broadcasts

    @property
    def rate(self) -> float:
        return self.radio.beacon_rate


class _PowerTable:
    """Channel power between node pairs at one step; reciprocal, evaluated lazily"""

    def __init__(self, sim: "Simulation", t: float):
        self.sim = sim
        self.t = t
        self.ends = {n.id: LinkEnd(n.state, n.mask, n.id) for n in sim.nodes}
        self._matrix: Optional[np.ndarray] = None
        self._cache: Dict[Tuple[int, int], float] = {}

    def channel_db(self, a: int, b: int) -> float:
        sim = self.sim
        if sim.open_air:
            if self._matrix is None:
                ends = [self.ends[n.id] for n in sim.nodes]
                self._matrix = link_power_matrix(ends, ends, sim.fc)
            return float(self._matrix[sim.index[a], sim.index[b]])
        key = (a, b) if a < b else (b, a)
        value = self._cache.get(key)
        if value is None:
            a_end, b_end = self.ends[key[0]], self.ends[key[1]]
            if np.array_equal(a_end.position, b_end.position):
                value = -math.inf
            else:
                snap = channel_snapshot(a_end, b_end, sim.scene, sim.elements, self.t, sim.fc, sim.scenario.channel)
                value = narrowband_gain(snap)[1]
            self._cache[key] = value
        return value

    def rx_dbm(self, tx_id: int, rx_id: int) -> float:
        return received_power(self.sim.node(tx_id).radio, self.channel_db(tx_id, rx_id))


class Simulation:
    """One run of a scenario with a seed; call run() once"""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else int(seed)
        self.dt = scenario.time_step
        self.fc = scenario.channel.carrier_frequency
        self.protocol = scenario.protocol
        self.origin = GeodeticOrigin(self.protocol.origin_lat, self.protocol.origin_lon, self.protocol.origin_alt)
        self.rng = StreamPool(self.seed)

        self.scene: UrbanScene = build_scene(scenario, self.seed)
        channel_cfg = scenario.channel
        if scenario.place_elements:
            self.elements = place_channel_elements(self.scene, channel_cfg, self.seed)
        else:
            bare = replace(channel_cfg, ground_scatterer_density=0.0)
            self.elements = place_channel_elements(UrbanScene((), self.scene.area), bare, self.seed)
        self.open_air = self.scene.is_empty and not self.elements[0] and not self.elements[1]

        self.nodes: List[_Node] = self._build_nodes()
        self.index = {n.id: k for k, n in enumerate(self.nodes)}
        self.verifiers: Dict[Tuple[int, int], TeslaVerifier] = {}
        self.recent: List[Transmission] = []
        self.pending: List[Transmission] = []
        self.backup_queue: list = []
        self.backup_counter = 0
        self.emergencies_seen = set()
        self.last_rx: Dict[Tuple[int, int], float] = {}
        self.tables: Dict[int, TrackTable] = {n.id: TrackTable() for n in self.nodes if n.is_monitor}
        self.live_samples = 0
        self.track_samples = 0
        self.report = SimulationReport(scenario.name, self.seed, scenario.duration, self.dt)
        self.report.buildings = [b.to_row() for b in self.scene.buildings]
        self.report.elements = [e.to_row() for e in self.elements[0] + self.elements[1]]

    # ------------------------------------------------------------------
    # Setup
    # ------------------------------------------------------------------

    def _build_nodes(self) -> List[_Node]:
        nodes = []
        skew = self.scenario.tesla.clock_skew_s
        for d in self.scenario.drones:
            traj = jitter_trajectory(d.trajectory, d.jitter_sigma, self.rng.get("jitter", d.id))
            node = _Node(d.id, d.radio, d.mask, traj, beacon=d.beacon, collision_avoidance=d.collision_avoidance)
            node.phase = float(self.rng.get("phase", d.id).uniform(0.0, 1.0 / d.radio.beacon_rate))
            node.clock_skew = float(self.rng.get("skew", d.id).uniform(-skew, skew)) if skew > 0 else 0.0
            nodes.append(node)
        tesla = self.scenario.tesla
        for g in self.scenario.ground_stations:
            node = _Node(g.id, g.radio or COTS, role=g.role)
            node.state = DroneState.fixed(g.position)
            if node.broadcasts:
                node.chain = broadcaster_chain(self.seed, g.id, tesla)
                node.phase = float(self.rng.get("phase", g.id).uniform(0.0, 1.0 / tesla.broadcast_rate_hz))
                node.payload_rng = self.rng.get("payload", g.id)
            nodes.append(node)
        return nodes

    def node(self, node_id: int) -> _Node:
        return self.nodes[self.index[node_id]]

    def _verifier(self, rx: _Node, station: _Node) -> TeslaVerifier:
        key = (rx.id, station.id)
        verifier = self.verifiers.get(key)
        if verifier is None:
            verifier = TeslaVerifier(station.chain.public(), self.scenario.tesla.max_clock_skew_s)
            self.verifiers[key] = verifier
        return verifier

    # ------------------------------------------------------------------
    # Loop
    # ------------------------------------------------------------------

    def run(self) -> SimulationReport:
        steps = int(round(self.scenario.duration / self.dt))
        ca_every = max(1, int(round(self.protocol.dt_s / self.dt)))
        snapshot_every = max(1, int(round(config.simulation.track_snapshot_interval / self.dt)))
        logger.run_start(self.scenario.name, self.seed, self.scenario.duration, len(self.scenario.drones))
        with get_tracer().trace_span("simulation_loop", {"steps": steps, "seed": self.seed}):
            for k in range(steps):
                self._step(k, k % ca_every == 0, k % snapshot_every == 0)
            if self.pending and steps:
                self.settle(math.inf, _PowerTable(self, (steps - 1) * self.dt))
        report = self.report
        report.tracker_availability = self.live_samples / self.track_samples if self.track_samples else None
        logger.run_end(self.scenario.name, report.totals.transmissions, report.per)
        return report

    def _step(self, k: int, ca_due: bool, snapshot_due: bool):
        t = k * self.dt
        self._deliver_backup(t)
        self._advance_kinematics()
        powers = _PowerTable(self, t)
        requests = self._frame_requests(t)
        if self.scenario.output.snr_trace:
            self._trace_snr(t, powers)
        if requests:
            ongoing = [tx for tx in self.recent if tx.end > t]
            rngs = {r.tx_id: self.rng.get("mac", r.tx_id) for r in requests}
            self.launch(csma_schedule(requests, MacContext(powers.rx_dbm, config.radio), rngs, ongoing))
        self.settle(t + self.dt, powers)
        if ca_due:
            self._collision_avoidance(t)
        if snapshot_due:
            self._snapshot_tracks(t)
        self._separation(t)
        for n in self.nodes:
            if n.is_drone and not n.holding:
                n.mission_clock += self.dt

    def _advance_kinematics(self):
        for n in self.nodes:
            if not n.is_drone:
                continue
            state = trajectory_state(n.trajectory, n.mission_clock)
            if n.holding:
                heading = n.state.heading if n.state is not None else state.heading
                state = DroneState(state.position, np.zeros(3), heading)
            n.state = state

    # ------------------------------------------------------------------
    # Frames
    # ------------------------------------------------------------------

    def _beacon_frame(self, n: _Node, t: float, status: BeaconStatus) -> Frame:
        n.seq += 1
        msg = build_beacon(n.id, n.seq, t, n.state,
                           upcoming_waypoints(n.trajectory, n.mission_clock, self.protocol.max_beacon_waypoints),
                           self.origin, status)
        kind = EMERGENCY if status == BeaconStatus.EMERGENCY else BEACON
        return Frame(kind, encode_beacon(msg), n.seq, n.radio.beacon_payload)

    def _frame_requests(self, t: float) -> List[TxRequest]:
        requests = []
        end = t + self.dt - 1e-12
        for n in self.nodes:
            if n.is_drone:
                if n.emergency_pending:
                    n.emergency_pending = False
                    frame = self._beacon_frame(n, t, BeaconStatus.EMERGENCY)
                    requests.append(TxRequest(n.id, t, airtime_s(frame.payload_bytes), frame))
                if not n.beacon:
                    continue
                while n.phase + n.next_epoch / n.rate < end:
                    ready = max(t, n.phase + n.next_epoch / n.rate)
                    n.next_epoch += 1
                    status = BeaconStatus.HOLDING if n.holding else BeaconStatus.CRUISE
                    frame = self._beacon_frame(n, t, status)
                    requests.append(TxRequest(n.id, ready, airtime_s(frame.payload_bytes), frame))
            elif n.broadcasts:
                rate = self.scenario.tesla.broadcast_rate_hz
                while n.phase + n.next_epoch / rate < end:
                    ready = max(t, n.phase + n.next_epoch / rate)
                    n.next_epoch += 1
                    frame = self._broadcast_frame(n, ready)
                    if frame is not None:
                        requests.append(TxRequest(n.id, ready, airtime_s(frame.payload_bytes), frame))
        return requests

    def _broadcast_frame(self, n: _Node, t_send: float) -> Optional[Frame]:
        payload = n.payload_rng.bytes(self.scenario.tesla.payload_bytes)
        try:
            msg = sign_message(payload, t_send, n.chain)
        except (TooEarlyError, ChainExhaustedError):
            return None
        n.seq += 1
        data = encode_authenticated(msg)
        return Frame(n.role.value, data, n.seq, len(data))

    # ------------------------------------------------------------------
    # Reception
    # ------------------------------------------------------------------

    def launch(self, scheduled: Sequence[Transmission]):
        """Put frames on air; they are received once they have ended"""
        self.recent.extend(scheduled)
        self.pending.extend(scheduled)

    def settle(self, until: float, powers: _PowerTable):
        """
        Receive every pending frame that ends before `until`. Any frame that
        can overlap it starts before its end and is therefore already on air.
        """
        due = [tx for tx in self.pending if tx.end < until]
        if due:
            self.pending = [tx for tx in self.pending if tx.end >= until]
            self._receive(powers.t, due, powers)
        horizon = min([tx.start for tx in self.pending] + [powers.t])
        self.recent = [tx for tx in self.recent if tx.end > horizon]

    def _receive(self, t: float, due: Sequence[Transmission], powers: _PowerTable):
        due_ids = {id(tx) for tx in due}
        window = [tx for tx in self.recent if id(tx) in due_ids or any(tx.overlaps(d) for d in due)]
        position = {id(tx): k for k, tx in enumerate(window)}
        tx_ids = sorted({tx.tx_id for tx in window})
        decoded: Dict[int, object] = {}
        malformed_rate = self.protocol.malformed_rate
        delivered_to_monitor = set()

        for rx in self.nodes:
            power_map = {tid: powers.rx_dbm(tid, rx.id) for tid in tx_ids if tid != rx.id}
            verdicts = mac_arbitrate(window, rx.id, power_map, config.radio.capture_margin_db)
            for j, tx in enumerate(due):
                frame: Frame = tx.frame
                if tx.tx_id == rx.id or (frame.kind not in (BEACON, EMERGENCY) and not rx.is_drone):
                    continue
                sender = self.node(tx.tx_id)
                channel_db = powers.channel_db(tx.tx_id, rx.id)
                value = snr(received_power(sender.radio, channel_db), rx.radio)
                link_rng = self.rng.get("link", tx.tx_id, rx.id)
                reason = packet_outcome(rx.radio, value, link_rng).loss_reason
                corrupt = malformed_rate > 0 and link_rng.random() < malformed_rate
                if verdicts[position[id(tx)]] == MacVerdict.COLLIDED:
                    reason = LossReason.MAC_COLLISION
                parsed = None
                if reason == LossReason.NONE:
                    parsed = self._decode(frame, corrupt, decoded, j)
                    if parsed is None:
                        reason = LossReason.MALFORMED
                self.report.links.setdefault((tx.tx_id, rx.id), LinkStats()).add(reason)
                if self.scenario.output.packet_log:
                    self._log_packet(t, sender, rx, frame, value, reason)
                if parsed is not None:
                    self._handle(rx, sender, frame, parsed, tx.end)
                    if rx.is_monitor:
                        delivered_to_monitor.add((rx.id, tx.tx_id, frame.seq))
            perf.increment_counter("receptions", len(due))

        if self.scenario.multilink.enabled:
            self._backup_failover(due, delivered_to_monitor)

    def _decode(self, frame: Frame, corrupt: bool, cache: Dict[int, object], key: int):
        data = frame.data[:-1] if corrupt else frame.data
        if not corrupt and key in cache:
            return cache[key]
        try:
            parsed = decode_beacon(data) if frame.kind in (BEACON, EMERGENCY) else decode_authenticated(data)
        except (BeaconDecodeError, TeslaDecodeError, ValueError):
            parsed = None
        if not corrupt:
            cache[key] = parsed
        return parsed

    def _log_packet(self, t: float, sender: _Node, rx: _Node, frame: Frame, value: float, reason: LossReason):
        vector = rx.state.position - sender.state.position
        tx_az, _ = relative_direction(sender.state, vector)
        rx_az, _ = relative_direction(rx.state, -vector)
        self.report.packets.append(PacketRecord(
            t, sender.id, rx.id, frame.seq, frame.kind, value, reason, float(np.linalg.norm(vector)),
            math.degrees(tx_az), math.degrees(rx_az)))

    def _handle(self, rx: _Node, sender: _Node, frame: Frame, parsed, t_rx: float):
        if frame.kind in (BEACON, EMERGENCY):
            msg: BeaconMessage = parsed
            key = (sender.id, rx.id)
            last = self.last_rx.get(key)
            if last is not None:
                self.report.beacon_gaps.append(t_rx - last)
            self.last_rx[key] = t_rx
            if rx.is_drone:
                prev = rx.heard.get(msg.drone_id)
                if prev is None or msg.seq > prev.seq:
                    rx.heard[msg.drone_id] = msg
            elif rx.is_monitor:
                self._monitor_receive(rx.id, msg, t_rx)
            return
        verifier = self._verifier(rx, sender)
        status, released = verify_message(parsed, t_rx + rx.clock_skew, verifier)
        events = self.report.tesla_events
        events.append(VerificationEvent(t_rx, rx.id, sender.id, parsed.interval_index, status,
                                        "" if status == VerifyStatus.BUFFERED else "safety_or_key"))
        for held, verdict in released:
            events.append(VerificationEvent(t_rx, rx.id, sender.id, held.interval_index, verdict,
                                            "" if verdict == VerifyStatus.ACCEPT else "mac"))
            logger.tesla_event(t_rx, rx.id, held.interval_index, verdict.value)

    def _monitor_receive(self, station_id: int, msg: BeaconMessage, t_rx: float):
        self.tables[station_id] = ground_track_update(self.tables[station_id], msg, t_rx)
        if msg.status == BeaconStatus.EMERGENCY and (msg.drone_id, msg.seq) not in self.emergencies_seen:
            self.emergencies_seen.add((msg.drone_id, msg.seq))
            self.report.emergencies_at_ground += 1

    # ------------------------------------------------------------------
    # Backup infrastructure link
    # ------------------------------------------------------------------

    def _backup_failover(self, received, delivered_to_monitor):
        ml = self.scenario.multilink
        monitors = [n for n in self.nodes if n.is_monitor]
        for tx in received:
            frame: Frame = tx.frame
            if frame.kind not in (BEACON, EMERGENCY):
                continue
            for station in monitors:
                if (station.id, tx.tx_id, frame.seq) in delivered_to_monitor:
                    continue
                if self.rng.get("backup", station.id).random() < ml.availability:
                    self.backup_counter += 1
                    heapq.heappush(self.backup_queue,
                                   (tx.start + ml.latency_s, self.backup_counter, station.id, frame.data))

    def _deliver_backup(self, t: float):
        while self.backup_queue and self.backup_queue[0][0] <= t + 1e-12:
            due, _, station_id, data = heapq.heappop(self.backup_queue)
            self.report.backup_deliveries += 1
            self._monitor_receive(station_id, decode_beacon(data), due)

    # ------------------------------------------------------------------
    # Collision avoidance, tracking, metrics
    # ------------------------------------------------------------------

    def _collision_avoidance(self, t: float):
        for n in self.nodes:
            if not (n.is_drone and n.collision_avoidance):
                continue
            own_path = TimedPath(n.trajectory, t - n.mission_clock)
            state, commands, transitions = ca_step(n.ca_state, own_path, n.heard, t, n.id, self.origin,
                                                   self.protocol)
            n.ca_state = state
            self.report.ca_events.extend(transitions)
            for command in commands:
                if command.kind == CommandKind.HOLD:
                    n.holding = True
                elif command.kind == CommandKind.EMERGENCY:
                    n.emergency_pending = True
                elif command.kind == CommandKind.RESUME:
                    n.holding = False

    def _snapshot_tracks(self, t: float):
        beaconing = [n.id for n in self.nodes if n.is_drone and n.beacon]
        for station_id in sorted(self.tables):
            table = ground_track_age(self.tables[station_id], t, self.protocol)
            self.tables[station_id] = table
            self.report.tracks.append(track_snapshot(table, t, station_id, self.origin))
            for drone_id in beaconing:
                track = table.get(drone_id)
                self.track_samples += 1
                if track is not None and track.status == TrackStatus.LIVE:
                    self.live_samples += 1

    def _separation(self, t: float):
        drones = [n.state.position for n in self.nodes if n.is_drone]
        if len(drones) < 2:
            return
        positions = np.array(drones)
        diff = positions[:, None, :] - positions[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        d = float(dist.min())
        if self.report.min_separation is None or d < self.report.min_separation:
            self.report.min_separation = d
            self.report.min_separation_t = t

    def _trace_snr(self, t: float, powers: _PowerTable):
        for tx in self.nodes:
            if not (tx.is_drone and tx.beacon):
                continue
            for rx in self.nodes:
                if rx.id == tx.id:
                    continue
                channel_db = powers.channel_db(tx.id, rx.id)
                value = snr(received_power(tx.radio, channel_db), rx.radio)
                distance = float(np.linalg.norm(rx.state.position - tx.state.position))
                self.report.snr_trace.append(SnrSample(t, tx.id, rx.id, channel_db, value, distance))


def run(scenario: Scenario, seed: Optional[int] = None) -> SimulationReport:
    """Pure function of (scenario, seed)"""
    return Simulation(scenario, seed).run()


def _run_seed(args) -> SimulationReport:
    scenario, seed = args
    return run(scenario, seed)


def run_seeds(scenario: Scenario, seeds: Sequence[int], jobs: int = 1) -> List[SimulationReport]:
    """Independent runs in seed order; jobs > 1 spreads them over worker processes"""
    work = [(scenario, s) for s in seeds]
    if jobs <= 1 or len(work) <= 1:
        return [_run_seed(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_seed, work))
