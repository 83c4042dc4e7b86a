"""
Ground-station tracking of beaconing drones.
"""
from typing import Optional

from config import ProtocolConfig, config
from core.beacon import GeodeticOrigin
from models.protocol import BeaconMessage, Track, TrackStatus, TrackTable


def ground_track_update(table: TrackTable, beacon: BeaconMessage, t: float) -> TrackTable:
    """Fresh beacon makes the track LIVE; a seq that does not advance leaves the table unchanged"""
    current = table.get(beacon.drone_id)
    if current is not None and beacon.seq <= current.beacon.seq:
        return table
    tracks = dict(table.tracks)
    tracks[beacon.drone_id] = Track(beacon, t, TrackStatus.LIVE)
    return TrackTable(tracks)


def track_status_for_age(age: float, cfg: Optional[ProtocolConfig] = None) -> TrackStatus:
    cfg = cfg or config.protocol
    if age > cfg.lost_after_s:
        return TrackStatus.LOST
    if age > cfg.stale_after_s:
        return TrackStatus.STALE
    return TrackStatus.LIVE


def ground_track_age(table: TrackTable, t: float, cfg: Optional[ProtocolConfig] = None) -> TrackTable:
    """Degrade statuses by age at time t"""
    tracks = {
        drone_id: Track(track.beacon, track.last_heard, track_status_for_age(track.age(t), cfg))
        for drone_id, track in table.tracks.items()
    }
    return TrackTable(tracks)


def track_snapshot(table: TrackTable, t: float, station_id: int, origin: GeodeticOrigin) -> dict:
    """One JSON-lines record of a station's table"""
    rows = []
    for drone_id in sorted(table.tracks):
        track = table.tracks[drone_id]
        x, y, z = origin.to_enu(track.beacon.position)
        rows.append({
            "drone_id": drone_id,
            "status": track.status.value,
            "age": t - track.last_heard,
            "seq": track.beacon.seq,
            "beacon_status": track.beacon.status.name,
            "position": [float(x), float(y), float(z)],
        })
    return {"t": t, "station_id": station_id, "tracks": rows}
