"""
DroneCAST Sim Configuration
Tüm varsayılan ayarlar burada merkezi olarak yönetilir.
"""
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class EnvSettings(BaseSettings):
    """Ortam değişkenleri (DRONECAST_ öneki, .env desteği)"""
    model_config = SettingsConfigDict(env_prefix="DRONECAST_", env_file=".env", extra="ignore")

    sim_out: Optional[str] = None
    log_level: Optional[str] = None
    log_file: Optional[str] = None
    log_to_console: Optional[bool] = None


@dataclass
class SimulationConfig:
    """Simülasyon döngüsü ayarları"""
    time_step: float = 0.01  # saniye
    seed: int = 0
    max_speed: float = 15.0  # m/s
    track_snapshot_interval: float = 1.0


@dataclass
class ChannelConfig:
    """GSCM kanal modeli varsayılanları"""
    carrier_frequency: float = 5.05e9  # Hz
    scatterer_density: float = 0.005  # 1/m² (bina yüzeyleri)
    ground_scatterer_density: float = 0.0
    opening_angle_deg: tuple = (20.0, 80.0)
    scattering_loss_db: tuple = (10.0, 25.0)
    reflection_loss_db: tuple = (6.0, 15.0)
    reflection_size_fraction: tuple = (0.5, 1.0)
    ground_reflection: bool = False
    ground_reflection_loss_db: float = 0.0
    diffraction_enabled: bool = False
    diffraction_penalty_db: float = 20.0
    diffraction_clearance: float = 2.0  # m
    surface_offset: float = 1e-3  # m, yüzeyden ayrılma payı
    max_placement_attempts: int = 2000


@dataclass
class RadioConfig:
    """PHY/MAC zamanlama ayarları"""
    phy_rate_bps: float = 3.0e6  # 5 MHz kanalda QPSK 1/2
    preamble_s: float = 64e-6
    slot_time_s: float = 13e-6
    difs_s: float = 58e-6
    contention_window: int = 15
    carrier_sense_dbm: float = -85.0
    capture_margin_db: float = 10.0
    bench_packets: int = 25_000
    bench_payload: int = 125


@dataclass
class ProtocolConfig:
    """Beacon, çarpışma önleme ve takip ayarları"""
    threshold_m: float = 20.0
    horizon_s: float = 10.0
    dt_s: float = 0.1
    hysteresis_m: float = 5.0
    dwell_s: float = 2.0
    hold_policy: str = "hold_both"  # hold_both, lower_id_first
    beacon_timeout_s: float = 1.0
    max_beacon_waypoints: int = 7
    stale_after_s: float = 1.0
    lost_after_s: float = 5.0
    malformed_rate: float = 0.0
    origin_lat: float = 52.3192  # derece
    origin_lon: float = 10.5597
    origin_alt: float = 80.0  # m


@dataclass
class TeslaConfig:
    """TESLA yayın doğrulama ayarları"""
    interval_s: float = 1.0
    disclosure_delay: int = 2
    chain_length: int = 3600
    max_clock_skew_s: float = 0.010
    clock_skew_s: float = 0.005
    broadcast_rate_hz: float = 2.0
    payload_bytes: int = 64
    mac_bytes: int = 16


@dataclass
class MultilinkConfig:
    """Altyapı yedek bağlantısı"""
    enabled: bool = False
    latency_s: float = 0.150
    availability: float = 0.99


@dataclass
class MissionConfig:
    """Uçuş görevi (Mission 1-3) geometri ve kalibrasyon ayarları"""
    circle_radius: float = 30.0
    circle_heights: tuple = (10.0, 15.0, 20.0, 15.0)
    tx_height: float = 15.0
    rx_speed: float = 5.0
    m2_hover_distance: float = 45.0
    m3_height: float = 20.0
    m3_lateral_offset: float = 3.0
    m3_min_gap: float = 10.0
    m3_max_gap: float = 60.0
    m3_speed: float = 1.5
    m3_cycles: int = 10
    lobe_count: int = 6
    lobe_depth_db: float = 12.5
    cap_elevation: float = math.radians(8.0)
    cap_depth_db: float = 8.5
    # Uçuştaki SDR kalibrasyonu: daha dar pencere, keskin kenarlar (AGC yok)
    flight_snr_decode_min: float = 10.0
    flight_snr_overdrive_start: float = 37.0
    flight_edge_steepness: float = 0.2
    density_speed: float = 10.0
    density_altitude: float = 30.0


@dataclass
class OutputConfig:
    """Sonuç dosyası ayarları"""
    out_dir: str = "sim_out"
    packet_log: bool = True
    snr_trace: bool = True


@dataclass
class Config:
    """Ana konfigürasyon sınıfı"""
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    tesla: TeslaConfig = field(default_factory=TeslaConfig)
    multilink: MultilinkConfig = field(default_factory=MultilinkConfig)
    mission: MissionConfig = field(default_factory=MissionConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None
    log_to_console: bool = False

    def apply_env(self, env: Optional[EnvSettings] = None) -> "Config":
        """Ortam değişkenlerini uygula"""
        env = env or EnvSettings()
        if env.sim_out:
            self.output.out_dir = env.sim_out
        if env.log_level:
            self.log_level = env.log_level.upper()
        if env.log_file:
            self.log_file = env.log_file
        if env.log_to_console is not None:
            self.log_to_console = env.log_to_console
        return self


def resolve_out_dir(cli_value: Optional[str] = None) -> str:
    """Çıktı dizini: DRONECAST_SIM_OUT > --out > varsayılan"""
    env_value = os.environ.get("DRONECAST_SIM_OUT") or EnvSettings().sim_out
    if env_value:
        return env_value
    return cli_value or config.output.out_dir


# Global config instance
config = Config().apply_env()
