"""
Tests for the channel model and the radio link
"""
import math

import numpy as np
import pytest

FC = 5.05e9


def _end(position, heading=0.0, mask=None, node_id=0):
    from models.channel import LinkEnd
    from models.scene import DroneState

    return LinkEnd(DroneState(np.asarray(position, dtype=float), np.zeros(3), heading), mask, node_id)


class TestPropagation:
    """Free space, blocking and multipath components"""

    def test_free_space_loss(self):
        """About 46.5 dB at 1 m and 5.05 GHz, +6.02 dB per doubling"""
        from core.channel import free_space_loss_db

        assert float(free_space_loss_db(1.0, FC)) == pytest.approx(46.51, abs=0.01)
        assert float(free_space_loss_db(60.0, FC) - free_space_loss_db(30.0, FC)) == pytest.approx(
            20 * math.log10(2.0))

    def test_open_air_gain_is_free_space(self):
        from core.channel import channel_snapshot, free_space_loss_db, narrowband_gain
        from models.scene import UrbanScene

        tx, rx = _end((0.0, 0.0, 15.0), node_id=1), _end((30.0, 0.0, 15.0), node_id=2)
        snap = channel_snapshot(tx, rx, UrbanScene(), ([], []), 0.0, FC)
        assert snap.has_los and len(snap.components) == 1
        assert narrowband_gain(snap)[1] == pytest.approx(-float(free_space_loss_db(30.0, FC)))

    def test_blocked_link_has_no_power(self):
        """No components reach through a building: gain is -inf"""
        from config import ChannelConfig
        from core.channel import channel_snapshot, narrowband_gain
        from models.scene import Building, UrbanScene

        scene = UrbanScene((Building((10.0, -20.0), (20.0, 20.0), 50.0),))
        snap = channel_snapshot(_end((0.0, 0.0, 10.0)), _end((30.0, 0.0, 10.0)), scene, ([], []), 0.0, FC,
                                ChannelConfig())
        assert snap.components == ()
        assert narrowband_gain(snap)[1] == -math.inf

    def test_single_building_diffraction(self):
        """With diffraction on, a path clipping one building keeps LOS at a fixed penalty"""
        from config import ChannelConfig
        from core.channel import free_space_loss_db, los_component
        from models.scene import Building, UrbanScene

        scene = UrbanScene((Building((10.0, -20.0), (20.0, 20.0), 11.0),))
        tx, rx = _end((0.0, 0.0, 10.0)), _end((30.0, 0.0, 10.0))
        assert los_component(tx, rx, scene, FC, ChannelConfig()) is None
        cfg = ChannelConfig(diffraction_enabled=True, diffraction_penalty_db=20.0, diffraction_clearance=2.0)
        comp = los_component(tx, rx, scene, FC, cfg)
        assert comp is not None
        expected = -float(free_space_loss_db(30.0, FC)) - 20.0
        assert 20 * math.log10(abs(comp.amplitude)) == pytest.approx(expected)

    def test_coincident_ends_rejected(self):
        from core.channel import los_component
        from models.scene import UrbanScene

        with pytest.raises(ValueError):
            los_component(_end((1.0, 2.0, 3.0)), _end((1.0, 2.0, 3.0)), UrbanScene(), FC)

    def test_ground_reflection_path(self):
        """Image path over flat ground: length sqrt(d² + (h1+h2)²)"""
        from config import ChannelConfig
        from core.channel import place_channel_elements, reflection_component
        from models.channel import PathType
        from models.scene import UrbanScene
        from scipy.constants import c

        cfg = ChannelConfig(ground_reflection=True)
        _, reflectors = place_channel_elements(UrbanScene(), cfg, 0)
        assert len(reflectors) == 1
        comp = reflection_component(reflectors[0], _end((0.0, 0.0, 10.0)), _end((20.0, 0.0, 10.0)), UrbanScene(),
                                    FC, cfg)
        assert comp.path_type == PathType.REFLECT
        assert comp.delay * c == pytest.approx(math.hypot(20.0, 20.0))
        assert comp.departure_dir[2] < 0 and comp.arrival_dir[2] < 0

    def test_scatterer_outside_cone(self):
        """Ends behind the scattering surface see no scatter path"""
        from core.channel import scatter_component
        from models.channel import PointScatterer
        from models.scene import UrbanScene

        s = PointScatterer((0.0, 0.0, 10.0), (1.0, 0.0, 0.0), math.radians(30.0), 15.0)
        assert scatter_component(s, _end((-10.0, 0.0, 10.0)), _end((10.0, 0.0, 10.0)), UrbanScene(), FC) is None
        comp = scatter_component(s, _end((10.0, 1.0, 10.0)), _end((10.0, -1.0, 10.0)), UrbanScene(), FC)
        assert comp is not None

    def test_element_placement_deterministic(self):
        from config import ChannelConfig
        from core.channel import place_channel_elements
        from models.scene import Building, UrbanScene

        scene = UrbanScene((Building((0.0, 0.0), (20.0, 20.0), 30.0), Building((40.0, 0.0), (60.0, 15.0), 12.0)))
        cfg = ChannelConfig(scatterer_density=0.01)
        a = place_channel_elements(scene, cfg, 5)
        b = place_channel_elements(scene, cfg, 5)
        assert [s.to_row() for s in a[0]] == [s.to_row() for s in b[0]]
        assert len(a[1]) == 8
        for r in a[1]:
            assert r.normal[2] == 0.0

    def test_snapshot_is_reciprocal(self):
        """Swapping ends gives the same narrowband power"""
        from config import ChannelConfig
        from core.channel import channel_snapshot, narrowband_gain, place_channel_elements
        from models.channel import AirframeShadowMask
        from models.scene import Building, UrbanScene

        scene = UrbanScene((Building((20.0, 10.0), (40.0, 30.0), 25.0), Building((-30.0, -40.0), (-10.0, -20.0), 18.0)))
        cfg = ChannelConfig(scatterer_density=0.01, ground_reflection=True)
        elements = place_channel_elements(scene, cfg, 2)
        mask = AirframeShadowMask(6, 16.0, math.radians(8.0), 5.0)
        a, b = _end((0.0, 0.0, 12.0), 0.3, mask, 1), _end((60.0, 40.0, 20.0), 2.0, mask, 2)
        forward = narrowband_gain(channel_snapshot(a, b, scene, elements, 0.0, FC, cfg))[1]
        backward = narrowband_gain(channel_snapshot(b, a, scene, elements, 0.0, FC, cfg))[1]
        assert forward == pytest.approx(backward, abs=1e-9)


class TestAirframeShadowing:
    """Directional attenuation of the airframe"""

    def test_lobe_peaks_and_nulls(self):
        from core.channel import airframe_attenuation
        from models.channel import AirframeShadowMask

        mask = AirframeShadowMask(6, 16.0, math.radians(8.0), 5.0)
        assert airframe_attenuation(mask, 0.0, 0.0) == pytest.approx(16.0)
        assert airframe_attenuation(mask, math.pi / 12, 0.0) == pytest.approx(0.0, abs=1e-12)
        assert airframe_attenuation(mask, math.pi / 12, math.radians(20.0)) == pytest.approx(5.0)

    def test_relative_direction_uses_heading(self):
        from core.channel import relative_direction
        from models.scene import DroneState

        state = DroneState.fixed((0.0, 0.0, 0.0), heading=math.pi / 2)
        az, el = relative_direction(state, (0.0, 1.0, 1.0))
        assert az == pytest.approx(0.0)
        assert el == pytest.approx(math.pi / 4)

    def test_batch_matrix_matches_snapshots(self):
        """Open-air batch powers equal per-pair snapshots up to float rounding"""
        from core.channel import channel_snapshot, link_power_matrix, narrowband_gain
        from models.channel import AirframeShadowMask
        from models.scene import UrbanScene

        mask = AirframeShadowMask(6, 16.0, math.radians(8.0), 5.0)
        ends = [_end((0.0, 0.0, 15.0), 0.0, mask, 1), _end((25.0, 10.0, 12.0), 1.0, mask, 2),
                _end((-40.0, 30.0, 20.0), 4.0, None, 3)]
        matrix = link_power_matrix(ends, ends, FC)
        for i, a in enumerate(ends):
            assert matrix[i, i] == -math.inf
            for j, b in enumerate(ends):
                if i != j:
                    single = narrowband_gain(channel_snapshot(a, b, UrbanScene(), ([], []), 0.0, FC))[1]
                    assert matrix[i, j] == pytest.approx(single, abs=1e-9)


class TestRadioLink:
    """Link budget and calibrated packet delivery"""

    def test_experimental_snr_at_30m(self):
        """The experimental radio sits near 29 dB SNR at 30 m"""
        from core.channel import free_space_loss_db
        from core.radio import received_power, snr
        from models.radio import EXPERIMENTAL

        value = snr(received_power(EXPERIMENTAL, -float(free_space_loss_db(30.0, FC))), EXPERIMENTAL)
        assert value == pytest.approx(29.0, abs=0.5)

    def test_window_edges(self):
        """Delivery is likely inside the window, unlikely on both sides without AGC"""
        from core.radio import packet_success_probability
        from models.radio import EXPERIMENTAL

        assert packet_success_probability(EXPERIMENTAL, 23.0) > 0.99
        assert packet_success_probability(EXPERIMENTAL, 8.0) == pytest.approx(0.5, abs=0.01)
        assert packet_success_probability(EXPERIMENTAL, 0.0) < 0.01
        assert packet_success_probability(EXPERIMENTAL, 46.0) < 0.01
        assert packet_success_probability(EXPERIMENTAL, -math.inf) == 0.0

    def test_agc_has_no_upper_edge(self):
        from core.radio import packet_success_probability
        from models.radio import COTS

        assert packet_success_probability(COTS, 80.0) == pytest.approx(1.0)
        assert packet_success_probability(COTS, 5.0) == pytest.approx(0.5)
        assert COTS.window_midpoint == math.inf

    def test_vectorised_probability(self):
        from core.radio import packet_success_probability
        from models.radio import EXPERIMENTAL

        values = packet_success_probability(EXPERIMENTAL, np.array([0.0, 23.0, 46.0]))
        assert values.shape == (3,)
        assert values[1] > values[0] and values[1] > values[2]

    def test_loss_reason_by_side(self):
        """Losses above the window midpoint are overdrive, below are weak signal"""
        from core.radio import packet_outcome
        from models.radio import EXPERIMENTAL, LossReason
        from utils.rng import stream

        rng = stream(0, "outcome")
        assert packet_outcome(EXPERIMENTAL, 60.0, rng).loss_reason == LossReason.OVERDRIVE
        assert packet_outcome(EXPERIMENTAL, -20.0, rng).loss_reason == LossReason.WEAK_SIGNAL
        outcome = packet_outcome(EXPERIMENTAL, 23.0, rng)
        assert outcome.delivered == (outcome.loss_reason == LossReason.NONE)

    def test_outcome_consumes_one_draw(self):
        from core.radio import packet_outcome
        from models.radio import EXPERIMENTAL
        from utils.rng import stream

        a, b = stream(3, "x"), stream(3, "x")
        packet_outcome(EXPERIMENTAL, 10.0, a)
        b.random()
        assert a.random() == b.random()

    def test_invalid_profile(self):
        from models.radio import RadioProfile

        with pytest.raises(ValueError):
            RadioProfile(tx_power=0.0, snr_decode_min=30.0, snr_overdrive_start=20.0)
        with pytest.raises(ValueError):
            RadioProfile(tx_power=0.0, bandwidth=0.0)

    def test_airtime(self):
        """Preamble plus payload bits at the PHY rate"""
        from config import config
        from core.radio import airtime_s

        expected = config.radio.preamble_s + 8 * 125 / config.radio.phy_rate_bps
        assert airtime_s(125) == pytest.approx(expected)


class TestLabBench:
    """Cabled calibration sweep"""

    def test_amplifier_shifts_curve(self):
        """With the amplifier in, the same PER appears 21 dB further down the attenuator"""
        from core.missions import run_lab_bench

        attenuations = [float(a) for a in range(60, 142, 4)]
        without = run_lab_bench(0.0, attenuations, packets_per_point=2000, seed=4)
        with_amp = run_lab_bench(21.0, [a + 21.0 for a in attenuations], packets_per_point=2000, seed=4)
        for a, b in zip(without, with_amp):
            sigma = math.sqrt(max(a.per * (1 - a.per), 1e-4) / a.sent)
            assert abs(a.per - b.per) <= 3 * sigma
            assert a.snr == pytest.approx(b.snr)

    def test_curve_has_both_edges(self):
        """Low attenuation overdrives the bench radio, high attenuation starves it"""
        from core.missions import run_lab_bench

        points = run_lab_bench(0.0, [60.0, 90.0, 140.0], packets_per_point=1000)
        assert points[0].overdrive == points[0].sent - points[0].delivered > 0
        assert points[1].per < 0.01
        assert points[2].weak == points[2].sent
