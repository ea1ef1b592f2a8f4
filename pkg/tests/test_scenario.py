import hashlib
import math

import numpy as np
import pytest

from geojam import orbital, scenario
from geojam import signal as sg
from geojam.scenario import StationaryConfig, TimeVariantConfig

SMALL_TV = dict(n_trajectories=6, duration=21600.0, epoch_step=120.0, samples_per_epoch=64)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestSchedule:
    def test_example(self):
        assert scenario.schedule_periodic_jamming(10, 4, 0.5) == [1, 1, 0, 0, 1, 1, 0, 0, 1, 1]

    def test_extremes(self):
        assert scenario.schedule_periodic_jamming(7, 3, 0.0) == [0] * 7
        assert scenario.schedule_periodic_jamming(7, 3, 1.0) == [1] * 7

    def test_exact_half(self):
        assert sum(scenario.schedule_periodic_jamming(1000, 20, 0.5)) == 500

    def test_half_up_rounding(self):
        # duty * period = 2.5 rounds up to 3 jammed epochs
        assert scenario.schedule_periodic_jamming(5, 5, 0.5) == [1, 1, 1, 0, 0]

    def test_invalid(self):
        with pytest.raises(ValueError):
            scenario.schedule_periodic_jamming(5, 0, 0.5)
        with pytest.raises(ValueError):
            scenario.schedule_periodic_jamming(5, 2, 1.5)


class TestConfigs:
    @pytest.mark.parametrize(
        "kwargs",
        [dict(voi_radius=-1.0), dict(jammed_count=6000), dict(samples_per_position=1), dict(n_positions=-1)],
    )
    def test_stationary_validation(self, kwargs):
        with pytest.raises(ValueError):
            StationaryConfig(**kwargs)

    @pytest.mark.parametrize(
        "kwargs", [dict(jam_period=0), dict(jam_duty=1.0), dict(epoch_step=0.0), dict(voi_radius=0.0)]
    )
    def test_timevariant_validation(self, kwargs):
        with pytest.raises(ValueError):
            TimeVariantConfig(**kwargs)


class TestStationary:
    def test_default_counts_and_membership(self, default_stationary):
        records, _ = default_stationary
        assert len(records) == 5000
        labels = scenario.label_vector(records)
        assert labels.sum() == 2262 and (labels == 0).sum() == 2738
        assert all(r.features.distance_to_target <= 5000.0 for r in records)
        target, _ = scenario.uplink_geometry()
        pos = np.array([r.attacker_position for r in records])
        d = np.linalg.norm(pos - target, axis=1)
        assert np.allclose(d, [r.features.distance_to_target for r in records], rtol=1e-12)

    def test_labels_consistent_with_bursts(self, default_stationary):
        records, _ = default_stationary
        _, uplink = scenario.uplink_geometry()
        link = sg.RfLinkConfig()
        clear_power = sg.received_power(
            link.tx_power, link.tx_gain, link.rx_gain, uplink * 1e3, link.frequency
        ) + sg.noise_power(link.noise_temperature, link.bandwidth)
        clear = np.array([r.features.rss for r in records if r.is_jammed == 0])
        assert clear.mean() == pytest.approx(clear_power, rel=0.01)
        assert all(
            r.features.total_received_power == pytest.approx(clear_power, rel=1e-12)
            for r in records
            if r.is_jammed == 0
        )
        clear_snr = sg.sjnr_db(clear_power - sg.noise_power(290.0, 1e6), 0.0, sg.noise_power(290.0, 1e6))
        jam_sjnr = max(r.features.sjnr_at_target for r in records if r.is_jammed)
        assert jam_sjnr < clear_snr - 10

    def test_close_attacker_far_below_snr(self):
        cfg = StationaryConfig(n_positions=20, voi_radius=100.0, jammed_count=20, samples_per_position=16)
        records = scenario.gen_stationary(cfg)
        assert all(r.features.sjnr_at_target < 27.52 - 30 for r in records)

    def test_no_jamming(self):
        cfg = StationaryConfig(n_positions=200, jammed_count=0, samples_per_position=200)
        records = scenario.gen_stationary(cfg)
        assert scenario.label_vector(records).sum() == 0
        rss = np.array([r.features.rss for r in records])
        assert rss.mean() == pytest.approx(records[0].features.total_received_power, rel=0.02)

    def test_deterministic(self):
        cfg = StationaryConfig(n_positions=50, jammed_count=20, samples_per_position=32, seed=9)
        assert scenario.gen_stationary(cfg) == scenario.gen_stationary(cfg)
        other = scenario.gen_stationary(StationaryConfig(n_positions=50, jammed_count=20, samples_per_position=32, seed=10))
        assert other != scenario.gen_stationary(cfg)


class TestTimeVariant:
    def test_records_only_at_access_epochs(self):
        cfg = TimeVariantConfig(**SMALL_TV)
        target_lon = scenario.TARGET_LONGITUDE
        for i in range(cfg.n_trajectories):
            records = scenario.gen_trajectory(cfg, i)
            el = orbital.random_attacker_elements(
                scenario.derive_seed(scenario.trajectory_seed(cfg.seed, i), 0), target_lon, r_voi=cfg.voi_radius
            )
            for r in records:
                att = orbital.propagate(el, r.epoch).position
                tgt = orbital.geo_slot_state(target_lon, r.epoch).position
                assert orbital.line_of_sight(att, tgt)
                assert orbital.range_km(att, tgt) <= cfg.voi_radius
                assert r.range_km == pytest.approx(orbital.range_km(att, tgt), rel=1e-12)

    def test_labels_follow_schedule(self):
        cfg = TimeVariantConfig(**SMALL_TV)
        ds = scenario.gen_timevariant(cfg)
        for records in ds.trajectories:
            labels = [r.is_jammed for r in records]
            assert labels == scenario.schedule_periodic_jamming(len(labels), cfg.jam_period, cfg.jam_duty)
            assert all(r.snr_db == pytest.approx(27.5306, abs=1e-3) for r in records)
            assert all(r.features.sjnr_at_target == r.snr_db for r in records if not r.is_jammed)

    def test_trajectories_are_order_independent(self):
        cfg = TimeVariantConfig(**SMALL_TV)
        ds = scenario.gen_timevariant(cfg)
        assert scenario.gen_trajectory(cfg, 4) == ds.trajectories[4]
        assert ds.seeds == [scenario.trajectory_seed(cfg.seed, i) for i in range(cfg.n_trajectories)]

    def test_default_dataset_scale(self, default_timevariant):
        ds, _ = default_timevariant
        assert len(ds.trajectories) == 100
        assert ds.n_epochs > 20_000
        assert ds.empty_count < 100
        labels = np.concatenate([scenario.label_vector(t) for t in ds.trajectories if t])
        assert labels.mean() == pytest.approx(0.5, abs=0.02)


class TestCsv:
    def test_stationary_header(self, tmp_path):
        records = scenario.gen_stationary(StationaryConfig(n_positions=3, jammed_count=1, samples_per_position=8))
        path = tmp_path / "s.csv"
        scenario.write_csv(records, path)
        assert path.read_text().splitlines()[0] == (
            "position_id,attacker_x,attacker_y,attacker_z,distance_to_target,rss,total_received_power,"
            "total_amplitude_mean,total_amplitude_std,total_phase_variance,sjnr_at_target,is_jammed"
        )
        assert b"\r\n" not in path.read_bytes()

    def test_round_trip(self, tmp_path):
        records = scenario.gen_stationary(StationaryConfig(n_positions=40, jammed_count=13, samples_per_position=8))
        scenario.write_csv(records, tmp_path / "s.csv")
        assert scenario.read_csv(tmp_path / "s.csv") == records
        epochs = scenario.gen_trajectory(TimeVariantConfig(**SMALL_TV), 0)
        scenario.write_csv(epochs, tmp_path / "t.csv", kind="timevariant")
        assert scenario.read_csv(tmp_path / "t.csv") == epochs

    def test_timevariant_dir_round_trip_and_determinism(self, tmp_path):
        cfg = TimeVariantConfig(**SMALL_TV)
        ds = scenario.gen_timevariant(cfg)
        scenario.write_timevariant(ds, tmp_path / "a")
        scenario.write_timevariant(scenario.gen_timevariant(cfg), tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert len(names) == cfg.n_trajectories + 1
        assert all(sha(tmp_path / "a" / n) == sha(tmp_path / "b" / n) for n in names)
        back = scenario.read_timevariant(tmp_path / "a")
        assert back.trajectories == ds.trajectories and back.seeds == ds.seeds
        manifest = (tmp_path / "a" / scenario.MANIFEST_NAME).read_text().splitlines()
        assert manifest[0] == "trajectory_id,file,seed,n_epochs,n_jammed"
        assert len(manifest) == cfg.n_trajectories + 1

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("position_id,attacker_x,rss,is_jammed\n0,1,2,0\n")
        with pytest.raises(scenario.SchemaError, match="attacker_y"):
            scenario.read_csv(path)

    def test_malformed_row_names_line(self, tmp_path):
        records = scenario.gen_stationary(StationaryConfig(n_positions=3, jammed_count=1, samples_per_position=8))
        path = tmp_path / "s.csv"
        scenario.write_csv(records, path)
        lines = path.read_text().splitlines()
        lines[2] = lines[2].replace(lines[2].split(",")[5], "oops", 1)
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(scenario.ParseError, match="line 3"):
            scenario.read_csv(path)

    def test_bad_label(self, tmp_path):
        records = scenario.gen_stationary(StationaryConfig(n_positions=2, jammed_count=1, samples_per_position=8))
        path = tmp_path / "s.csv"
        scenario.write_csv(records, path)
        text = path.read_text().splitlines()
        text[1] = text[1].rsplit(",", 1)[0] + ",7"
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(scenario.ParseError, match="line 2"):
            scenario.read_csv(path)

    def test_unknown_schema_and_empty(self, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n1,2\n")
        with pytest.raises(scenario.SchemaError):
            scenario.read_csv(tmp_path / "x.csv")
        (tmp_path / "e.csv").write_text("")
        with pytest.raises(scenario.SchemaError):
            scenario.read_csv(tmp_path / "e.csv")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(scenario.DataError):
            scenario.read_timevariant(tmp_path)

    def test_floats_exact(self, tmp_path):
        records = scenario.gen_stationary(StationaryConfig(n_positions=5, jammed_count=2, samples_per_position=8))
        scenario.write_csv(records, tmp_path / "s.csv")
        back = scenario.read_csv(tmp_path / "s.csv")
        assert all(
            math.isclose(a.features.rss, b.features.rss, rel_tol=0.0) and a.features.rss == b.features.rss
            for a, b in zip(records, back)
        )
