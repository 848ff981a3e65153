import dataclasses

import numpy as np
import pytest
import tomli_w

from splitfed_latency.channel import dbm_to_watts
from splitfed_latency.cli import bundled_config
from splitfed_latency.scenario import (ConfigError, Geometry, LayerProfile, ModelProfile,
                                       default_scenario, gpt2_small_profile, load_scenario,
                                       sample_scenario, scenario_from_dict, scenario_to_dict,
                                       validate_scenario, write_scenario)


class TestConfig:
    def test_default_file_matches_table(self):
        s = load_scenario(bundled_config())
        assert s.K == 5 and s.M == 20 and s.N == 20
        assert s.server.compute_rate == 5e9
        assert sum(s.channels.bw_main) == pytest.approx(500e3)
        assert sum(s.channels.bw_fed) == pytest.approx(500e3)
        assert s.server.cycles_per_flop == 1 / 32768
        assert s.clients[0].cycles_per_flop == 1 / 1024
        assert s.server.antenna_main == 160 and s.server.antenna_fed == 80
        assert s.clients[0].max_power == pytest.approx(dbm_to_watts(41.76))
        assert s.server.power_cap_main == pytest.approx(dbm_to_watts(46.99))
        assert s.server.noise_psd_main == pytest.approx(10 ** (-17.4) * 1e-3)
        assert s.model.batch_size == 16 and s.model.num_layers == 12

    def test_default_file_equals_python_default(self):
        assert load_scenario(bundled_config()) == default_scenario(0)

    def test_omitted_kappa_s(self):
        s = scenario_from_dict({"network": {"num_clients": 2}})
        assert s.server.cycles_per_flop == 1 / 32768

    def test_m_less_than_k(self):
        with pytest.raises(ConfigError, match="M >= K required"):
            scenario_from_dict({"network": {"num_clients": 5, "num_subchannels_main": 4}})

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown"):
            scenario_from_dict({"netwrok": {}})

    def test_unreadable(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_scenario(tmp_path / "missing.toml")

    def test_round_trip(self, tmp_path):
        s = default_scenario(3)
        write_scenario(s, tmp_path / "s.toml")
        assert load_scenario(tmp_path / "s.toml") == s
        assert scenario_from_dict(scenario_to_dict(s)) == s

    def test_dbm_and_watts_agree(self):
        a = scenario_from_dict({"clients": {"max_power_dbm": 30.0}})
        b = scenario_from_dict({"clients": {"max_power_w": 1.0}})
        assert a.clients[0].max_power == pytest.approx(b.clients[0].max_power)


class TestSampling:
    def test_deterministic(self):
        t = default_scenario(0)
        a, b = sample_scenario(t, 11), sample_scenario(t, 11)
        assert a == b
        assert np.array_equal(a.gain_main, b.gain_main)

    def test_seed_changes_draw(self):
        t = default_scenario(0)
        assert sample_scenario(t, 1) != sample_scenario(t, 2)

    def test_zero_radius(self):
        t = default_scenario(0)
        s = sample_scenario(t.replace(geometry=Geometry(d_max=0.0)), 4)
        assert all(c.dist_fed == Geometry().min_distance for c in s.clients)
        assert all(c.dist_main == pytest.approx(0.1) for c in s.clients)

    def test_compute_range(self):
        for seed in range(20):
            s = default_scenario(seed)
            assert all(1.0e9 <= c.compute_rate <= 1.6e9 for c in s.clients)

    def test_geometry(self):
        for seed in range(20):
            s = default_scenario(seed)
            for c in s.clients:
                assert Geometry().min_distance <= c.dist_fed <= 0.020
                assert 0.080 <= c.dist_main <= 0.120

    def test_shadowing_statistics(self):
        draws = np.concatenate([default_scenario(k, num_clients=20).shadow_main_db for k in range(50)])
        assert abs(draws.mean()) < 0.5
        assert draws.std() == pytest.approx(8.0, rel=0.05)


class TestValidation:
    def test_default_valid(self):
        assert validate_scenario(default_scenario(0)) == []

    def test_negative_bandwidth(self):
        s = default_scenario(0)
        bw = list(s.channels.bw_main)
        bw[3] = -1.0
        errs = validate_scenario(s.replace(channels=dataclasses.replace(s.channels, bw_main=tuple(bw))))
        assert len(errs) == 1 and "bw_main[3]" in errs[0]

    def test_one_layer(self):
        s = default_scenario(0)
        m = ModelProfile((LayerProfile(1.0, 2.0),))
        errs = validate_scenario(s.replace(model=m))
        assert any("length >= 2" in e for e in errs)


class TestGpt2Profile:
    def test_block_flops(self):
        m = gpt2_small_profile()
        assert m.layers[0].fp_flops == pytest.approx(566.925e9)
        assert m.layers[0].bp_flops == pytest.approx(2 * 566.925e9)
        assert m.layers[-1].fp_flops == pytest.approx(566.925e9 + 1264.125e9)

    def test_activation_and_lora_bits(self):
        m = gpt2_small_profile()
        assert m.layers[0].activation_bits == 512 * 768 * 16
        assert m.layers[0].lora_param_bits == 2 * (768 + 768) * 32
