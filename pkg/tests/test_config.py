import math

import pytest

from risinvest.config import ScenarioConfig, dump_config, load_config, parse_config
from risinvest.errors import ConfigError
from risinvest.model import Scenario, rician_product_moments


class TestParse:
    def test_defaults(self):
        p = parse_config("").system_params()
        assert p.p0 == pytest.approx(1.0)
        assert p.noise_power == pytest.approx(1e-13)
        assert p.lambda_bs == pytest.approx(1e-5)
        assert p.ris_per_cluster == pytest.approx(5.0)

    def test_units(self):
        cfg = parse_config("""
system:
  lambda_bs_per_km2: 15
  p0_dbm: 20
  noise_dbm: -90
  carrier_ghz: 28
  penalty_k_db: 3
  scenario: coverage_hole
""")
        p = cfg.system_params()
        assert p.lambda_bs == pytest.approx(1.5e-5)
        assert p.p0 == pytest.approx(0.1)
        assert p.noise_power == pytest.approx(1e-12)
        assert p.carrier_hz == pytest.approx(2.8e10)
        assert p.penalty_k == pytest.approx(10 ** 0.3)
        assert p.scenario is Scenario.COVERAGE_HOLE

    def test_rician_moments(self):
        p = parse_config("system: {rician_k_db: [3, 6]}").system_params()
        mean, var = rician_product_moments(10 ** 0.3, 10 ** 0.6)
        assert p.zeta_mean == pytest.approx(mean)
        assert p.zeta_var == pytest.approx(var)

    def test_direct_moments_win(self):
        p = parse_config("system: {rician_k_db: [3, 6], zeta_mean: 0.5, zeta_var: 0.2}").system_params()
        assert (p.zeta_mean, p.zeta_var) == (0.5, 0.2)

    def test_overrides(self):
        p = ScenarioConfig().system_params(lambda_bs_per_km2=3.0, ris_per_cluster=0.0)
        assert p.lambda_bs == pytest.approx(3e-6)
        assert p.lambda_ris == 0.0


    def test_exponent_without_dot_is_a_float(self):
        cfg = parse_config("quadrature: {rel_tol: 1e-8}\nsystem: {penalty_k_db: 3E0}\n")
        assert cfg.quadrature.rel_tol == 1e-8
        assert cfg.system.penalty_k_db == 3.0


class TestErrors:
    def test_unknown_field_reports_line(self):
        with pytest.raises(ConfigError, match=r"line 3: unknown field 'system.alpah'"):
            parse_config("name: x\nsystem:\n  alpah: 3\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("plotting: {}\n")

    def test_physics_error(self):
        with pytest.raises(ConfigError, match="path-loss exponent"):
            parse_config("system: {alpha: 2}\n")

    def test_bad_yaml(self):
        with pytest.raises(ConfigError):
            parse_config("system: [\n")

    def test_bad_policy(self):
        with pytest.raises(ConfigError):
            parse_config("plan: {policy: maybe}\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")


class TestRoundTrip:
    def test_lossless(self):
        cfg = parse_config("""
name: demo
system: {lambda_bs_per_km2: 7.5, rician_k_db: [3, 6], carrier_ghz: 3.5}
cost: {c_bs_total: 10.0, c_ris_total: 2.0, cost_ratio_j: null}
sweep: {lambda_bs_per_km2: [3, 40], penalty_k_db: [0, 5, 10]}
quadrature: {rel_tol: 1.0e-7}
""")
        again = parse_config(dump_config(cfg))
        assert again == cfg
        assert dump_config(again) == dump_config(cfg)

    def test_shipped_configs_load(self):
        import pathlib

        root = pathlib.Path(__file__).resolve().parents[1] / "configs"
        files = sorted(root.glob("*.yaml"))
        assert files
        for path in files:
            cfg = load_config(path)
            assert parse_config(dump_config(cfg)) == cfg
