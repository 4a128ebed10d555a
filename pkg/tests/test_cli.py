import json

import numpy as np
import pytest

from hdmimo.cli import EXIT_CONFIG, EXIT_STAGE, main
from hdmimo.config import ConfigError, from_dict, load_config, stage_seed
from hdmimo.metrics import (
    MetricsReport,
    SchemeMetrics,
    geometric_mean,
    percentile,
    rate_cdf,
    read_rates_csv,
    write_rates_csv,
)

SMALL = """\
seed: 3
topology: {n_users_white: 4, n_users_shaded: 10}
scheduler: {horizon: 300}
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL)
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = from_dict({})
        assert cfg.scheduler.horizon == 10_000 and cfg.rates.precoder == "zf"
        assert cfg.checkerboard().extent == 1000.0

    @pytest.mark.parametrize("data", [
        {"bogus": 1},
        {"topology": {"macro": {"colour": "red"}}},
        {"num": {"rho": 1.5}},
        {"rates": {"precoder": "mmse"}},
        {"schemes": ["num_magic"]},
        {"scheduler": "fast"},
    ])
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            from_dict(data)

    def test_load_yaml(self, small_cfg):
        cfg = load_config(small_cfg)
        assert cfg.seed == 3 and cfg.checkerboard().n_users_white == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.yaml")

    def test_stage_seed(self):
        assert stage_seed(0, "topology") == stage_seed(0, "topology")
        assert stage_seed(0, "topology") != stage_seed(0, "oracle")
        assert stage_seed(0, "topology") != stage_seed(1, "topology")
        assert 0 <= stage_seed(2 ** 64 - 1, "x") < 2 ** 64


class TestMetrics:
    def test_geomean(self):
        assert geometric_mean([2.0, 8.0]) == pytest.approx(4.0)

    def test_percentile_p5(self):
        assert percentile([1, 2, 3, 4], 5) == 1.0
        assert percentile([1, 2, 3, 4], 50) == 2.5

    @pytest.mark.parametrize("fn", [geometric_mean, lambda r: percentile(r, 5),
                                    lambda r: rate_cdf(r, [1.0])])
    def test_empty(self, fn):
        with pytest.raises(ValueError):
            fn([])

    def test_cdf(self):
        assert rate_cdf([1, 2, 3, 4], [0, 2, 10]) == [(0.0, 0.0), (2.0, 0.5), (10.0, 1.0)]

    def test_unserved_excluded_from_geomean(self):
        m = SchemeMetrics.from_rates("a", "shared", [0.0, 2.0, 8.0])
        assert m.geomean_rate == pytest.approx(4.0) and m.n_unserved == 1

    def test_csv_roundtrip(self, tmp_path):
        rows = [(1, "a", "shared", 0.1), (0, "a", "shared", 1 / 3), (0, "b", "split", 2.0)]
        write_rates_csv(tmp_path / "r.csv", rows)
        back = read_rates_csv(tmp_path / "r.csv")
        assert np.array_equal(back[("a", "shared")], [1 / 3, 0.1])
        assert (tmp_path / "r.csv").read_text().startswith("user_id,scheme,scenario,rate_bps_hz\n")

    def test_table(self):
        rep = MetricsReport([SchemeMetrics.from_rates("a", "shared", [1.0, 2.0])])
        assert "shared" in rep.table().splitlines()[1]


class TestCli:
    def test_topo(self, small_cfg, tmp_path):
        assert main(["topo", "--config", small_cfg, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "gains.csv").read_text().startswith("user_id,bs_id,beta_linear")
        assert (tmp_path / "bs.csv").exists() and (tmp_path / "users.csv").exists()

    def test_rates(self, small_cfg, tmp_path):
        assert main(["rates", "--config", small_cfg, "--out", str(tmp_path)]) == 0
        names = sorted(p.name for p in tmp_path.glob("catalog_*.csv"))
        assert names == ["catalog_shared.csv", "catalog_split_macro.csv", "catalog_split_pico.csv"]

    def test_solve(self, small_cfg, tmp_path):
        assert main(["solve", "--config", small_cfg, "--out", str(tmp_path),
                     "--scenario", "shared"]) == 0
        alloc = json.loads((tmp_path / "allocation_shared.json").read_text())
        assert alloc["residuals"]["feasibility"] <= 1e-8
        assert sum(alloc["lambda"].values()) <= 1 + 1e-9

    def test_schedule(self, small_cfg, tmp_path):
        assert main(["schedule", "--config", small_cfg, "--out", str(tmp_path), "--queues",
                     "--scenario", "split"]) == 0
        summary = json.loads((tmp_path / "schedule_split.json").read_text())
        assert summary["horizon"] == 300 and "queue_trace" in summary

    def test_oracle(self, tmp_path, capsys):
        assert main(["oracle", "--trials", "50", "--out", str(tmp_path)]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["n_trials"] == 50 and rep["rel_error"] < 0.1

    def test_pipeline_and_report(self, small_cfg, tmp_path, capsys):
        assert main(["pipeline", "--config", small_cfg, "--out", str(tmp_path)]) == 0
        assert main(["report", "--out", str(tmp_path), "--json", str(tmp_path / "m.json")]) == 0
        text = capsys.readouterr().out
        assert "num_vq" in text
        rep = json.loads((tmp_path / "m.json").read_text())
        assert len(rep["schemes"]) == 10

    def test_pipeline_repeat(self, small_cfg, tmp_path):
        assert main(["pipeline", "--config", small_cfg, "--out", str(tmp_path), "--repeat", "2",
                     "--scheme", "num_cellular"]) == 0
        assert (tmp_path / "seed_3" / "rates.csv").exists()
        assert (tmp_path / "seed_4" / "rates.csv").exists()

    def test_pipeline_deterministic(self, small_cfg, tmp_path):
        for d in ("a", "b"):
            assert main(["pipeline", "--config", small_cfg, "--out", str(tmp_path / d)]) == 0
        assert (tmp_path / "a" / "rates.csv").read_bytes() == (tmp_path / "b" / "rates.csv").read_bytes()

    def test_config_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("nonsense_key: 1\n")
        assert main(["topo", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert capsys.readouterr().err.startswith("[config]")

    def test_stage_error_exit(self, tmp_path, capsys):
        (tmp_path / "rates.csv").write_text("wrong,header\n")
        assert main(["report", "--out", str(tmp_path)]) == EXIT_STAGE
        assert "report" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["frobnicate"])
