import csv
import io

import pytest

from revprice import cli
from revprice.config import ConfigError, HighRule, default_config, parse_config
from revprice.reverse import PMinPolicy

SMALL = """\
# tiny scenario
num_users = 10
total_resource = 100
num_slots = 3
theta_low = 1
theta_high_rule = linear:2,0   # uniform on [1, 2h]
p_min_policy = lemma1
num_realizations = 20
master_seed = 7
sweep_slot = 2
sweep_ratios = 0, 0.5, 1
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def rows(path):
    return list(csv.reader(io.StringIO(path.read_text())))


class TestConfig:
    def test_parse(self):
        cfg = parse_config(SMALL)
        assert cfg.num_users == 10 and cfg.total_resource == 100.0 and cfg.num_slots == 3
        assert cfg.theta_high_rule == HighRule(2.0, 0.0)
        assert cfg.p_min_policy == PMinPolicy.lemma1()
        assert cfg.sweep_slot == 2 and cfg.sweep_ratios == (0.0, 0.5, 1.0)

    def test_round_trip(self):
        for cfg in (parse_config(SMALL), default_config(), parse_config(SMALL.replace("lemma1", "ratio:0.7"))):
            assert parse_config(cfg.to_text()) == cfg

    def test_default_matches_experiment(self):
        cfg = default_config()
        model = cfg.demand_model()
        assert (cfg.num_users, cfg.total_resource, cfg.num_slots, cfg.num_realizations) == (100, 1000.0, 10, 1000)
        assert model.lower_at(5)[0] == 1.0 and model.upper_at(5)[0] == 10.0

    @pytest.mark.parametrize("rule,slot,expected", [("3.5", 4, 3.5), ("constant:2", 1, 2.0), ("linear:2,1", 3, 7.0)])
    def test_high_rules(self, rule, slot, expected):
        assert HighRule.parse(rule)(slot) == expected

    @pytest.mark.parametrize("line,key", [
        ("num_users = 0", "num_users"),
        ("num_users = ten", "num_users"),
        ("total_resource = -5", "total_resource"),
        ("theta_high_rule = quadratic:1", "theta_high_rule"),
        ("theta_high_rule = constant:0.5", "theta_high_rule"),
        ("p_min_policy = ratio:2", "p_min_policy"),
        ("sweep_slot = 4", "sweep_slot"),
        ("sweep_ratios = 0.5, 1.5", "sweep_ratios"),
        ("master_seed = -1", "master_seed"),
    ])
    def test_invalid_values_name_the_key(self, line, key):
        name = line.split("=")[0].strip()
        text = "\n".join(l for l in SMALL.splitlines() if not l.startswith(name)) + "\n" + line + "\n"
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.key == key

    def test_missing_key(self):
        text = "\n".join(l for l in SMALL.splitlines() if not l.startswith("master_seed"))
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.key == "master_seed"

    @pytest.mark.parametrize("extra", ["bogus = 1", "num_users = 5", "just words"])
    def test_malformed_lines(self, extra):
        with pytest.raises(ConfigError):
            parse_config(SMALL + extra + "\n")


class TestSimulate:
    def test_csv_shape(self, small_cfg, tmp_path):
        out = tmp_path / "horizon.csv"
        assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == cli.EXIT_OK
        table = rows(out)
        assert table[0] == cli.SIMULATE_HEADER
        assert [(r[0], r[1]) for r in table[1:]] == [
            (str(h), s) for h in (1, 2, 3) for s in ("forward_only", "reverse_on_forward")
        ]

    def test_byte_identical_rerun_and_workers(self, small_cfg, tmp_path):
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        cli.main(["simulate", "--config", str(small_cfg), "--out", str(a)])
        cli.main(["simulate", "--config", str(small_cfg), "--out", str(b)])
        cli.main(["simulate", "--config", str(small_cfg), "--out", str(c), "--workers", "4"])
        assert a.read_bytes() == b.read_bytes() == c.read_bytes()

    def test_seed_override(self, small_cfg, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli.main(["simulate", "--config", str(small_cfg), "--out", str(a)])
        cli.main(["simulate", "--config", str(small_cfg), "--out", str(b), "--seed", "8"])
        assert a.read_bytes() != b.read_bytes()

    def test_zero_spread_single_slot(self, tmp_path):
        cfg = tmp_path / "flat.cfg"
        cfg.write_text(SMALL.replace("num_slots = 3", "num_slots = 1").replace("linear:2,0", "constant:1").replace("sweep_slot = 2", "sweep_slot = 1"))
        out = tmp_path / "flat.csv"
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        table = rows(out)
        assert len(table) == 3
        # theta = 1 for everyone: p* = 10/110, each user takes exactly 10 units
        assert float(table[1][2]) == pytest.approx(100.0)

    def test_number_format(self):
        assert cli.fmt(1 / 3) == "0.333333333333"
        assert cli.fmt(1000.0) == "1000"


class TestSweep:
    def test_csv_shape(self, small_cfg, tmp_path):
        out = tmp_path / "sweep.csv"
        assert cli.main(["sweep", "--config", str(small_cfg), "--out", str(out)]) == 0
        table = rows(out)
        assert table[0] == cli.SWEEP_HEADER
        assert [(r[0], r[1]) for r in table[1:]] == [
            (r, s) for r in ("0", "0.5", "1") for s in ("forward_only", "reverse_on_forward")
        ]
        forward = [r[2:] for r in table[1:] if r[1] == "forward_only"]
        assert forward[0] == forward[1] == forward[2]
        assert table[-1][2:] == table[-2][2:]  # ratio 1: reverse equals forward

    def test_missing_sweep_keys(self, tmp_path):
        cfg = tmp_path / "nosweep.cfg"
        cfg.write_text("\n".join(l for l in SMALL.splitlines() if not l.startswith("sweep")))
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == cli.EXIT_CONFIG


class TestErrors:
    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(SMALL.replace("num_users = 10", "num_users = x"))
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o.csv")]) == cli.EXIT_CONFIG
        assert "num_users" in capsys.readouterr().err

    def test_missing_config_is_io_error(self, tmp_path, capsys):
        missing = tmp_path / "nope.cfg"
        assert cli.main(["validate", "--config", str(missing)]) == cli.EXIT_IO
        assert str(missing) in capsys.readouterr().err

    def test_unwritable_output_is_io_error(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "no_such_dir" / "o.csv"
        assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == cli.EXIT_IO
        assert str(out) in capsys.readouterr().err

    def test_bad_seed(self, small_cfg, tmp_path):
        assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(tmp_path / "o.csv"), "--seed", "-3"]) == cli.EXIT_CONFIG


class TestValidate:
    def test_small_config_passes(self, small_cfg, capsys):
        assert cli.main(["validate", "--config", str(small_cfg)]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert out.count("PASS") == 6 and "FAIL" not in out

    def test_zero_spread_config_passes(self, tmp_path, capsys):
        cfg = tmp_path / "flat.cfg"
        cfg.write_text(SMALL.replace("linear:2,0", "constant:1"))
        assert cli.main(["validate", "--config", str(cfg)]) == cli.EXIT_OK

    def test_corrupted_bid_rule_fails(self, small_cfg, monkeypatch, capsys):
        import numpy as np

        from revprice import reverse

        real = reverse.optimal_bid

        def overbid(theta, x, s, p, p_min):
            return np.minimum(real(theta, x, s, p, p_min) * 1.01, p)

        monkeypatch.setattr(reverse, "optimal_bid", overbid)
        assert cli.main(["validate", "--config", str(small_cfg)]) == cli.EXIT_VALIDATION
        assert "FAIL bid_optimality" in capsys.readouterr().out
