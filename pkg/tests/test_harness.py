import json
import struct

import numpy as np
import pytest

from vthb.core import ClusterKey, k_bucket
from vthb.harness import cli, data, loop, report, sweep
from vthb.harness.config import ConfigError, RunConfig, SyntheticData
from vthb.harness.loop import RoundLog


def fvecs_bytes(rows):
    out = b""
    for r in rows:
        out += struct.pack("<i", len(r)) + struct.pack(f"<{len(r)}f", *r)
    return out


class TestFvecs:
    def test_single_record(self, tmp_path):
        p = tmp_path / "a.fvecs"
        p.write_bytes(fvecs_bytes([[1.0, 2.0, 3.0]]))
        np.testing.assert_array_equal(data.load_fvecs(p), [[1.0, 2.0, 3.0]])

    def test_mismatched_dimension_names_record(self, tmp_path):
        p = tmp_path / "a.fvecs"
        p.write_bytes(fvecs_bytes([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0, 7.0]]))
        with pytest.raises(data.FvecsError, match="record 2"):
            data.load_fvecs(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "a.fvecs"
        p.write_bytes(fvecs_bytes([[1.0, 2.0], [3.0, 4.0]])[:-4])
        with pytest.raises(data.FvecsError, match="record 1: truncated"):
            data.load_fvecs(p)
        p.write_bytes(fvecs_bytes([[1.0, 2.0]]) + b"\x01\x02")
        with pytest.raises(data.FvecsError, match="truncated"):
            data.load_fvecs(p)

    def test_nonpositive_dimension(self, tmp_path):
        p = tmp_path / "a.fvecs"
        p.write_bytes(struct.pack("<i", 0))
        with pytest.raises(data.FvecsError, match="nonpositive"):
            data.load_fvecs(p)

    def test_round_trip(self, tmp_path, rng):
        X = rng.standard_normal((1000, 24)).astype(np.float32)
        p = tmp_path / "x.fvecs"
        data.write_fvecs(p, X)
        assert p.stat().st_size == 1000 * 25 * 4
        np.testing.assert_array_equal(data.load_fvecs(p), X)
        np.testing.assert_array_equal(data.load_fvecs(p, limit=10), X[:10])

    def test_dataset_path(self, tmp_path, rng):
        X = rng.standard_normal((300, 4)).astype(np.float32)
        p = tmp_path / "x.fvecs"
        data.write_fvecs(p, X)
        got = data.load_dataset(RunConfig(dataset=str(p), max_vectors=100))
        np.testing.assert_array_equal(got, X[:100])
        with pytest.raises(FileNotFoundError):
            data.load_dataset(RunConfig(dataset=str(tmp_path / "missing.fvecs")))


class TestQueries:
    def test_collapsed_c_range(self, rng):
        qs = data.generate_queries(np.zeros((5, 3)), 200, (2.0, 2.0), (8, 15), rng)
        assert np.all(qs.c == 2.0)

    def test_ranges(self, rng):
        qs = data.generate_queries(np.zeros((5, 3)), 5000, (1.0, 4.0), (8, 15), rng)
        assert qs.c.min() > 1.0 and qs.c.max() <= 4.0
        assert qs.k.min() == 8 and qs.k.max() == 15

    def test_k_bucket_push_forward(self):
        rng = np.random.default_rng(8)
        n = 100_000
        qs = data.generate_queries(np.zeros((1, 2)), n, (2.0, 2.0), (1, 256), rng)
        counts = np.bincount([k_bucket(int(k)) for k in qs.k], minlength=9)
        for b in range(9):
            width = 1 if b == 8 else 2 ** b
            pb = width / 256
            assert abs(counts[b] - n * pb) <= 3 * np.sqrt(n * pb * (1 - pb)) + 1

    def test_singleton_holdout(self, rng):
        qs = data.generate_queries(np.ones((1, 3)), 50, (1.0, 4.0), (8, 15), rng)
        assert set(qs.vec_ids) == {0}
        np.testing.assert_array_equal(qs[7].v, np.ones(3))

    def test_empty_holdout(self, rng):
        with pytest.raises(ValueError):
            data.generate_queries(np.zeros((0, 3)), 5, (1.0, 4.0), (8, 15), rng)

    def test_split(self, rng):
        X = np.arange(40.0).reshape(20, 2)
        base, hold = data.split(X, 0.1, 0)
        assert base.shape == (18, 2) and hold.shape == (2, 2)
        assert sorted(map(tuple, np.vstack([base, hold]))) == sorted(map(tuple, X))
        with pytest.raises(ValueError):
            data.split(X[:1], 0.5, 0)


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = RunConfig(nlist=8, c_range=(1.5, 3.0), synthetic=SyntheticData(n=999))
        cfg.save(tmp_path / "c.json")
        assert RunConfig.load(tmp_path / "c.json") == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"bogus": 1})

    @pytest.mark.parametrize("change", [
        {"nprobe": 0}, {"nprobe": 99}, {"policy": "nope"}, {"c_range": (0.5, 2.0)}, {"k_range": (5, 2)},
        {"horizon": -1}, {"conp_epsilon": 2.0}, {"width_rule": "x"}, {"grid": (8, 8)}, {"p_lo": 5.0, "p_hi": 1.0},
    ])
    def test_invalid(self, change):
        with pytest.raises(ConfigError):
            RunConfig(**change).validate()


class TestRun:
    def test_zero_horizon(self, small_cfg):
        log = loop.run(small_cfg.with_(horizon=0))
        assert len(log) == 0

    def test_single_round(self, small_cfg):
        cfg = small_cfg.with_(horizon=1, nlist=1, nprobe=1, grid=(64,), c_range=(2.0, 2.0), k_range=(10, 10),
                              n_intervals=1)
        log = loop.run(cfg)
        assert len(log) == 1
        assert log.e[0] == 0 and log.j[0] == 0 and log.p[0] == cfg.p_hi

    def test_replay_byte_identical(self, small_cfg, tmp_path):
        cfg = small_cfg.with_(horizon=1000, seed=4)
        a = report.write_log(loop.run(cfg), tmp_path / "a.csv", timing=False).read_bytes()
        b = report.write_log(loop.run(cfg), tmp_path / "b.csv", timing=False).read_bytes()
        assert a == b

    def test_regret_split(self, small_cfg):
        log = loop.run(small_cfg)
        np.testing.assert_allclose(log.config_regret + log.price_regret, log.regret, atol=1e-12)
        np.testing.assert_allclose(log.cum_regret, np.cumsum(log.regret))
        assert np.all(log.config_regret >= -1e-12)
        np.testing.assert_allclose(log.r, log.s * (log.p - log.cost))

    def test_oracle_slack_bounds_regret(self, small_cfg):
        log = loop.run(small_cfg)
        for c, reg in zip(log.clusters, log.regret):
            assert reg >= -log.oracle[c].slack

    def test_bad_dataset_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            loop.prepare(RunConfig(dataset=str(tmp_path / "nope.fvecs")))

    def test_smoothness_guard(self, small_cfg):
        with pytest.raises(ConfigError, match="beta"):
            loop.run(small_cfg.with_(horizon=5, beta=0.01))

    def test_policies_run(self, small_cfg):
        for pol in ("vthb", "stcf", "rdcf", "stp", "rdp", "linp", "conp"):
            log = loop.run(small_cfg.with_(horizon=50, policy=pol))
            assert len(log) == 50 and log.policy == pol


def constant_log(T, r=0.5):
    t = np.arange(1, T + 1)
    key = ClusterKey(0, 1, 3)
    return RoundLog(t, [key] * T, np.zeros(T, int), np.full(T, 64), np.zeros(T, int), np.full(T, 2.0),
                    np.full(T, 0.25), np.zeros(T), np.full(T, r), np.full(T, r / 2), np.full(T, 0.1),
                    np.cumsum(np.full(T, 0.1)), np.full(T, 0.04), np.full(T, 0.06), np.full(T, 10, int),
                    np.full(T, 1e-5), "test")


class TestReport:
    def test_constant_log(self):
        s = report.summarize(constant_log(100))
        assert s.average_reward == 0.5 and s.intra_cluster_variance == 0.0
        assert s.cumulative_regret == pytest.approx(10.0)
        assert s.window == 10 and len(s.windowed_regret) == 10
        assert all(w == pytest.approx(0.1) for w in s.windowed_regret)
        assert s.config_regret + s.price_regret == pytest.approx(s.cumulative_regret)

    def test_empty(self):
        with pytest.raises(ValueError):
            report.summarize(RoundLog.empty())

    def test_recompute_from_log(self, small_cfg):
        log = loop.run(small_cfg)
        s = report.summarize(log, window=70)
        assert s.average_reward == pytest.approx(sum(log.r) / len(log.r), rel=1e-12)
        assert sum(c.cumulative_regret for c in s.per_cluster.values()) == pytest.approx(s.cumulative_regret)
        assert sum(c.rounds for c in s.per_cluster.values()) == len(log)
        assert len(s.windowed_regret) == 8
        assert s.windowed_regret[-1] == pytest.approx(log.regret[490:].mean())
        assert s.timing["median_last_decile_s"] > 0

    def test_weighted_regret(self):
        s = report.summarize(constant_log(20), weights={ClusterKey(0, 1, 3): 3.0})
        assert s.weighted_regret == pytest.approx(2.0)

    def test_csv_round_trip(self, small_cfg, tmp_path):
        log = loop.run(small_cfg.with_(horizon=200))
        path = report.write_log(log, tmp_path / "run.csv")
        back = report.read_log(path, policy="vthb")
        assert report.log_to_csv(back) == path.read_text()
        assert back.clusters == log.clusters
        np.testing.assert_array_equal(back.duration, log.duration)
        for col in ("p", "r", "regret", "cum_regret"):
            np.testing.assert_array_equal(getattr(back, col), getattr(log, col))

    def test_schema_errors(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("t,cluster\n1,0\n")
        with pytest.raises(report.SchemaError, match="schema tag"):
            report.read_log(p)
        p.write_text("# schema: vthb.roundlog/1\nt,cluster\n")
        with pytest.raises(report.SchemaError, match="header"):
            report.read_log(p)

    def test_summary_files(self, tmp_path):
        s = report.summarize(constant_log(30))
        txt, csv_path = report.write_summary(s, tmp_path / "x")
        assert "average reward" in txt.read_text()
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "# schema: vthb.summary/1" and len(lines) == 3


class TestSweep:
    def test_seed_fan_out(self, small_cfg):
        cells = sweep.sweep(small_cfg.with_(horizon=40), "p_hi", [8.0, 12.0], seeds=[0, 1, 2])
        assert [(c.value, c.seed) for c in cells] == [(v, s) for v in (8.0, 12.0) for s in (0, 1, 2)]
        means = sweep.mean_by_value(cells)
        assert set(means) == {8.0, 12.0}

    def test_invalid_axis(self, small_cfg):
        with pytest.raises(ConfigError):
            sweep.sweep(small_cfg, "beta", [1.0])

    def test_invalid_value(self, small_cfg):
        with pytest.raises(ConfigError):
            sweep.sweep(small_cfg, "p_hi", [0.5])

    def test_matches_single_run(self, small_cfg):
        cfg = small_cfg.with_(horizon=100)
        cell = sweep.sweep(cfg, "p_hi", [12.0], seeds=[3])[0]
        direct = report.summarize(loop.run(cfg.with_(p_hi=12.0, seed=3)))
        assert cell.summary.average_reward == direct.average_reward
        assert cell.summary.cumulative_regret == direct.cumulative_regret

    def test_nlist_clamps_nprobe(self, small_cfg):
        cfg = sweep.cell_config(small_cfg.with_(nprobe=4), "nlist", 2, 0)
        assert cfg.nlist == 2 and cfg.nprobe == 2

    def test_rows(self, small_cfg):
        cells = sweep.sweep(small_cfg.with_(horizon=20), "k_range", [(2, 4)])
        assert cells[0].row()["value"] == "2-4"


SMALL = ["--set", "synthetic.n=3000", "--set", "synthetic.dim=16", "--max-vectors", "3000"]


class TestCli:
    def test_run_writes_outputs(self, tmp_path, capsys):
        rc = cli.main(["run", *SMALL, "--horizon", "200", "--out", str(tmp_path)])
        assert rc == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"config.json", "vthb-seed0.csv", "vthb-seed0.timing.csv", "vthb-seed0.summary.txt",
                "vthb-seed0.clusters.csv"} <= names
        assert json.loads((tmp_path / "config.json").read_text())["horizon"] == 200
        assert "average reward" in capsys.readouterr().out

    def test_report_subcommand(self, tmp_path, capsys):
        cli.main(["run", *SMALL, "--horizon", "100", "--out", str(tmp_path)])
        capsys.readouterr()
        assert cli.main(["report", str(tmp_path / "vthb-seed0.csv"), "--window", "25"]) == 0
        assert "w=25" in capsys.readouterr().out

    def test_config_file(self, tmp_path):
        RunConfig(horizon=7, synthetic=SyntheticData(n=3000, dim=16), max_vectors=3000).save(tmp_path / "c.json")
        args = cli.build_parser().parse_args(["run", "--config", str(tmp_path / "c.json"), "--seed", "5"])
        cfg = cli.config_from_args(args)
        assert cfg.horizon == 7 and cfg.seed == 5

    @pytest.mark.parametrize("argv", [
        ["run", "--nprobe", "99"],
        ["run", "--set", "market.bogus=1"],
        ["run", "--set", "nothing"],
        ["run", "--dataset", "/no/such/file.fvecs"],
        ["sweep", "--axis", "beta", "--values", "1"],
    ])
    def test_config_errors_exit_1(self, argv, tmp_path, capsys):
        assert cli.main([*argv, "--out", str(tmp_path)]) == 1
        assert "configuration error" in capsys.readouterr().err

    def test_sweep(self, tmp_path):
        rc = cli.main(["sweep", *SMALL, "--horizon", "30", "--axis", "k_range", "--values", "2-4,8-15",
                       "--seeds", "0,1", "--out", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "sweep-k_range.csv").read_text().splitlines()
        assert len(lines) == 2 + 4

    def test_build_index(self, tmp_path):
        assert cli.main(["build-index", *SMALL, "--out", str(tmp_path / "i.npz")]) == 0
        assert (tmp_path / "i.npz").exists()

    def test_selftest(self, capsys):
        assert cli.main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and out.count("PASS") >= 5
