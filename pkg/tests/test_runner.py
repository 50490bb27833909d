import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rislab.runner import (AggregateSummary, ExperimentConfig, RunRecord,
                           aggregate, emit_plot, main, parse_config_file,
                           read_run_csv, run_single, setting_hash, smooth,
                           tail_mean, write_run_csv)
from rislab.sac import TrainRecord


def fake_run(scenario, seed, values):
    values = np.asarray(values, dtype=np.float64)
    rec = TrainRecord(values, values.copy(), np.zeros_like(values),
                      np.full_like(values, 0.2))
    return RunRecord(scenario, seed, rec, 1.0)


TINY = dict(k=2, m=2, l=4, steps=250, hidden_units=32, batch_size=8,
            buffer_capacity=250, smooth_window=5)


def tiny_flags(outdir, scenario="mismatch", seeds="0", **over):
    base = dict(TINY)
    base.update(over)
    flags = []
    for key, val in base.items():
        flags += [f"--{key.replace('_', '-')}", str(val)]
    return ["--scenario", scenario, "--seeds", seeds,
            "--outdir", str(outdir)] + flags


class TestSmooth:
    def test_window_one_identity(self, rng):
        x = rng.standard_normal(40)
        assert np.array_equal(smooth(x, 1), x)

    def test_constant_unchanged(self):
        x = np.full(30, 2.5)
        assert np.allclose(smooth(x, 25), x, atol=1e-12)

    def test_arithmetic_mean_tail(self):
        x = np.arange(1.0, 26.0)
        out = smooth(x, 25)
        assert out[-1] == pytest.approx(13.0)
        assert out[0] == pytest.approx(1.0)
        assert out[2] == pytest.approx(2.0)  # prefix averages

    def test_window_validation(self):
        with pytest.raises(ValueError):
            smooth(np.ones(5), 0)


class TestAggregate:
    def test_constant_records(self):
        runs = [fake_run("golden", s, np.full(1500, 4.0)) for s in range(3)]
        summary = aggregate(runs)
        st = summary.stats["golden"]
        assert st.mean == pytest.approx(4.0)
        assert st.ci_half_width == pytest.approx(0.0)
        assert st.n_runs == 3

    def test_performance_increase_ratio(self):
        runs = []
        for scen, val in (("golden", 8.0), ("mismatch", 6.0),
                          ("beta_space", 7.0)):
            runs += [fake_run(scen, s, np.full(1200, val)) for s in range(2)]
        summary = aggregate(runs)
        assert summary.performance_increase == pytest.approx(50.0)

    def test_two_seed_t_interval(self):
        runs = [fake_run("golden", 0, np.full(1000, 8.0)),
                fake_run("golden", 1, np.full(1000, 10.0))]
        st = aggregate(runs).stats["golden"]
        assert st.mean == pytest.approx(9.0)
        # t(0.975, df=1) * std / sqrt(2) = 12.7062 * sqrt(2) / sqrt(2)
        assert st.ci_half_width == pytest.approx(12.7062, abs=1e-3)

    def test_short_record_warns(self):
        runs = [fake_run("golden", s, np.full(100, 3.0)) for s in range(2)]
        with pytest.warns(UserWarning):
            summary = aggregate(runs)
        assert summary.stats["golden"].mean == pytest.approx(3.0)

    def test_seed_order_invariance(self):
        rng = np.random.default_rng(0)
        vals = [np.full(1000, v) for v in rng.uniform(3, 9, 4)]
        runs = [fake_run("golden", s, v) for s, v in enumerate(vals)]
        a = aggregate(runs).stats["golden"]
        b = aggregate(runs[::-1]).stats["golden"]
        assert a.mean == pytest.approx(b.mean, rel=1e-12)
        assert a.ci_half_width == pytest.approx(b.ci_half_width, rel=1e-9)

    def test_too_few_records(self):
        with pytest.raises(ValueError):
            aggregate([fake_run("golden", 0, np.full(1000, 1.0))])

    def test_no_increase_when_gap_inverted(self):
        runs = []
        for scen, val in (("golden", 6.0), ("mismatch", 7.0),
                          ("beta_space", 6.5)):
            runs += [fake_run(scen, s, np.full(1000, val)) for s in range(2)]
        assert aggregate(runs).performance_increase is None


class TestCsvRoundTrip:
    def test_full_precision(self, tmp_path, rng):
        rec = TrainRecord(rng.standard_normal(50) * 7,
                          rng.standard_normal(50),
                          rng.uniform(0, 0.3, 50), rng.uniform(0, 1, 50))
        path = tmp_path / "run.csv"
        write_run_csv(path, rec)
        loaded = read_run_csv(path)
        assert np.array_equal(loaded.true_sum_rate, rec.true_sum_rate)
        assert np.array_equal(loaded.training_reward, rec.training_reward)
        assert np.array_equal(loaded.lam, rec.lam)
        assert np.array_equal(loaded.alpha, rec.alpha)

    def test_header_check(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_run_csv(path)


class TestConfigHandling:
    def test_parse_file_and_comments(self, tmp_path):
        path = tmp_path / "exp.cfg"
        path.write_text(
            "# experiment\nl = 8\nbeta_min = 0.6  # hardware floor\n"
            "seeds = 1,2,3\nlog_base = e\n")
        values = parse_config_file(path)
        assert values == {"l": 8, "beta_min": 0.6, "seeds": (1, 2, 3),
                          "log_base": pytest.approx(np.e)}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("not_a_key = 3\n")
        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_setting_hash_stability(self):
        a = ExperimentConfig(seeds=(0,))
        b = ExperimentConfig(seeds=(5, 6))  # seeds excluded from the hash
        c = ExperimentConfig(seeds=(0,), l=8)
        assert setting_hash(a) == setting_hash(b)
        assert setting_hash(a) != setting_hash(c)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(seeds=())
        with pytest.raises(ValueError):
            ExperimentConfig(seeds=(0,), scenario="bogus")
        with pytest.raises(ValueError):
            ExperimentConfig(seeds=(0,), perturb_mode="other")


class TestRunSingle:
    def test_writes_csv_and_is_deterministic(self, tmp_path):
        cfg = ExperimentConfig(scenario="mismatch", seeds=(0,),
                               outdir=str(tmp_path / "a"), **TINY)
        run_a = run_single(cfg, 0)
        text_a = open(run_a.csv_path).read()
        assert text_a.startswith("step,true_sum_rate,training_reward,"
                                 "lambda,alpha\n")
        assert len(text_a.strip().splitlines()) == TINY["steps"] + 1
        cfg_b = ExperimentConfig(scenario="mismatch", seeds=(0,),
                                 outdir=str(tmp_path / "b"), **TINY)
        run_b = run_single(cfg_b, 0)
        assert text_a == open(run_b.csv_path).read()

    def test_null_perturbation_equals_vanilla(self, tmp_path):
        base = dict(TINY)
        mismatch = ExperimentConfig(scenario="mismatch", seeds=(7,),
                                    outdir=str(tmp_path / "m"), **base)
        null_beta = ExperimentConfig(scenario="beta_space", seeds=(7,),
                                     lambda0=0.0, perturb_mode="blended",
                                     outdir=str(tmp_path / "b"), **base)
        run_m = run_single(mismatch, 7)
        run_b = run_single(null_beta, 7)
        body_m = open(run_m.csv_path).read().splitlines()
        body_b = open(run_b.csv_path).read().splitlines()
        assert body_m == body_b


class TestEmitPlot:
    def test_svg_well_formed(self, tmp_path, rng):
        path = tmp_path / "curves.svg"
        emit_plot({"golden": rng.standard_normal((3, 60)) + 5,
                   "mismatch": rng.standard_normal((3, 60)) + 4},
                  path, window=10)
        tree = ET.parse(path)  # raises on malformed XML
        assert tree.getroot().tag.endswith("svg")

    def test_single_flat_series(self, tmp_path):
        path = tmp_path / "flat.svg"
        emit_plot({"only": np.full((1, 40), 2.0)}, path, window=5)
        assert ET.parse(path).getroot().tag.endswith("svg")

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot({}, tmp_path / "x.svg")
        with pytest.raises(ValueError):
            emit_plot({"a": np.ones((2, 10)), "b": np.ones((2, 11))},
                      tmp_path / "y.svg")


class TestCli:
    def test_train_and_replay_roundtrip(self, tmp_path):
        channels_path = str(tmp_path / "ch.npz")
        code = main(["train", *tiny_flags(tmp_path / "runs"),
                     "--save-channels", channels_path])
        assert code == 0
        csvs = sorted(os.listdir(tmp_path / "runs"))
        assert len(csvs) == 1
        original = open(tmp_path / "runs" / csvs[0]).read()
        code = main(["replay", *tiny_flags(tmp_path / "replay"),
                     "--channels", channels_path])
        assert code == 0
        replay_csvs = sorted(os.listdir(tmp_path / "replay"))
        replayed = open(tmp_path / "replay" / replay_csvs[0]).read()
        assert replayed == original

    def test_train_save_and_load_nets(self, tmp_path):
        nets_dir = str(tmp_path / "nets")
        assert main(["train", *tiny_flags(tmp_path / "r1"),
                     "--save-nets", nets_dir]) == 0
        assert os.path.exists(os.path.join(nets_dir, "actor.npz"))
        assert main(["train", *tiny_flags(tmp_path / "r2"),
                     "--load-nets", nets_dir]) == 0

    def test_config_file_with_cli_override(self, tmp_path):
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text("l = 6\nsteps = 120\nhidden_units = 32\n"
                            "batch_size = 8\nbuffer_capacity = 120\n")
        outdir = tmp_path / "runs"
        code = main(["train", "--config", str(cfg_path), "--scenario",
                     "mismatch", "--seeds", "0", "--outdir", str(outdir),
                     "--k", "2", "--m", "2", "--steps", "80"])
        assert code == 0
        name = os.listdir(outdir)[0]
        rows = open(outdir / name).read().strip().splitlines()
        assert len(rows) == 81  # CLI --steps beats the file's 120

    def test_oracle_command(self, capsys):
        assert main(["oracle", "--instances", "30", "--levels", "8"]) == 0
        out = capsys.readouterr().out
        assert "kernel agreement" in out

    def test_plot_command(self, tmp_path):
        outdir = tmp_path / "runs"
        assert main(["train", *tiny_flags(outdir)]) == 0
        csv_path = os.path.join(outdir, os.listdir(outdir)[0])
        svg = str(tmp_path / "out.svg")
        assert main(["plot", csv_path, "--out", svg, "--window", "10"]) == 0
        assert ET.parse(svg).getroot().tag.endswith("svg")

    def test_error_exit_code(self, tmp_path, capsys):
        code = main(["replay", "--channels", str(tmp_path / "missing.npz"),
                     "--seeds", "0", "--outdir", str(tmp_path)])
        assert code == 1
        assert "error" in capsys.readouterr().err
