import json
import math
from pathlib import Path

import numpy as np
import pytest

from dacom import cli, experiments
from dacom.config import (ConfigError, ExperimentConfig, config_hash,
                          load_config, parse_config, serialize_config)
from dacom.metrics import (EpisodeMetrics, MetricsFormatError, read_metrics_csv,
                           write_metrics_csv)
from dacom.plotting import curve_statistics, render_curves
from dacom.training import Hyper


def smoke_config(tmp_path, **kw):
    data = {
        "scenario": "cn",
        "algorithm": "dacom",
        "mean_delay_ratio": 0.30,
        "seeds": [1],
        "episodes": 3,
        "eval_episodes": 2,
        "out_dir": str(tmp_path / "runs"),
        "hyper": {"batch": 6, "warmup": 6, "update_every": 5, "hidden": 6,
                  "msg_dim": 4, "buffer": 300},
    }
    data.update(kw)
    return parse_config(data)


def tiny_cn_constants():
    return {}


# ---------------------------------------------------------------------------
# config


def test_config_defaults_match_reference_settings():
    h = Hyper()
    assert h.lr == 0.005
    assert h.gamma == 0.95
    assert h.xi == 0.01
    assert h.batch == 1024
    assert h.buffer == 100_000
    assert h.hidden == 64
    assert h.heads == 2
    assert h.msg_dim == 6


def test_config_round_trip_is_identity(tmp_path):
    cfg = smoke_config(tmp_path)
    text = serialize_config(cfg)
    again = parse_config(json.loads(text))
    assert again == cfg
    assert serialize_config(again) == text
    assert config_hash(again) == config_hash(cfg)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError) as err:
        parse_config({"scenario": "cn", "learning_rate": 1, "bogus": 2})
    assert "bogus" in str(err.value) and "learning_rate" in str(err.value)


def test_config_rejects_unknown_hyper_keys():
    with pytest.raises(ConfigError) as err:
        parse_config({"hyper": {"lr": 0.01, "momentum": 0.9}})
    assert "momentum" in str(err.value)


def test_config_requires_at_least_one_seed():
    with pytest.raises(ConfigError):
        parse_config({"seeds": []})


def test_config_scenario_episode_defaults():
    assert parse_config({"scenario": "cn"}).resolved_episodes == 15_000
    assert parse_config({"scenario": "traffic"}).resolved_episodes == 10_000


def test_config_records_overrides_for_provenance(tmp_path):
    cfg = smoke_config(tmp_path)
    overrides = cfg.overrides()
    assert any(o.startswith("hyper.batch=") for o in overrides)
    prov = cfg.provenance(seed=1)
    assert prov["seed"] == "1"
    assert "config_hash" in prov and "code_version" in prov


# ---------------------------------------------------------------------------
# metrics CSV


def rows_fixture(n=4, agents=3, seed=0):
    g = np.random.default_rng(seed)
    return [EpisodeMetrics(episode=k, rewards=tuple(g.normal(size=agents)),
                           wait_ratio=float(g.uniform(0, 1)),
                           msg_delay_ratio=float(g.uniform(0, 1)),
                           collisions=int(g.integers(0, 4)),
                           arrivals=int(g.integers(0, 4)),
                           win=bool(g.integers(0, 2)))
            for k in range(n)]


def test_metrics_round_trip(tmp_path):
    rows = rows_fixture()
    path = tmp_path / "m.csv"
    write_metrics_csv(path, {"seed": "7", "algorithm": "dacom",
                             "mean_delay_ratio": "0.3"}, rows)
    prov, back = read_metrics_csv(path)
    assert prov["seed"] == "7"
    assert back == rows


def test_metrics_writing_is_byte_deterministic(tmp_path):
    rows = rows_fixture()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_metrics_csv(p1, {"seed": "1"}, rows)
    write_metrics_csv(p2, {"seed": "1"}, rows)
    assert p1.read_bytes() == p2.read_bytes()


def test_metrics_reader_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# seed=1\nepisode,reward_mean,reward_0,wait_ratio,"
                    "msg_delay_ratio,collisions,arrivals,win\n1,2.0,2.0,0.1,0.1,0,0,1\n"
                    "2,not_a_number,2.0,0.1,0.1,0,0,1\n")
    with pytest.raises(MetricsFormatError) as err:
        read_metrics_csv(path)
    assert err.value.line_no == 4


def test_metrics_reader_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(MetricsFormatError):
        read_metrics_csv(path)


# ---------------------------------------------------------------------------
# plotting


def metrics_file(tmp_path, name, seed, algorithm="dacom", ratio=0.3, episodes=30,
                 offset=0.0):
    g = np.random.default_rng(seed)
    rows = [EpisodeMetrics(episode=k,
                           rewards=(offset + k * 0.1 + float(g.normal(scale=0.2)),),
                           wait_ratio=0.2, msg_delay_ratio=0.1,
                           collisions=0, arrivals=1, win=True)
            for k in range(episodes)]
    path = tmp_path / name
    write_metrics_csv(path, {"seed": str(seed), "algorithm": algorithm,
                             "mean_delay_ratio": repr(ratio)}, rows)
    return path


def test_curve_band_matches_statistics_oracle(tmp_path):
    paths = [metrics_file(tmp_path, f"s{k}.csv", seed=k) for k in range(4)]
    groups = curve_statistics(paths)
    assert len(groups) == 1
    g = groups[0]
    stacked = np.stack([[r.reward_mean for r in read_metrics_csv(p)[1]]
                        for p in paths])
    np.testing.assert_allclose(g.mean, stacked.mean(axis=0), rtol=1e-12)
    expected_half = 1.96 * stacked.std(axis=0, ddof=1) / math.sqrt(4)
    np.testing.assert_allclose(g.half_width, expected_half, rtol=1e-12)


def test_single_seed_curve_has_no_band(tmp_path):
    path = metrics_file(tmp_path, "one.csv", seed=1)
    out = tmp_path / "c.svg"
    render_curves([path], out)
    svg = out.read_text()
    assert "<polyline" in svg and "<polygon" not in svg
    assert svg.startswith("<svg")


def test_multi_seed_curve_has_band(tmp_path):
    paths = [metrics_file(tmp_path, f"m{k}.csv", seed=k) for k in range(3)]
    out = tmp_path / "c.svg"
    render_curves(paths, out)
    assert "<polygon" in out.read_text()


def test_multi_ratio_inputs_add_second_panel(tmp_path):
    paths = [metrics_file(tmp_path, "r1.csv", seed=1, ratio=0.1),
             metrics_file(tmp_path, "r2.csv", seed=1, ratio=0.5, offset=-1.0)]
    out = tmp_path / "c.svg"
    render_curves(paths, out)
    assert "mean delay ratio" in out.read_text()


def test_render_rejects_empty_input(tmp_path):
    with pytest.raises(ValueError):
        render_curves([], tmp_path / "x.svg")


def test_render_propagates_malformed_csv_with_line(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("# a=1\nepisode,reward_mean,reward_0,wait_ratio,"
                   "msg_delay_ratio,collisions,arrivals,win\noops\n")
    with pytest.raises(MetricsFormatError):
        render_curves([bad], tmp_path / "x.svg")


# ---------------------------------------------------------------------------
# experiments + cli integration (smoke scale)


def test_run_train_produces_deterministic_artifacts(tmp_path):
    cfg = smoke_config(tmp_path)
    art1 = experiments.run_train(cfg, render=False)
    bytes1 = [p.read_bytes() for p in art1.metrics_paths]
    art2 = experiments.run_train(cfg, render=False)
    bytes2 = [p.read_bytes() for p in art2.metrics_paths]
    assert bytes1 == bytes2
    assert all(p.exists() for p in art1.checkpoint_paths)


def test_eval_checkpoint_and_summary(tmp_path):
    cfg = smoke_config(tmp_path)
    art = experiments.run_train(cfg, render=False)
    summary = experiments.run_eval(art.checkpoint_paths[0], cfg, episodes=3, seed=0)
    assert summary.episodes == 3
    assert summary.ci_defined
    single = experiments.run_eval(art.checkpoint_paths[0], cfg, episodes=1, seed=0)
    assert not single.ci_defined
    assert single.reward_ci is None
    assert "undefined" in single.describe()


def test_eval_rejects_scenario_mismatch(tmp_path):
    cfg = smoke_config(tmp_path)
    art = experiments.run_train(cfg, render=False)
    wrong = cfg.replace(scenario="pp")
    with pytest.raises(ValueError):
        experiments.run_eval(art.checkpoint_paths[0], wrong, episodes=1)


def test_nocomm_eval_reports_zero_wait_ratio(tmp_path):
    cfg = smoke_config(tmp_path, algorithm="nocomm")
    art = experiments.run_train(cfg, render=False)
    summary = experiments.run_eval(art.checkpoint_paths[0], cfg, episodes=2)
    assert summary.wait_ratio_mean == 0.0


def test_fixed_timer_eval_reports_exact_fraction(tmp_path):
    cfg = smoke_config(tmp_path, algorithm="fixed:0.35")
    art = experiments.run_train(cfg, render=False)
    summary = experiments.run_eval(art.checkpoint_paths[0], cfg, episodes=2)
    assert summary.wait_ratio_mean == pytest.approx(0.35, abs=1e-12)


def test_sweep_emits_one_metrics_file_per_cell(tmp_path):
    cfg = smoke_config(tmp_path, episodes=2)
    results = experiments.run_sweep(cfg, ratios=[0.1, 0.3],
                                    algorithms=["dacom", "nocomm"], workers=1)
    assert len(results) == 4
    paths = [p for art in results for p in art.metrics_paths]
    assert len(paths) == 4
    assert len({str(p) for p in paths}) == 4
    for p in paths:
        assert Path(p).exists()


def test_cli_calibrate_and_render_and_errors(tmp_path, capsys):
    cfg = smoke_config(tmp_path)
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(serialize_config(cfg))
    assert cli.main(["calibrate", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "scale=" in out

    path = metrics_file(tmp_path, "m.csv", seed=0)
    svg = tmp_path / "out.svg"
    assert cli.main(["render", str(path), "--out", str(svg)]) == 0
    assert svg.exists()

    assert cli.main(["render", str(tmp_path / "missing.csv"),
                     "--out", str(svg)]) == 2


def test_cli_verify_bounds_writes_csv(tmp_path, capsys):
    out_csv = tmp_path / "bounds.csv"
    rc = cli.main(["verify-bounds", "--trials", "20000", "--agents", "1,2",
                   "--out", str(out_csv)])
    assert rc == 0
    assert out_csv.exists()
    text = out_csv.read_text()
    assert text.startswith("agents,expected_max")


def test_worker_count_env_parsing(monkeypatch):
    monkeypatch.delenv("DACOM_WORKERS", raising=False)
    assert experiments.worker_count() == 1
    monkeypatch.setenv("DACOM_WORKERS", "3")
    assert experiments.worker_count() == 3
    monkeypatch.setenv("DACOM_WORKERS", "junk")
    assert experiments.worker_count() == 1
    monkeypatch.setenv("DACOM_WORKERS", "-2")
    assert experiments.worker_count() == 1


def test_cli_train_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": "cn", "wat": 1}))
    assert cli.main(["train", str(bad)]) == 2
    assert "wat" in capsys.readouterr().err


def test_eval_trajectory_dump(tmp_path):
    cfg = smoke_config(tmp_path, episodes=2)
    art = experiments.run_train(cfg, render=False)
    traj = tmp_path / "traj.csv"
    rows = experiments.evaluate_checkpoint(art.checkpoint_paths[0], cfg,
                                           episodes=2, seed=1,
                                           trajectory_path=traj)
    lines = traj.read_text().splitlines()
    assert lines[0] == "step,entity,x,y,vx,vy,d"
    # 2 episodes x 25 steps x 6 agents records
    assert len(lines) - 1 == 2 * 25 * 6
    fields = lines[1].split(",")
    assert len(fields) == 7
    assert fields[1] == "0"
    float(fields[2]), float(fields[6])  # parseable kinematics


def test_empirical_gap_of_checkpoint_with_itself_is_zero(tmp_path):
    from dacom.bounds import empirical_gap
    cfg = smoke_config(tmp_path, episodes=2)
    art = experiments.run_train(cfg, render=False)
    ckpt = art.checkpoint_paths[0]
    gap = empirical_gap(ckpt, ckpt, cfg, episodes=4, seed=3)
    assert gap.gap == 0.0
    assert gap.contains_zero()
    assert gap.ci_low == 0.0 and gap.ci_high == 0.0


def test_empirical_gap_negligible_delay_limit(tmp_path):
    # at a 1% delay ratio, barely trained delay-aware and delay-blind
    # policies are statistically indistinguishable; small messages keep the
    # zero-distance delay floor below the target ratio
    from dacom.bounds import empirical_gap
    base = smoke_config(tmp_path, episodes=3, mean_delay_ratio=0.01,
                        radio={"message_bits": 200})
    aware = experiments.run_train(base, render=False)
    blind = experiments.run_train(base.replace(algorithm="fullcomm"),
                                  render=False)
    gap = empirical_gap(aware.checkpoint_paths[0], blind.checkpoint_paths[0],
                        base, episodes=30, seed=5)
    assert gap.contains_zero(), f"gap CI {gap.ci_low}..{gap.ci_high}"


def test_cli_train_smoke(tmp_path, capsys):
    cfg = smoke_config(tmp_path, episodes=2)
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(serialize_config(cfg))
    assert cli.main(["train", str(cfg_path), "--quiet"]) == 0
    out = capsys.readouterr().out
    assert "metrics_seed1.csv" in out
    assert "checkpoint_seed1.bin" in out
    assert "curves.svg" in out
