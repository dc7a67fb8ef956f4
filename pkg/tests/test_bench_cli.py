import json

import numpy as np
import pytest

from coprimedoa.bench import (
    ExperimentConfig,
    assignment_error,
    is_resolved,
    export_spectrum,
    run_accuracy_sweep,
    run_detection_sweep,
    run_resolution,
)
from coprimedoa.cli import main as cli_main


def small_cfg(**kw):
    base = dict(
        doas=(-0.5, 0.3),
        snr_db=0.0,
        T=200,
        methods=("csr", "root-music"),
        eps_policy={"kind": "noise-scaled", "epsilon_mult": 1.0,
                    "epsilon_d_mult": 2.0},
        trials=2,
        base_seed=99,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        small_cfg(methods=())
    with pytest.raises(ValueError):
        small_cfg(methods=("nope",))
    with pytest.raises(ValueError):
        small_cfg(eps_policy={"kind": "absolute"})
    with pytest.raises(ValueError):
        small_cfg(trials=0)
    with pytest.raises(ValueError):
        small_cfg(doas=None, n_sources=None)


def test_config_json_and_hash_stability():
    cfg = small_cfg()
    doc = cfg.to_json_dict()
    back = ExperimentConfig.from_json_dict(json.loads(json.dumps(doc)))
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_epsilon_policies():
    cfg = small_cfg(snr_db=-10.0)
    assert cfg.noise_power == pytest.approx(10.0)
    eps, eps_d = cfg.epsilons()
    assert eps == pytest.approx(10.0)
    assert eps_d == pytest.approx(20.0)
    cfg2 = small_cfg(eps_policy={"kind": "absolute", "epsilon": 5.0,
                                 "epsilon_d": 10.0})
    assert cfg2.epsilons() == (5.0, 10.0)


def test_assignment_error_permutation_safe():
    truth = [-0.5, 0.1, 0.7]
    est = [0.72, -0.48, 0.09]
    a = assignment_error(est, truth)
    b = assignment_error(est[::-1], truth)
    assert a["mean_abs_err"] == pytest.approx(b["mean_abs_err"])
    assert a["n_matched"] == 3 and a["n_missed"] == 0


def test_assignment_error_counts_misses_and_extras():
    out = assignment_error([0.1], [-0.5, 0.1])
    assert out["n_matched"] == 1 and out["n_missed"] == 1
    out2 = assignment_error([0.1, 0.2, 0.3], [0.1])
    assert out2["n_extra"] == 2
    out3 = assignment_error([], [0.1])
    assert np.isnan(out3["mean_abs_err"]) and out3["n_missed"] == 1


def test_is_resolved():
    true = np.sin(np.deg2rad([-32.0, -30.0]))
    good = np.sin(np.deg2rad([-32.1, -29.9]))
    assert is_resolved(good, true, 0.3)
    merged = np.sin(np.deg2rad([-31.0, -30.9]))
    assert not is_resolved(merged, true, 0.3)
    assert not is_resolved([true[0]], true, 0.3)


def test_accuracy_sweep_smoke_and_aggregates():
    cfg = small_cfg()
    res = run_accuracy_sweep(cfg, snr_grid=[0.0])
    assert len(res.records) == cfg.trials * len(cfg.methods)
    # aggregates recomputable from records
    for agg in res.aggregates:
        rows = [r for r in res.records
                if r["method"] == agg["method"]
                and r["grid_value"] == agg["grid_value"]]
        errs = np.array([r["mean_abs_err"] for r in rows])
        errs = errs[~np.isnan(errs)]
        assert agg["mean_err"] == pytest.approx(float(errs.mean()))
        assert agg["trials"] == len(rows)


def test_detection_sweep_smoke():
    cfg = small_cfg(methods=("csorte", "sorte-eig"), T=400,
                    doas=None, n_sources=3)
    res = run_detection_sweep(cfg, [2, 3])
    ks = {agg["grid_value"] for agg in res.aggregates}
    assert ks == {2, 3}
    for agg in res.aggregates:
        assert 0.0 <= agg["detection_prob"] <= 1.0


def test_resolution_requires_pair():
    cfg = small_cfg(doas=(-0.5, 0.3, 0.6))
    with pytest.raises(ValueError):
        run_resolution(cfg, [0.0])


def test_sweep_rerun_byte_identical(tmp_path):
    cfg = small_cfg()
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    run_accuracy_sweep(cfg, snr_grid=[0.0]).write(str(out1))
    run_accuracy_sweep(cfg, snr_grid=[0.0]).write(str(out2))
    rec1 = (tmp_path / "a_records.csv").read_bytes()
    rec2 = (tmp_path / "b_records.csv").read_bytes()
    assert rec1 == rec2
    sum1 = (tmp_path / "a_summary.csv").read_bytes()
    sum2 = (tmp_path / "b_summary.csv").read_bytes()
    assert sum1 == sum2


def test_export_spectrum_music_and_csr(tmp_path, geom35):
    cfg = small_cfg(doas=tuple(np.linspace(-0.8, 0.8, 5)), T=300,
                    snr_db=0.0,
                    eps_policy={"kind": "absolute", "epsilon": 2.0,
                                "epsilon_d": 4.0})
    info = export_spectrum(cfg, "music", str(tmp_path / "m.csv"))
    lines = (tmp_path / "m.csv").read_text().strip().split("\n")
    vals = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert vals.max() == pytest.approx(1.0)
    info = export_spectrum(cfg, "csr", str(tmp_path / "c.csv"))
    assert info["n_spikes"] >= 1
    assert (tmp_path / "c_spikes.csv").exists()


def test_export_spectrum_dsr_grid_size(tmp_path):
    cfg = small_cfg(T=300,
                    eps_policy={"kind": "absolute", "epsilon": 1.0,
                                "epsilon_d": 2.0})
    info = export_spectrum(cfg, "dsr", str(tmp_path / "d.csv"))
    assert info["n_grid"] == 401


def test_cli_estimate_and_bench(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = cli_main([
        "estimate", "-T", "200", "--snr", "0", "--epsilon", "1.0",
        "--epsilon-d", "2.0", "--seed", "5", "--out", "est",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "sin(theta)" in out and "noise power estimate" in out

    rc = cli_main([
        "bench-accuracy", "--sweep-snr", "0", "-T", "150",
        "--trials", "1", "--methods", "root-music", "--out", "acc",
        "--seed", "1",
    ])
    assert rc == 0
    assert (tmp_path / "acc_records.csv").exists()
    manifest = json.loads((tmp_path / "acc_manifest.json").read_text())
    assert "config_sha256" in manifest


def test_cli_bench_detection_and_resolution(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = cli_main([
        "bench-detection", "--k-range", "2,3", "-T", "300", "--trials",
        "1", "--methods", "sorte-eig", "--seed", "2", "--out", "det",
    ])
    assert rc == 0
    assert "P(detect)" in capsys.readouterr().out
    rc = cli_main([
        "bench-resolution", "--sweep-snr", "10", "--sources-deg=-40,-20",
        "-T", "200", "--trials", "1", "--methods", "root-music",
        "--seed", "3", "--out", "res",
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "P(resolve)" in out
    assert (tmp_path / "res_summary.csv").exists()


def test_cli_simulate_writes_npz(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = cli_main(["simulate", "-T", "64", "--seed", "3", "--out", "sim"])
    assert rc == 0
    data = np.load(tmp_path / "sim_snapshots.npz")
    assert data["data"].shape == (10, 64)


def test_cli_verify_stats_small(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = cli_main(["verify-stats", "--trials", "1000", "--out", "vs"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "kernel diagnostics: pass" in out
    assert (tmp_path / "vs_xy.csv").exists()
