import json

import pytest

from rbmlab.ensemble import ConfigurationError
from rbmlab.eigensolver import NumericalError
from rbmlab import montecarlo
from rbmlab.montecarlo import (
    ExperimentConfig,
    apply_env_overrides,
    load_manifest,
    rerun_from_manifest,
    run_experiment,
    validate,
)
from rbmlab.seeding import derive_trial_seed


def _run(tmp_path, name, **kw):
    kw.setdefault("master_seed", 3)
    cfg = ExperimentConfig(output=str(tmp_path / name), **kw)
    return cfg, run_experiment(cfg)


def test_dos_single_trial_layout_and_determinism(tmp_path):
    cfg, man = _run(tmp_path, "a", kind="dos", params={"N": 50}, trials=1)
    out = tmp_path / "a"
    for rel in ("manifest.json", "summary.json", "raw/dos.csv", "tables/dos.csv", "figures/dos.png"):
        assert (out / rel).is_file()
    assert "raw/dos.csv" in man.files
    lines = (out / "raw/dos.csv").read_text().splitlines()
    assert lines[0] == "grid_index,trial,eigenvalue" and len(lines) == 102
    cfg2 = ExperimentConfig(**{**cfg.to_dict(), "output": str(tmp_path / "b")})
    man2 = run_experiment(cfg2)
    for rel in ("raw/dos.csv", "tables/dos.csv", "summary.json"):
        assert man.files[rel] == man2.files[rel]


def test_worker_count_invariance(tmp_path):
    params = {"N": [60, 80], "alpha": 0.3, "I": [-5, 5]}
    _, m1 = _run(tmp_path, "w1", kind="les-poisson", params=params, trials=30, workers=1)
    _, m3 = _run(tmp_path, "w3", kind="les-poisson", params=params, trials=30, workers=3)
    assert m1.files["raw/les_poisson.csv"] == m3.files["raw/les_poisson.csv"]
    assert m1.summary == m3.summary


def test_trials_seeded_by_derivation_rule(tmp_path):
    from rbmlab.ensemble import BandMatrixParams, sample_band_matrix
    from rbmlab.eigensolver import spectrum

    _run(tmp_path, "s", kind="dos", params={"N": 20, "alpha": [0.3, 0.5]}, trials=2, master_seed=77)
    rows = (tmp_path / "s/raw/dos.csv").read_text().splitlines()[1:]
    first = [float(r.split(",")[2]) for r in rows if r.startswith("1,1,")]
    p = BandMatrixParams.from_alpha(20, 0.5, seed=derive_trial_seed(77, 1, 1))
    assert first == spectrum(sample_band_matrix(p), "auto").eigenvalues.tolist()


def test_grid_expansion_order():
    cfg = ExperimentConfig("block-compare", {"N": [250, 500], "alpha": [0.1, 0.2]}, trials=1)
    pts = cfg.grid()
    assert [(p["N"], p["alpha"]) for p in pts] == [(250, 0.1), (250, 0.2), (500, 0.1), (500, 0.2)]


@pytest.mark.parametrize("kind,params,msg", [
    ("les-poisson", {"N": 1000, "alpha": 0.6, "beta": 0.5}, "alpha < beta"),
    ("block-compare", {"alpha": 0.45, "beta": 0.6, "weak": True, "mu": 1},
     "alpha\\+beta must be < 1 in weak mode"),
    ("dos", {"N": 2, "alpha": 1.0, "periodic": False}, None),
    ("les-poisson", {"E0": 2.5}, "E0"),
    ("intensity", {"nodes": 4}, "coarse"),
    ("localization", {"N": 100, "distances": [0, 200]}, "edges"),
    ("localization", {"s": 1.5}, "s must"),
])
def test_validation_fails_fast(kind, params, msg):
    cfg = ExperimentConfig(kind, params, trials=1)
    if msg is None:
        validate(cfg)  # W = 2N+1 is allowed
        return
    with pytest.raises(ConfigurationError, match=msg):
        validate(cfg)


def test_config_rejects_bad_fields():
    with pytest.raises(ConfigurationError):
        ExperimentConfig("bogus")
    with pytest.raises(ConfigurationError):
        ExperimentConfig("dos", {"nonsense": 1})
    with pytest.raises(ConfigurationError):
        ExperimentConfig("dos", trials=0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"kind": "dos", "extra": 1})


def test_manifest_round_trip(tmp_path):
    cfg, man = _run(tmp_path, "m", kind="gap-ratio", params={"N": 100}, trials=3, master_seed=12)
    loaded = load_manifest(tmp_path / "m")
    assert loaded.to_config() == cfg
    assert loaded.version and "derive_trial_seed" in loaded.seed_rule
    assert set(loaded.timings) >= {"trials_s", "total_s"}
    man2 = rerun_from_manifest(tmp_path / "m", output=tmp_path / "m2")
    assert man2.files["raw/gap_ratio.csv"] == man.files["raw/gap_ratio.csv"]


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig("wegner", {"N": 100, "lengths": [0.1, 1.0]}, trials=2, master_seed=5)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("RBMLAB_WORKERS", "4")
    monkeypatch.setenv("RBMLAB_OUTPUT", "/tmp/elsewhere")
    cfg = apply_env_overrides(ExperimentConfig("dos"))
    assert cfg.workers == 4 and cfg.output == "/tmp/elsewhere"


def test_failed_trial_retried_once(tmp_path, monkeypatch):
    calls = []
    original = montecarlo.KERNELS["gap-ratio"]

    def flaky(p, g, t, seed):
        calls.append(seed)
        if t == 1 and len([c for c in calls if c == seed]) == 1 and seed == derive_trial_seed(3, 0, 1):
            raise NumericalError("no convergence", 0)
        return original(p, g, t, seed)

    monkeypatch.setitem(montecarlo.KERNELS, "gap-ratio", flaky)
    _, man = _run(tmp_path, "r", kind="gap-ratio", params={"N": 60}, trials=4)
    assert man.retried_trials == 1 and man.failed_trials == 0


def test_too_many_failures_abort(tmp_path, monkeypatch):
    def broken(p, g, t, seed):
        raise NumericalError("no convergence", 0)

    monkeypatch.setitem(montecarlo.KERNELS, "gap-ratio", broken)
    with pytest.raises(NumericalError, match="aborting"):
        _run(tmp_path, "x", kind="gap-ratio", params={"N": 60}, trials=4)


def test_output_cleanup_on_io_error(tmp_path, monkeypatch):
    def fail(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(montecarlo, "write_csv", fail)
    with pytest.raises(OSError):
        _run(tmp_path, "io", kind="dos", params={"N": 10}, trials=1)
    assert not (tmp_path / "io").exists()


@pytest.mark.parametrize("kind,params", [
    ("wegner", {"N": 60, "lengths": [0.5, 1.0, 2.0]}),
    ("minami", {"N": 60, "lengths": [0.5, 1.0, 2.0]}),
    ("intensity", {"N": 60, "nodes": 8}),
    ("char-exponent", {"N": 60, "I": [-5, 5]}),
    ("phase-diagram", {"N": 60, "alpha": [0.2, 0.8]}),
    ("block-compare", {"N": [250], "mode": "independent"}),
    ("localization", {"N": 80, "distances": [0, 10, 20, 30, 40, 50, 60]}),
])
def test_every_kind_runs(tmp_path, kind, params):
    trials = 100 if kind == "char-exponent" else 8
    _, man = _run(tmp_path, kind, kind=kind, params=params, trials=trials)
    assert man.summary["points"]
    assert any(f.startswith("figures/") for f in man.files)
