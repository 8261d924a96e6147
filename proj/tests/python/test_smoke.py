import itertools
import json

import numpy as np
import pytest

import divsample as ds


def test_dct_round_trip():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 12))
    c = ds.dct_truncate(x, 12)
    assert c.shape == (6, 12)
    np.testing.assert_allclose(ds.idct_expand(c, 12), x, atol=1e-9)
    assert ds.dct_truncate(x, 4).shape == (6, 4)


def test_metrics_match_numpy():
    rng = np.random.default_rng(1)
    preds = rng.normal(size=(5, 6, 8))
    gt = rng.normal(size=(6, 8))
    pairs = [np.linalg.norm(preds[i] - preds[j]) for i, j in itertools.permutations(range(5), 2)]
    assert ds.apd(preds) == pytest.approx(np.mean(pairs), rel=1e-12)
    per_frame = [np.linalg.norm(p - gt, axis=0) for p in preds]
    assert ds.ade(preds, gt) == pytest.approx(min(f.mean() for f in per_frame), rel=1e-12)
    assert ds.fde(preds, gt) == pytest.approx(min(f[-1] for f in per_frame), rel=1e-12)
    assert len(ds.pca_project(preds)) == 5


def test_coefficients_are_row_stochastic():
    for kind in ("gumbel", "uniform", "gaussian"):
        w = ds.coefficients(kind, 7, 5, tau=0.5, seed=3)
        assert w.shape == (7, 5)
        assert (w >= 0).all()
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(Exception):
        ds.coefficients("nope", 2, 2)


def test_losses():
    preds = np.zeros((3, 2, 4))
    assert ds.hinge_diversity(preds, 2.0) == pytest.approx(2.0)
    assert ds.energy_diversity(preds, 1.0) == pytest.approx(1.0)
    assert ds.kl_regularizer(np.zeros((2, 3)), np.ones((2, 3))) == pytest.approx(0.0)


def test_dataset_and_config():
    cfg = ds.default_synthetic_config()
    cfg.update(n_train=10, n_test=4)
    d = ds.generate_dataset(cfg, 5)
    assert d["train"]["observed"].shape[0] == 10
    assert d["test"]["future"].shape[0] == 4
    assert d["config_hash"] == ds.generate_dataset(cfg, 5)["config_hash"]
    hp = ds.desk_hyperparams()
    ds.validate_hyperparams(hp)
    json.dumps(hp)


def test_cli(tmp_path):
    code, out, err = ds.run_cli(["gen-data", f"--out={tmp_path}", "--n_train=12", "--n_test=4"])
    assert code == 0, err
    assert (tmp_path / "data" / "manifest.json").exists()
    code, _, err = ds.run_cli(["gen-data", f"--out={tmp_path}", "--n_modes=1"])
    assert code != 0 and "n_modes" in err
