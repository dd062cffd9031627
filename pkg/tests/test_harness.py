import csv
import math

import numpy as np
import pytest

from treesense import (CSV_FIELDS, Dictionary, ExperimentConfig, TrainingSet,
                       box_downscale, compare_methods, lambda_for_sparsity,
                       load_corpus, make_tree, read_pgm, snr_db,
                       synthetic_corpus, verify_theorem, write_csv, write_pgm)
from treesense.harness import apply_config, parse_config_file


def test_snr_values():
    x = np.ones(4)
    assert snr_db(x, np.zeros(4)) == pytest.approx(0.0)
    x_hat = x + np.full(4, 0.1)  # error energy = ||x||^2 / 100
    assert snr_db(x, x_hat) == pytest.approx(20.0)
    assert math.isinf(snr_db(x, x))
    with pytest.raises(ValueError):
        snr_db(np.zeros(3), np.ones(3))


def test_pgm_roundtrip(tmp_path, rng):
    img = rng.uniform(0, 1, (12, 16))
    path = tmp_path / "a.pgm"
    write_pgm(path, img)
    back = read_pgm(path)
    assert back.shape == (12, 16)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12


def test_pgm_16bit_and_comments(tmp_path):
    path = tmp_path / "b.pgm"
    pixels = (np.arange(6) * 1000).astype(">u2")
    path.write_bytes(b"P5\n# a comment\n3 2\n65535\n" + pixels.tobytes())
    img = read_pgm(path)
    assert img.shape == (2, 3)
    assert img[0, 1] == pytest.approx(1000 / 65535)


def test_pgm_rejects_malformed(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        read_pgm(p)
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))  # truncated
    with pytest.raises(ValueError):
        read_pgm(p)


def test_box_downscale_is_block_mean(rng):
    img = rng.uniform(0, 1, (8, 8))
    small = box_downscale(img, 4)
    assert small[0, 0] == pytest.approx(img[:2, :2].mean())
    assert small[3, 2] == pytest.approx(img[6:8, 4:6].mean())
    with pytest.raises(ValueError):
        box_downscale(img, 3)


def test_load_corpus(tmp_path, rng):
    for i in range(5):
        write_pgm(tmp_path / f"im{i}.pgm", rng.uniform(0, 1, (16, 16)))
    tr = load_corpus(tmp_path, 8)
    assert tr.data.shape == (64, 5)
    assert np.max(np.abs(tr.data.sum(axis=1))) < 1e-9


def test_load_corpus_empty_dir(tmp_path):
    with pytest.raises(ValueError):
        load_corpus(tmp_path, 8)


def test_load_corpus_constant_image(tmp_path):
    write_pgm(tmp_path / "c.pgm", np.full((8, 8), 0.5))
    tr = load_corpus(tmp_path, 8)
    assert np.allclose(tr.data, 0.0)


def test_config_file_parsing(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("d = 3\nk = 3,7   # two cells\ntrials=50\nnoise_std=0.5\n")
    cfg = apply_config(ExperimentConfig(), parse_config_file(cfg_file))
    assert cfg.d == 3 and cfg.k == (3, 7) and cfg.trials == 50
    assert cfg.noise_std == 0.5


def test_verify_theorem_noiseless_cells():
    cfg = ExperimentConfig(d=2, L=5, k=(3, 5), noise_std=0.0, trials=50, seed=1)
    rows, summaries = verify_theorem(cfg)
    assert len(rows) == 100  # one row per (cell, trial)
    for r in rows:
        k = int(r["note"].split("=")[1])
        assert r["m"] == 2 * k + 1
        assert r["support_exact"] == 1
    assert len(summaries) == 2


def test_csv_schema_and_determinism(tmp_path):
    cfg = ExperimentConfig(d=2, L=4, k=(3,), trials=30, seed=5,
                           out=str(tmp_path / "r1.csv"))
    rows, _ = verify_theorem(cfg)
    write_csv(cfg.out, rows)
    cfg2 = ExperimentConfig(d=2, L=4, k=(3,), trials=30, seed=5, workers=4,
                            out=str(tmp_path / "r2.csv"))
    rows2, _ = verify_theorem(cfg2)
    write_csv(cfg2.out, rows2)
    assert (tmp_path / "r1.csv").read_bytes() == (tmp_path / "r2.csv").read_bytes()

    with open(cfg.out) as f:
        parsed = list(csv.DictReader(f))
    assert list(parsed[0].keys()) == CSV_FIELDS
    for row in parsed:
        assert float(row["energy_spent"]) <= float(row["R"]) * (1 + 1e-9)
        assert row["support_exact"] in ("0", "1")


def test_synthetic_corpus_shapes(rng):
    tree = make_tree(2, 5)
    X, planted, A = synthetic_corpus(12, 16, tree, 8, rng)
    assert X.shape == (256, 12)
    assert planted.atoms.shape == (256, 31)
    for i in range(12):
        from treesense import is_tree_sparse
        assert is_tree_sparse(A[:, i], tree)


def test_lambda_for_sparsity_targets(rng):
    tree = make_tree(2, 4)
    X, planted, _ = synthetic_corpus(60, 8, tree, 10, rng)
    tr = TrainingSet.from_raw(X)
    lam = lambda_for_sparsity(tr, planted, tree, target_k=6)
    from treesense import LearnConfig, groups_of, sparse_code
    A = sparse_code(tr, planted, groups_of(tree),
                    LearnConfig(lam=lam, outer_iters=1))
    mean_k = np.mean(np.sum(np.abs(A) > 1e-12, axis=0))
    assert 3 <= mean_k <= 10


def test_compare_methods_schema_and_energy(rng):
    tree = make_tree(2, 5)
    X, planted, _ = synthetic_corpus(30, 16, tree, 8, rng, amp=1.0)
    tr = TrainingSet.from_raw(X)
    cfg = ExperimentConfig(mode="compare", budgets=(256.0,), taus=(0.0, 0.5),
                           measurements=(8, 16), trials=2, seed=3,
                           test_signals=1, target_sparsity=8)
    rows = compare_methods(cfg, training=tr, dictionary=planted,
                           dict_mean=np.full(256, 0.5),
                           test_matrix=tr.data[:, :1] + tr.mean[:, None])
    methods = {r["method"] for r in rows}
    assert methods == {"adaptive", "pca", "lasso", "model-cosamp", "wavelet"}
    for r in rows:
        if r["energy_spent"] not in (None, ""):
            assert r["energy_spent"] <= r["R"] * (1 + 1e-9)


def test_compare_methods_requires_dictionary():
    cfg = ExperimentConfig(mode="compare", budgets=(16.0,))
    with pytest.raises(ValueError):
        compare_methods(cfg)


def test_compare_rejects_dimension_mismatch(rng):
    tree = make_tree(2, 3)
    Q, _ = np.linalg.qr(rng.standard_normal((16, tree.p)))
    d = Dictionary(atoms=Q, tree=tree)
    tr = TrainingSet.from_raw(rng.standard_normal((25, 4)))
    cfg = ExperimentConfig(mode="compare", budgets=(16.0,))
    with pytest.raises(ValueError):
        compare_methods(cfg, training=tr, dictionary=d)
