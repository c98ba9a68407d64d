"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.  The end-to-end criteria run on the seeded
synthetic corpus produced by the `synth` subcommand, so no external audio
is needed.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest
from conftest import (
    coupled_triad,
    eq6_bicoherence,
    network_grad_check,
    two_pass_moments,
)

from voxstats import classical, crnn, features
from voxstats.bispectral import (
    bicoherence_average,
    minmax_normalize,
    segment_signal,
)
from voxstats.cepstral import dct_ii
from voxstats.cli import load_run_report, main
from voxstats.config import CrnnConfig
from voxstats.spectral import dft


@contextmanager
def criterion(num, title):
    started = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[acceptance] criterion {num:02d} FAIL: {title}", flush=True)
        raise
    elapsed = time.perf_counter() - started
    print(
        f"[acceptance] criterion {num:02d} PASS ({elapsed:.1f}s): {title}",
        flush=True,
    )


# ---------------------------------------------------------------------------
# Shared synthetic corpus (built once, timed for criterion 6)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    """400-clip seeded corpus -> feature CSV, via the CLI surface."""
    root = tmp_path_factory.mktemp("acceptance")
    audio_dir = root / "audio"
    csv_path = root / "features.csv"
    started = time.perf_counter()
    assert main(["synth", "--out", str(audio_dir), "--count", "400",
                 "--seed", "0"]) == 0
    assert main(["extract", "--manifest", str(audio_dir / "manifest.csv"),
                 "--out", str(csv_path)]) == 0
    elapsed = time.perf_counter() - started
    table, _, _ = features.FeatureTable.from_csv(csv_path)
    return {"dir": root, "audio": audio_dir, "csv": csv_path,
            "table": table, "build_s": elapsed}


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def test_criterion_01_transform_oracles(rng):
    with criterion(1, "fast DFT/DCT match naive quadratic oracles (1e-9)"):
        started = time.perf_counter()
        sizes = rng.integers(4, 1025, size=200)
        for n in sizes:
            x = rng.normal(size=int(n))
            k = np.arange(n)[:, None]
            t = np.arange(n)[None, :]
            oracle = np.exp(-2j * np.pi * k * t / n) @ x
            np.testing.assert_allclose(dft(x).bins, oracle, atol=1e-9)
        for n in rng.integers(4, 1025, size=200):
            x = rng.normal(size=int(n))
            k = np.arange(n)[:, None]
            m = np.arange(n)[None, :]
            mat = np.cos(np.pi * k * (m + 0.5) / n)
            mat[0] *= np.sqrt(1.0 / n)
            mat[1:] *= np.sqrt(2.0 / n)
            np.testing.assert_allclose(dct_ii(x), mat @ x, atol=1e-9)
        assert time.perf_counter() - started < 30.0


def test_criterion_02_bicoherence_discrimination():
    with criterion(2, "coupled triad >= 0.9, noise < 0.3 (50 trials each)"):
        started = time.perf_counter()
        k, seg_len, m1, m2 = 100, 128, 5, 9
        coupled_vals = []
        noise_vals = []
        for trial in range(50):
            rng = np.random.default_rng(1000 + trial)
            segs = coupled_triad(k, seg_len, m1, m2,
                                 rng.uniform(0, 2 * np.pi),
                                 rng.uniform(0, 2 * np.pi))
            b = eq6_bicoherence(segs, 32)
            assert b[m1, m2] >= 0.9, f"trial {trial}: coupled {b[m1, m2]:.3f}"
            coupled_vals.append(b[m1, m2])
            noise = np.random.default_rng(2000 + trial).normal(
                size=k * seg_len
            )
            bn = eq6_bicoherence(noise.reshape(k, seg_len), 32)
            assert bn[m1, m2] < 0.3, f"trial {trial}: noise {bn[m1, m2]:.3f}"
            noise_vals.append(bn[m1, m2])
        assert np.mean(coupled_vals) - np.mean(noise_vals) >= 0.5
        assert time.perf_counter() - started < 60.0


def test_criterion_03_pipeline_invariants(rng):
    with criterion(3, "scaling invariance, symmetry, [0,1] outputs (100 signals)"):
        k, grid = 50, 16
        for _ in range(100):
            x = rng.normal(size=k * 64)
            segs = segment_signal(x, k)
            base = bicoherence_average(segs, grid)
            scaled = bicoherence_average(segment_signal(2.0 * x, k), grid)
            for plane in ("magnitude", "phase"):
                a = minmax_normalize(getattr(base, plane))
                b = minmax_normalize(getattr(scaled, plane))
                assert np.abs(a - b).max() <= 1e-9
                assert a.min() >= 0.0 and a.max() <= 1.0
                np.testing.assert_allclose(a, a.T, atol=1e-9)


def test_criterion_04_moments(rng):
    with criterion(4, "moment oracle 1e-12, affine invariance 1e-9, sigma=0 rule"):
        for n in (3, 100, 10_000, 100_000):
            x = rng.normal(size=n)
            got = features.moments(x)
            want = two_pass_moments(x)
            for g, w in zip(got.as_tuple(), want):
                assert abs(g - w) <= 1e-12 * max(1.0, abs(w))
        x = rng.normal(size=2000)
        base = features.moments(x)
        for a, b in ((3.0, 1.0), (-0.5, -7.0)):
            m = features.moments(a * x + b)
            assert abs(m.skewness - np.sign(a) ** 3 * base.skewness) <= 1e-9
            assert abs(m.kurtosis - base.kurtosis) <= 1e-9
        degenerate = features.moments(np.full(10, 4.2))
        assert degenerate.variance == 0.0
        assert degenerate.skewness == 0.0 and degenerate.kurtosis == 0.0


def test_criterion_05_feature_dimensionality(corpus):
    with criterion(5, "every admitted clip yields 14 numbers + 1 label"):
        lines = [
            line for line in corpus["csv"].read_text().splitlines()
            if line and not line.startswith("#")
        ]
        header, rows = lines[0], lines[1:]
        assert len(rows) == 400
        assert len(header.split(",")) == 15
        for row in rows:
            fields = row.split(",")
            assert len(fields) == 15
            values = np.array([float(v) for v in fields[:-1]])
            assert values.shape == (14,)
            assert np.isfinite(values).all()
            assert fields[-1] in ("Human", "SpikAI")


def test_criterion_06_end_to_end_classification(corpus, tmp_path):
    with criterion(6, "5-fold CV, rus_boosted_trees, 400 clips, >= 95%"):
        started = time.perf_counter()
        model_path = tmp_path / "acceptance-model.json"
        rc = main(["train", "--features", str(corpus["csv"]),
                   "--algo", "rus_boosted_trees", "--scenario", "binary",
                   "--kfold", "5", "--seed", "0", "--out", str(model_path)])
        assert rc == 0
        report = load_run_report(str(model_path) + ".report.json")
        accuracy = report["metrics"]["accuracy"]
        total = corpus["build_s"] + (time.perf_counter() - started)
        assert accuracy >= 0.95, f"cv accuracy {accuracy:.4f}"
        assert total < 300.0, f"end-to-end took {total:.0f}s"


def test_criterion_07_metric_arithmetic():
    with criterion(7, "precision/recall/F1 arithmetic and zero conventions"):
        value = classical.f1_score(0.9, 0.95)
        assert abs(value - 1.71 / 1.85) <= 1e-9
        assert round(value, 5) == 0.92432
        cm = classical.ConfusionMatrix(np.diag([4, 6]), ("a", "b"))
        report = classical.metrics(cm)
        assert report.accuracy == 1.0 and report.macro_f1 == 1.0
        zero = classical.ConfusionMatrix(np.array([[0, 2], [3, 5]]), ("p", "n"))
        z = classical.metrics(zero, positive_class="p")
        assert z.precision == 0.0 and z.recall == 0.0 and z.f1 == 0.0
        assert classical.f1_score(0.0, 0.0) == 0.0


def test_criterion_08_cv_contract():
    with criterion(8, "fold partitioning, balance, stratification, determinism"):
        folds = classical.kfold_split(103, 5, seed=7)
        sizes = [len(f) for f in folds]
        assert max(sizes) - min(sizes) <= 1
        np.testing.assert_array_equal(
            np.sort(np.concatenate(folds)), np.arange(103)
        )
        again = classical.kfold_split(103, 5, seed=7)
        for a, b in zip(folds, again):
            np.testing.assert_array_equal(a, b)

        labels = ["Human"] * 41 + ["SpikAI"] * 26 + ["Replica"] * 13
        strat = classical.stratified_kfold(labels, 5, seed=3)
        np.testing.assert_array_equal(
            np.sort(np.concatenate(strat)), np.arange(80)
        )
        assert max(len(f) for f in strat) - min(len(f) for f in strat) <= 1
        arr = np.array(labels)
        for cls in ("Human", "SpikAI", "Replica"):
            per_fold = [int((arr[f] == cls).sum()) for f in strat]
            assert max(per_fold) - min(per_fold) <= 1
        again = classical.stratified_kfold(labels, 5, seed=3)
        for a, b in zip(strat, again):
            np.testing.assert_array_equal(a, b)


def test_criterion_09_gradient_checks(rng):
    from test_crnn_layers import check_layer_gradients, build
    from test_crnn_network import narrow_stack
    from voxstats.crnn import layers as L

    with criterion(9, "finite-difference gradients, every layer + full stack"):
        started = time.perf_counter()
        check_layer_gradients(build(L.Conv2D(4, 3), (6, 6, 3)),
                              rng.normal(size=(2, 6, 6, 3)))
        check_layer_gradients(build(L.Dense(5), (7,)), rng.normal(size=(2, 7)))
        check_layer_gradients(build(L.BiLSTM(4), (5, 3)),
                              rng.normal(size=(2, 5, 3)))
        check_layer_gradients(build(L.MaxPool2(), (6, 6, 2)),
                              rng.normal(size=(2, 6, 6, 2)))
        check_layer_gradients(L.Dropout(0.4), rng.normal(size=(2, 5, 5, 1)),
                              train=True, seed=3)
        check_layer_gradients(L.Normalize(), rng.normal(size=(2, 4, 4, 1)))
        check_layer_gradients(L.SqueezeToSequence(),
                              rng.normal(size=(2, 3, 4, 2)))
        check_layer_gradients(L.Flatten(), rng.normal(size=(2, 3, 4)))
        check_layer_gradients(L.Resize(4, 4), rng.normal(size=(2, 8, 8, 1)))

        x = rng.uniform(0.0, 1.0, size=(2, 32, 32, 1))
        y = np.array([0, 1])
        net = narrow_stack(seed=3)
        worst, checked, _ = network_grad_check(net, x, y, seed=77)
        assert checked == net.parameter_count()
        assert worst < 1e-4, f"narrow stack: {worst:.3e}"

        full = crnn.build_crnn32(2, CrnnConfig(), seed=5)
        worst, checked, refined = network_grad_check(
            full, x, y, seed=99, sample_per_tensor=5
        )
        assert worst < 1e-4, f"default stack: {worst:.3e} over {checked}"
        assert time.perf_counter() - started < 120.0


def _toy_images(seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(16):
        images.append(np.full((32, 32, 1), rng.uniform(0.2, 0.9)))
        labels.append(0)
    for i in range(16):
        board = ((np.indices((32, 32)).sum(axis=0) + i) % 2).astype(float)
        images.append(board[:, :, None] * rng.uniform(0.5, 1.0))
        labels.append(1)
    return np.stack(images), np.array(labels)


def test_criterion_10_crnn_capacity():
    with criterion(10, "toy overfit to 100% within 200 epochs, shape chain"):
        started = time.perf_counter()
        cfg = CrnnConfig(conv3_channels=8, lstm_hidden=(16, 16),
                         dense_units=32, dropout=(0.0, 0.0), epochs=12,
                         batch_size=8, learning_rate=1e-3)
        x, y = _toy_images()
        digests = []
        for _ in range(2):
            net = crnn.build_crnn32(2, cfg, seed=7)
            assert net.shapes[0] == (32, 32, 1)
            assert net.shapes[3] == (30, 30, 32)
            assert net.shapes[4] == (28, 28, 64)
            assert net.shapes[5] == (14, 14, 64)
            assert net.shapes[7] == (12, 12, cfg.conv3_channels)
            assert net.shapes[8][0] == 12  # 12-step sequence
            assert net.shapes[-1][0] in (2, 4)
            _, history, _ = crnn.train(net, x, y, cfg, seed=7)
            assert cfg.epochs <= 200
            assert any(h["train_acc"] == 1.0 for h in history), history[-1]
            import hashlib

            h = hashlib.sha256()
            for _, _, value in net.parameters():
                h.update(value.tobytes())
            digests.append(h.hexdigest())
        assert digests[0] == digests[1]
        assert time.perf_counter() - started < 180.0


def test_criterion_11_persistence_roundtrips(corpus, tmp_path):
    with criterion(11, "feature CSV, classical model and network round-trips"):
        # Feature CSV: reload must reproduce the matrix bit for bit.
        table = corpus["table"]
        probe_idx = np.arange(0, 400, 20)  # 20-clip probe set
        reread, _, _ = features.FeatureTable.from_csv(corpus["csv"])
        np.testing.assert_array_equal(
            reread.full_matrix(), table.full_matrix()
        )

        # Classical model: identical scores on the probe set after reload.
        spec = classical.AlgoSpec("rus_boosted_trees", params={"rounds": 10},
                                  seed=1)
        model = classical.train_classifier(table, spec, "binary",
                                           config_hash="r1")
        model_path = tmp_path / "model.json"
        classical.save_model(model, model_path)
        again = classical.load_model(model_path)
        probe = table.matrix()[probe_idx]
        s1, l1 = model.predict_batch(probe)
        s2, l2 = again.predict_batch(probe)
        np.testing.assert_array_equal(s1, s2)
        assert l1 == l2

        # Network: bit-identical logits on 20 images after reload.
        cfg = CrnnConfig(conv3_channels=4, lstm_hidden=(8, 8), dense_units=16)
        net = crnn.build_crnn32(2, cfg, seed=4, classes=["Human", "Synthetic"])
        rng = np.random.default_rng(8)
        images = rng.uniform(size=(20, 32, 32, 1))
        net_path = tmp_path / "net.bin"
        crnn.save_network(net, net_path)
        loaded = crnn.load_network(net_path)
        a, _ = crnn.forward(net, images)
        b, _ = crnn.forward(loaded, images)
        np.testing.assert_array_equal(a, b)
