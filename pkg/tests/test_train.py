import csv
import os

import numpy as np
import pytest

from vssd.tensor import Rng, Tensor
from vssd.model import ModelConfig, StageSpec, VssdModel
from vssd.train import (
    METRIC_COLUMNS,
    AdamW,
    DataFormatError,
    Dataset,
    TrainConfig,
    accuracy,
    cosine_schedule,
    encode_cifar10_records,
    label_smoothing_ce,
    load_cifar10_binary,
    parse_cifar10_records,
    standardize,
    synthetic_dataset,
    train_loop,
)
from vssd.train.loop import evaluate
from vssd.train.optim import Ema, no_decay_param


def small_model(seed=0, num_classes=4):
    cfg = ModelConfig(
        stages=[StageSpec(1, 8, 2, state_dim=4), StageSpec(1, 16, 2, state_dim=4)],
        num_classes=num_classes,
    )
    return VssdModel(cfg, Rng(seed), dtype=np.float32)


class TestData:
    def _fake_cifar_dir(self, tmp_path, seed=0):
        rng = Rng(seed)
        for fname, n in [(f"data_batch_{i}.bin", 10000) for i in range(1, 6)] + [
            ("test_batch.bin", 10000)
        ]:
            px = rng.integers(0, 256, (n, 3, 32, 32)).astype(np.uint8)
            y = rng.integers(0, 10, (n,)).astype(np.uint8)
            (tmp_path / fname).write_bytes(encode_cifar10_records(px, y))
        return tmp_path

    def test_record_roundtrip(self):
        rng = Rng(1)
        px = rng.integers(0, 256, (7, 3, 32, 32)).astype(np.uint8)
        y = rng.integers(0, 10, (7,)).astype(np.uint8)
        px2, y2 = parse_cifar10_records(encode_cifar10_records(px, y))
        assert np.array_equal(px, px2) and np.array_equal(y, y2)

    def test_bad_byte_count(self):
        with pytest.raises(DataFormatError, match="bytes"):
            parse_cifar10_records(b"\x00" * 3000)

    def test_loader_shapes(self, tmp_path):
        d = self._fake_cifar_dir(tmp_path)
        train, test = load_cifar10_binary(d)
        assert train.images.shape == (50000, 3, 32, 32)
        assert test.images.shape == (10000, 3, 32, 32)
        assert train.num_classes == 10

    def test_truncated_file_rejected(self, tmp_path):
        d = self._fake_cifar_dir(tmp_path)
        blob = (d / "test_batch.bin").read_bytes()
        (d / "test_batch.bin").write_bytes(blob[:-100])
        with pytest.raises(DataFormatError, match="test_batch"):
            load_cifar10_binary(d)

    def test_standardize_inverts_stats(self):
        rng = Rng(2)
        px = rng.integers(0, 256, (64, 3, 8, 8)).astype(np.uint8)
        x = standardize(px)
        assert x.dtype == np.float32
        assert np.abs(x).max() < 5.0

    def test_synthetic_template_seed_shares_classes(self):
        a = synthetic_dataset(16, seed=1, template_seed=9, noise=0.0)
        b = synthetic_dataset(16, seed=2, template_seed=9, noise=0.0)
        ia = a.images[a.labels == a.labels[0]][0]
        ib = b.images[b.labels == a.labels[0]][0]
        assert np.array_equal(ia, ib)


class TestLossOptim:
    def test_ce_matches_manual(self):
        logits = Rng(3).normal((4, 5))
        labels = np.array([0, 2, 4, 1])
        eps = 0.1
        got = label_smoothing_ce(Tensor(logits), labels, eps).item()
        logp = logits - np.log(np.exp(logits).sum(-1, keepdims=True))
        tgt = np.full((4, 5), eps / 5)
        tgt[np.arange(4), labels] += 1 - eps
        want = -(tgt * logp).sum() / 4
        assert abs(got - want) < 1e-12

    def test_accuracy(self):
        logits = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 2.0]])
        assert accuracy(logits, [0, 1, 1]) == pytest.approx(2 / 3)

    def test_adamw_matches_reference_step(self):
        # single-parameter oracle: one Adam step with decoupled decay
        p = Tensor(np.array([[1.0, -2.0]]), requires_grad=True)
        opt = AdamW({"weight": p}, lr=0.1, betas=(0.9, 0.999), weight_decay=0.05)
        (p * p).sum().backward()
        g = np.array([[2.0, -4.0]])
        opt.step()
        m = 0.1 * g
        v = 0.001 * g * g
        mhat = m / (1 - 0.9)
        vhat = v / (1 - 0.999)
        want = np.array([[1.0, -2.0]]) * (1 - 0.1 * 0.05) - 0.1 * mhat / (np.sqrt(vhat) + 1e-8)
        assert np.allclose(p.data, want, atol=1e-12)

    def test_no_decay_rules(self):
        assert no_decay_param("stem.norm1.gamma", Tensor(np.ones(4)))
        assert no_decay_param("head.bias", Tensor(np.ones(4)))
        assert no_decay_param("mixer.a_log", Tensor(np.ones(4)))
        assert not no_decay_param("head.weight", Tensor(np.ones((4, 4))))

    def test_cosine_schedule(self):
        assert cosine_schedule(0, 100, 10, 1.0) == 0.0
        assert cosine_schedule(10, 100, 10, 1.0) == pytest.approx(1.0)
        assert cosine_schedule(100, 100, 10, 1.0) == pytest.approx(0.0, abs=1e-12)
        mid = cosine_schedule(55, 100, 10, 1.0)
        assert 0.4 < mid < 0.6

    def test_ema_tracks(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        ema = Ema({"w": p}, 0.5)
        p.data[:] = 3.0
        ema.update({"w": p})
        assert np.allclose(ema.shadow["w"], 2.0)


class TestLoop:
    def _datasets(self):
        train = synthetic_dataset(96, image_size=16, num_classes=4, seed=1, template_seed=7)
        val = synthetic_dataset(32, image_size=16, num_classes=4, seed=2, template_seed=7)
        return train, val

    def _config(self, **kw):
        base = dict(epochs=2, warmup_epochs=1, batch_size=32, peak_lr=1e-3,
                    weight_decay=0.01, label_smoothing=0.0, seed=3,
                    augment_flip=False, drop_path_rate=0.0)
        base.update(kw)
        return TrainConfig(**base)

    def test_loss_decreases_and_learns(self):
        train, val = self._datasets()
        model = small_model()
        res = train_loop(model, self._config(epochs=3), train, val, log=lambda *a: None)
        assert res.status == "ok"
        assert res.history[-1]["train_loss"] < res.history[0]["train_loss"]
        assert res.final_val_acc > 0.5

    def test_deterministic(self):
        train, val = self._datasets()
        r1 = train_loop(small_model(), self._config(), train, val, log=lambda *a: None)
        r2 = train_loop(small_model(), self._config(), train, val, log=lambda *a: None)
        assert [h["train_loss"] for h in r1.history] == [h["train_loss"] for h in r2.history]

    def test_metrics_csv_schema(self, tmp_path):
        train, val = self._datasets()
        out = tmp_path / "run"
        train_loop(small_model(), self._config(), train, val, out_dir=str(out),
                   log=lambda *a: None)
        with open(out / "metrics.csv") as f:
            rows = list(csv.reader(f))
        assert rows[0] == METRIC_COLUMNS
        assert len(rows) == 3
        assert os.path.isdir(out / "ckpt_final")

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_recorded_not_raised(self):
        train, val = self._datasets()
        res = train_loop(small_model(), self._config(peak_lr=1e4), train, val,
                         log=lambda *a: None)
        assert res.status == "diverged"
        assert res.divergence_epoch is not None

    def test_class_count_mismatch(self):
        train, val = self._datasets()
        with pytest.raises(Exception):
            train_loop(small_model(num_classes=7), self._config(), train, val,
                       log=lambda *a: None)

    def test_config_validation(self):
        with pytest.raises(Exception):
            TrainConfig(epochs=2, warmup_epochs=2)
        with pytest.raises(Exception):
            TrainConfig(peak_lr=-1.0)

    def test_config_json_roundtrip(self):
        tc = self._config(ema_decay=0.999)
        back = TrainConfig.from_json(tc.to_json())
        assert back == tc

    def test_evaluate_counts_correct(self):
        train, _ = self._datasets()
        model = small_model()
        acc = evaluate(model, Dataset(train.images[:8], train.labels[:8], 4))
        assert 0.0 <= acc <= 1.0
