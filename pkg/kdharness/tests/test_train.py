import math

import numpy as np
import pytest
import torch
from torch.nn import functional as F

from kdharness import (
    TeacherOracle,
    TrainRunConfig,
    build_model,
    cache_teacher_labels,
    distill_student,
    export_embeddings,
    make_noise_images,
    per_sample_l1,
    train_primer,
)
from kdharness.io import read_dipe


def small_cfg(**overrides):
    base = dict(
        dataset_manifest="", teacher_checkpoint="", mode="hard_only",
        arch="lenet5", num_classes=10, epochs=2, batch_size=8, lr=1e-3, seed=0,
    )
    base.update(overrides)
    return TrainRunConfig(**base)


@pytest.fixture(scope="module")
def teacher_oracle():
    torch.manual_seed(42)
    return TeacherOracle(build_model("lenet5", 10, 1))


class TestTrainRunConfig:
    def test_round_trips_exactly(self):
        cfg = small_cfg(lr=0.00125, l1_weight=0.5, warm_start=True)
        assert TrainRunConfig.from_dict(cfg.to_dict()) == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            small_cfg(mode="imaginary")
        with pytest.raises(ValueError):
            small_cfg(epochs=0)
        with pytest.raises(ValueError):
            small_cfg(lr=0.0)
        with pytest.raises(ValueError):
            small_cfg(schedule="step")


class TestLossPieces:
    def test_initial_ce_is_log_k(self):
        torch.manual_seed(0)
        model = build_model("lenet5", 10, 1)
        x = torch.rand(64, 1, 28, 28, generator=torch.Generator().manual_seed(1))
        y = torch.randint(0, 10, (64,), generator=torch.Generator().manual_seed(2))
        with torch.no_grad():
            ce = float(F.cross_entropy(model(x), y))
        assert abs(ce - math.log(10)) < 0.1

    def test_l1_of_constant_shift_is_c_times_k(self):
        z = torch.randn(5, 10, generator=torch.Generator().manual_seed(3))
        for c in (0.5, -1.25, 3.0):
            values = per_sample_l1(z + c, z)
            assert torch.allclose(values, torch.full((5,), abs(c) * 10), atol=1e-5)

    def test_warm_started_copy_has_zero_l1_at_step_zero(self, teacher_oracle):
        torch.manual_seed(4)
        primer = build_model("lenet5", 10, 1).eval()
        student = build_model("lenet5", 10, 1)
        student.load_state_dict(primer.state_dict())
        x = torch.rand(8, 1, 28, 28, generator=torch.Generator().manual_seed(5))
        with torch.no_grad():
            labels = primer(x).argmax(dim=1)
            logits = student(x)
            l1 = per_sample_l1(logits, primer(x)).mean()
            total = F.cross_entropy(logits, labels) + l1
        assert float(l1) == 0.0
        assert float(total) == pytest.approx(float(F.cross_entropy(logits, labels)), abs=1e-6)


class TestTrainPrimer:
    def test_memorizes_single_image(self, teacher_oracle):
        images = torch.rand(1, 1, 28, 28, generator=torch.Generator().manual_seed(6))
        cfg = small_cfg(epochs=150, batch_size=1, schedule="constant")
        model, curves, labels = train_primer(cfg, teacher_oracle, images)
        with torch.no_grad():
            ce = float(F.cross_entropy(model(images), labels))
        assert ce < 0.01

    def test_labels_cached_once(self):
        torch.manual_seed(7)
        oracle = TeacherOracle(build_model("lenet5", 10, 1))
        images = torch.rand(24, 1, 28, 28, generator=torch.Generator().manual_seed(8))
        cfg = small_cfg(epochs=3)
        train_primer(cfg, oracle, images)
        assert oracle.query_count == 24  # one query per image despite 3 epochs

    def test_mode_gate(self, teacher_oracle):
        images = torch.rand(4, 1, 28, 28)
        with pytest.raises(ValueError):
            train_primer(small_cfg(mode="full"), teacher_oracle, images)

    def test_naive_noise_runs_on_noise_images(self, teacher_oracle):
        noise = make_noise_images(16, 1, 28, 28, seed=0)
        cfg = small_cfg(mode="naive_noise", epochs=1)
        model, curves, _ = train_primer(cfg, teacher_oracle, noise)
        assert len(curves) == 1

    def test_seeded_determinism(self, teacher_oracle):
        images = torch.rand(16, 1, 28, 28, generator=torch.Generator().manual_seed(9))
        cfg = small_cfg(epochs=2)
        m1, c1, _ = train_primer(cfg, teacher_oracle, images)
        m2, c2, _ = train_primer(cfg, teacher_oracle, images)
        assert c1 == c2
        for p1, p2 in zip(m1.parameters(), m2.parameters()):
            assert torch.equal(p1, p2)


class TestDistill:
    def test_loss_decomposition_readdable(self, teacher_oracle):
        images = torch.rand(32, 1, 28, 28, generator=torch.Generator().manual_seed(10))
        primer, _, labels = train_primer(small_cfg(epochs=1), teacher_oracle, images)
        student, curves, _ = distill_student(
            small_cfg(mode="full", epochs=2), teacher_oracle, primer, images, labels
        )
        for entry in curves:
            assert entry["total"] == pytest.approx(entry["ce"] + entry["l1"], abs=1e-6)
            assert entry["l1"] >= 0.0

    def test_primer_stays_frozen(self, teacher_oracle):
        images = torch.rand(16, 1, 28, 28, generator=torch.Generator().manual_seed(11))
        primer, _, labels = train_primer(small_cfg(epochs=1), teacher_oracle, images)
        before = [p.clone() for p in primer.parameters()]
        distill_student(small_cfg(mode="full", epochs=1), teacher_oracle, primer, images, labels)
        for old, new in zip(before, primer.parameters()):
            assert torch.equal(old, new)

    def test_l1_weight_scales_logged_term(self, teacher_oracle):
        images = torch.rand(16, 1, 28, 28, generator=torch.Generator().manual_seed(12))
        primer, _, labels = train_primer(small_cfg(epochs=1), teacher_oracle, images)
        _, curves, _ = distill_student(
            small_cfg(mode="full", epochs=1, l1_weight=2.0), teacher_oracle, primer, images, labels
        )
        entry = curves[0]
        assert entry["total"] == pytest.approx(entry["ce"] + 2.0 * entry["l1"], abs=1e-6)


class TestExportEmbeddings:
    def test_shape_and_determinism(self, teacher_oracle, tmp_path):
        torch.manual_seed(13)
        model = build_model("lenet5", 10, 1).eval()
        images = torch.rand(10, 1, 28, 28, generator=torch.Generator().manual_seed(14))
        path_a, path_b = tmp_path / "a.dipe", tmp_path / "b.dipe"
        export_embeddings(model, images, path_a, batch_size=4)
        export_embeddings(model, images, path_b, batch_size=4)
        a, b = read_dipe(path_a), read_dipe(path_b)
        assert a.shape == (10, model.feature_dim)
        assert np.array_equal(a, b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_trained_and_untrained_models_differ(self, teacher_oracle, tmp_path):
        images = torch.rand(8, 1, 28, 28, generator=torch.Generator().manual_seed(15))
        torch.manual_seed(16)
        fresh = build_model("lenet5", 10, 1).eval()
        trained, _, _ = train_primer(small_cfg(epochs=2), teacher_oracle, images)
        export_embeddings(fresh, images, tmp_path / "fresh.dipe")
        export_embeddings(trained, images, tmp_path / "trained.dipe")
        assert (tmp_path / "fresh.dipe").read_bytes() != (tmp_path / "trained.dipe").read_bytes()


class _QueryOnlyOracle:
    """Bare oracle stub: exactly the one-method interface, nothing else."""

    def __init__(self):
        self.query_count = 0

    def query(self, batch):
        self.query_count += batch.shape[0]
        return (batch.flatten(1).sum(dim=1) * 997).long() % 10


def test_training_needs_only_the_query_method(tmp_path):
    # Black-box seal at the trainer level: both phases complete against an
    # object whose whole surface is query()/query_count.
    oracle = _QueryOnlyOracle()
    images = torch.rand(16, 1, 28, 28, generator=torch.Generator().manual_seed(17))
    primer, _, labels = train_primer(small_cfg(epochs=1), oracle, images)
    distill_student(small_cfg(mode="full", epochs=1), oracle, primer, images, labels)
    assert oracle.query_count == 16


def test_noise_images_deterministic_and_in_range():
    a = make_noise_images(5, 3, 8, 8, seed=3)
    b = make_noise_images(5, 3, 8, 8, seed=3)
    c = make_noise_images(5, 3, 8, 8, seed=4)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)
    assert a.min() >= 0.0 and a.max() <= 1.0
