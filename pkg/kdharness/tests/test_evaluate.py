import numpy as np
import torch

from kdharness import EvalReport, evaluate
from kdharness.data import LabeledData
from kdharness.evaluate import plot_budget_sweep, plot_training_curves, write_report


class _OneHotFromLabel(torch.nn.Module):
    """Predicts exactly the label encoded in the first pixel."""

    def forward(self, x):
        classes = (x[:, 0, 0, 0] * 10).long().clamp(0, 9)
        return torch.nn.functional.one_hot(classes, 10).float()


class _Constant(torch.nn.Module):
    def forward(self, x):
        logits = torch.zeros(x.shape[0], 10)
        logits[:, 0] = 1.0
        return logits


def balanced_data(per_class=5):
    labels = torch.arange(10).repeat_interleave(per_class)
    images = torch.zeros(len(labels), 1, 4, 4)
    images[:, 0, 0, 0] = labels.float() / 10 + 0.05
    return LabeledData(images, labels, 10)


def test_perfect_predictor_scores_100():
    report = evaluate(_OneHotFromLabel(), balanced_data())
    assert report.accuracy == 1.0
    assert report.per_class_accuracy == [1.0] * 10
    assert np.trace(np.array(report.confusion)) == report.n


def test_constant_predictor_on_balanced_set_scores_10():
    report = evaluate(_Constant(), balanced_data())
    assert report.accuracy == 0.1
    assert report.per_class_accuracy[0] == 1.0
    assert sum(report.per_class_accuracy[1:]) == 0.0


def test_confusion_rows_sum_to_class_counts():
    report = evaluate(_Constant(), balanced_data(per_class=3))
    confusion = np.array(report.confusion)
    assert confusion.sum(axis=1).tolist() == [3] * 10
    assert report.to_dict()["n"] == 30


def test_report_and_plots_write_files(tmp_path):
    write_report(tmp_path / "r.json", {"a": 1})
    assert (tmp_path / "r.json").is_file()
    curves = [
        {"epoch": 0, "ce": 2.0, "l1": 1.0, "total": 3.0, "lr": 1e-3},
        {"epoch": 1, "ce": 1.0, "l1": 0.5, "total": 1.5, "lr": 5e-4},
    ]
    plot_training_curves(curves, tmp_path / "curves.png")
    plot_budget_sweep([1000, 10000], [0.8, 0.9], tmp_path / "sweep.png")
    assert (tmp_path / "curves.png").stat().st_size > 0
    assert (tmp_path / "sweep.png").stat().st_size > 0
