"""kdharness: distill a top-1-only black-box teacher into a student over
synthetic image-prior datasets (hard-label priming, contrastive dataset
optimization, hard+soft distillation)."""

from .contrast import (
    ContrastBatch,
    contrastive_loss,
    contrastive_loss_from_embeddings,
    cosine_sim,
    make_positive_view,
    optimize_dataset,
)
from .data import (
    LabeledData,
    load_digits28,
    load_mnist,
    load_priors,
    make_noise_images,
    mnist_available,
)
from .evaluate import EvalReport, evaluate
from .models import InstanceDiscriminator, LeNet5, SmallCNN, build_model
from .oracle import TeacherOracle, query_in_batches
from .train import (
    TrainRunConfig,
    cache_teacher_labels,
    distill_student,
    export_embeddings,
    per_sample_l1,
    train_primer,
    train_teacher,
)

__version__ = "0.1.0"
