"""Shared fixtures: IDX file builders, blob experiment configs, and the
optional Fashion-MNIST directory for dataset-gated tests."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from colearn.config import (
    CollectiveSpec,
    ExperimentConfig,
    GraphSpec,
    SynthSpec,
    TrainingSpec,
)
from colearn.data import write_idx
from colearn.seeding import rng_for

REPO_ROOT = Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "configs"

FMNIST_NAMES = (
    "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
)


def fashion_mnist_dir() -> Path | None:
    """Directory with the real Fashion-MNIST IDX files, if present."""
    candidates = []
    env = os.environ.get("COLEARN_FMNIST_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(REPO_ROOT / "data" / "fashion-mnist")
    for cand in candidates:
        if all((cand / name).is_file() for name in FMNIST_NAMES):
            return cand
    return None


requires_fmnist = pytest.mark.skipif(
    fashion_mnist_dir() is None,
    reason="Fashion-MNIST IDX files not available (set COLEARN_FMNIST_DIR "
    "or place them under data/fashion-mnist/; see README)",
)


@pytest.fixture
def idx_pair_factory(tmp_path):
    """Write (images, labels) uint8 arrays as an IDX pair in tmp_path."""

    def build(images: np.ndarray, labels: np.ndarray, prefix: str = "set"):
        images_path = tmp_path / f"{prefix}-images-idx3-ubyte"
        labels_path = tmp_path / f"{prefix}-labels-idx1-ubyte"
        write_idx(images, labels, images_path, labels_path)
        return images_path, labels_path

    return build


def synthetic_idx_dataset(dirpath: Path, m_train: int = 12600, m_test: int = 1000,
                          seed: int = 99) -> None:
    """A Fashion-MNIST-shaped stand-in: 28x28 uint8 images in 10 loose
    Gaussian classes, written in the exact IDX wire format."""
    rng = rng_for(seed, "idx-standin")

    def render(count: int) -> tuple[np.ndarray, np.ndarray]:
        labels = rng.integers(0, 10, size=count)
        base = rng.integers(0, 40, size=(10, 28, 28))
        imgs = np.empty((count, 28, 28), dtype=np.uint8)
        for c in range(10):
            mask = labels == c
            n = int(mask.sum())
            noise = rng.normal(0.0, 25.0, size=(n, 28, 28))
            block = base[c] + noise
            block[:, c * 2 : c * 2 + 6, 4:24] += 120.0
            imgs[mask] = np.clip(block, 0, 255).astype(np.uint8)
        return imgs, labels.astype(np.uint8)

    dirpath.mkdir(parents=True, exist_ok=True)
    train_imgs, train_labels = render(m_train)
    test_imgs, test_labels = render(m_test)
    write_idx(train_imgs, train_labels, dirpath / FMNIST_NAMES[0], dirpath / FMNIST_NAMES[1])
    write_idx(test_imgs, test_labels, dirpath / FMNIST_NAMES[2], dirpath / FMNIST_NAMES[3])


def blob_config(
    mode: str = "CL",
    runs: int = 1,
    seed: int = 2024,
    n_per_class: int = 1048,
    num_classes: int = 5,
    dim: int = 20,
    separation: float = 2.0,
    train_size: int = 30,
    val_size: int = 30,
    self_train_epochs: int = 400,
    alpha: float = 3e-3,
    gamma: float = 1.0,
    score_refresh_period: int = 50,
    review_period: int = 50,
    epochs_over_shared: int = 2,
    metric_stride: int = 100,
    architectures: tuple[str, ...] = ("HL1", "HL1", "SHL", "SHL"),
    max_iterations: int | None = None,
) -> ExperimentConfig:
    return ExperimentConfig(
        mode=mode,
        n_agents=len(architectures),
        architectures=architectures,
        architecture_mix=(),
        train_size=train_size,
        val_size=val_size,
        common_val=False,
        dataset=SynthSpec(
            n_per_class=n_per_class, num_classes=num_classes, dim=dim,
            separation=separation, test_n_per_class=200,
        ),
        graph=GraphSpec(kind="complete"),
        training=TrainingSpec(
            update_rule="adam", alpha=alpha, batch_size=10,
            self_train_epochs=self_train_epochs, fs_epochs=5,
        ),
        collective=CollectiveSpec(
            gamma=gamma, score_refresh_period=score_refresh_period,
            review_period=review_period, batch_size=10,
            epochs_over_shared=epochs_over_shared,
        ),
        montecarlo_runs=runs,
        master_seed=seed,
        metric_stride=metric_stride,
        max_iterations=max_iterations,
    )
