"""Dataset loading with a self-contained fallback for offline machines.

``load_dataset`` returns float image tensors in [0, 1] shaped (N, C, H, W).
For MNIST, when the real dataset is neither cached locally nor
downloadable, a stand-in is synthesized from scikit-learn's bundled 8x8
digit scans: upscaled to 28x28, randomly shifted by up to two pixels and
lightly noised, then replicated to the requested sample counts. The
stand-in keeps the image geometry and therefore the semantic-bit count of
the real dataset; reconstruction quality numbers are not comparable to
MNIST-trained ones, which is fine for the qualitative studies here.

CIFAR variants have no synthetic stand-in and require the real data.
"""

from __future__ import annotations

import sys

import numpy as np
import torch
import torch.nn.functional as F

from .errors import DatasetMissing, TrainerError

DATASETS = ("mnist", "cifar10", "cifar100")
SOURCES = ("auto", "real", "synthetic")


def _subsample(x: torch.Tensor, n: int, seed: int) -> torch.Tensor:
    if n >= len(x):
        return x
    keep = np.random.default_rng(seed).permutation(len(x))[:n]
    return x[torch.from_numpy(np.sort(keep))]


def _load_real(dataset: str, data_dir: str, n_train: int, n_test: int, seed: int):
    from torchvision import datasets as tvd

    cls = {"mnist": tvd.MNIST, "cifar10": tvd.CIFAR10, "cifar100": tvd.CIFAR100}[dataset]
    try:
        train = cls(data_dir, train=True, download=True)
        test = cls(data_dir, train=False, download=True)
    except Exception as exc:
        raise DatasetMissing(
            f"{dataset} is not available at {data_dir!r} and could not be "
            f"downloaded ({exc}); pass --data-dir pointing at an existing "
            f"copy, or use --data-source synthetic for mnist"
        ) from exc

    def to_tensor(ds):
        arr = np.asarray(ds.data, dtype=np.float32) / 255.0
        t = torch.from_numpy(arr)
        if t.ndim == 3:  # grayscale (N, H, W)
            return t.unsqueeze(1)
        return t.permute(0, 3, 1, 2)  # (N, H, W, C) -> (N, C, H, W)

    return (
        _subsample(to_tensor(train), n_train, seed),
        _subsample(to_tensor(test), n_test, seed + 1),
    )


def _synth_digits(n_train: int, n_test: int, seed: int):
    from sklearn.datasets import load_digits

    base = torch.tensor(load_digits().images, dtype=torch.float32) / 16.0
    order = np.random.default_rng(seed).permutation(len(base))
    base = base[torch.from_numpy(order)]
    train_pool, test_pool = base[:1600], base[1600:]

    def expand(pool: torch.Tensor, n: int, sub_seed: int) -> torch.Tensor:
        rng = np.random.default_rng(sub_seed)
        gen = torch.Generator().manual_seed(sub_seed)
        idx = torch.from_numpy(rng.integers(0, len(pool), size=n))
        imgs = F.interpolate(
            pool[idx].unsqueeze(1), size=(28, 28), mode="bilinear", align_corners=False
        )
        dy = rng.integers(-2, 3, size=n)
        dx = rng.integers(-2, 3, size=n)
        for i in range(n):
            imgs[i] = torch.roll(imgs[i], shifts=(int(dy[i]), int(dx[i])), dims=(1, 2))
        imgs += 0.02 * torch.randn(imgs.shape, generator=gen)
        return imgs.clamp_(0.0, 1.0)

    return expand(train_pool, n_train, seed * 7 + 1), expand(test_pool, n_test, seed * 7 + 2)


def load_dataset(
    dataset: str,
    source: str = "auto",
    data_dir: str | None = None,
    n_train: int = 24000,
    n_test: int = 512,
    seed: int = 0,
) -> tuple[torch.Tensor, torch.Tensor, str]:
    """Resolve (train, test, source_used) for the named dataset.

    ``source`` selects "real" (local or downloaded), "synthetic" (offline
    stand-in, mnist only), or "auto" which tries real first and falls back
    to synthetic with a note on stderr.
    """
    if dataset not in DATASETS:
        raise TrainerError(f"unknown dataset {dataset!r}; choose from {DATASETS}")
    if source not in SOURCES:
        raise TrainerError(f"unknown data source {source!r}; choose from {SOURCES}")
    data_dir = data_dir or "./data"

    if source in ("auto", "real"):
        try:
            train, test = _load_real(dataset, data_dir, n_train, n_test, seed)
            return train, test, "real"
        except DatasetMissing:
            if source == "real":
                raise
            print(
                f"note: real {dataset} unavailable, using the synthetic stand-in",
                file=sys.stderr,
            )

    if dataset != "mnist":
        raise DatasetMissing(
            f"no synthetic stand-in exists for {dataset}; provide the real "
            f"dataset via --data-dir"
        )
    train, test = _synth_digits(n_train, n_test, seed)
    return train, test, "synthetic"
