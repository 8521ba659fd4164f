"""Joint training of the autoencoder and the per-bit flip probabilities.

The loss is mean squared reconstruction error plus a pull of every flip
probability toward 0.5, weighted by lam and averaged over the K semantic
bits::

    L = MSE(x, x_hat) + (lam / K) * sum_i (0.5 - mu_i)^2

The regularizer raises the flip budget of bits the reconstruction does
not actually need, while bits the decoder depends on are driven toward
small mu by the reconstruction term. The flip parameters get their own,
larger Adam learning rate: their regularizer gradient is many orders of
magnitude below the reconstruction gradients, and the split learning
rate is what lets the spread develop within a desk-scale epoch budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F

from .data import DATASETS, SOURCES, load_dataset
from .errors import TrainerError
from .metrics import psnr_batch
from .model import SemanticCodec, build_autoencoder

RELAXATION_NOTE = (
    "hard Bernoulli flips with binary-concrete backward pass; "
    "straight-through uniform quantizer; mu = 0.5*sigmoid(rho)"
)


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``epochs`` defaults to a reduced desk-scale budget; pass the CLI's
    ``--full`` flag (or a larger value here) for a longer run.
    """

    dataset: str = "mnist"
    lam: float = 1e-4
    bits: int = 8
    epochs: int = 6
    seed: int = 0
    batch_size: int = 128
    lr: float = 1e-3
    lr_mu: float = 2e-2
    tau: float = 2.0 / 3.0
    mu_init: float = 0.1
    train_samples: int = 24000
    test_samples: int = 512
    data_dir: str | None = None
    data_source: str = "auto"

    def __post_init__(self) -> None:
        if self.dataset not in DATASETS:
            raise TrainerError(f"unknown dataset {self.dataset!r}; choose from {DATASETS}")
        if self.data_source not in SOURCES:
            raise TrainerError(
                f"unknown data source {self.data_source!r}; choose from {SOURCES}"
            )
        if not self.lam > 0.0:
            raise TrainerError(f"regularizer weight lam must be positive, got {self.lam}")
        if self.bits < 1:
            raise TrainerError(f"bits per feature must be >= 1, got {self.bits}")
        if self.epochs < 1:
            raise TrainerError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise TrainerError(f"batch size must be >= 1, got {self.batch_size}")
        if self.train_samples < self.batch_size:
            raise TrainerError("train_samples must cover at least one batch")


@dataclass
class TrainedProfileBundle:
    """A trained codec plus the learned flip-probability profile.

    ``mu`` is ordered feature-major with the most significant bit first,
    matching the flat semantic-bit layout of the codec. Saved bundles are
    directories holding ``profile.json`` (a plain JSON array readable by
    the planning CLI), ``weights.pt``, and ``metadata.json``.
    """

    mu: np.ndarray
    state: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.mu = np.asarray(self.mu, dtype=float)
        k = self.meta.get("semantic_bits")
        if k is not None and k != self.mu.size:
            raise TrainerError(
                f"profile length {self.mu.size} does not match metadata K={k}"
            )
        if self.mu.size == 0 or not ((self.mu > 0.0) & (self.mu < 0.5)).all():
            raise TrainerError("every learned flip probability must lie in (0, 0.5)")

    def codec(self) -> SemanticCodec:
        """Rebuild the trained codec in eval mode."""
        codec = SemanticCodec(
            build_autoencoder(self.meta["dataset"]),
            bits=int(self.meta["bits"]),
            tau=float(self.meta.get("tau", 2.0 / 3.0)),
        )
        codec.load_state_dict(self.state)
        codec.eval()
        return codec

    def save(self, path: str | Path) -> Path:
        out = Path(path)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "profile.json", "w", encoding="utf-8") as fh:
            json.dump([float(v) for v in self.mu], fh)
        torch.save(self.state, out / "weights.pt")
        with open(out / "metadata.json", "w", encoding="utf-8") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True)
        return out

    @classmethod
    def load(cls, path: str | Path) -> "TrainedProfileBundle":
        root = Path(path)
        try:
            with open(root / "metadata.json", encoding="utf-8") as fh:
                meta = json.load(fh)
            with open(root / "profile.json", encoding="utf-8") as fh:
                mu = np.asarray(json.load(fh), dtype=float)
            state = torch.load(root / "weights.pt", weights_only=True)
        except OSError as exc:
            raise TrainerError(f"not a bundle directory: {root} ({exc})") from exc
        bundle = cls(mu=mu, state=state, meta=meta)
        stored = 0.5 / (1.0 + np.exp(-state["rho"].numpy().astype(float)))
        if not np.allclose(stored, bundle.mu, rtol=1e-6, atol=1e-9):
            raise TrainerError(
                "profile.json disagrees with the flip parameters in weights.pt"
            )
        return bundle


def train(cfg: TrainConfig, progress: Callable[[str], None] | None = None
          ) -> TrainedProfileBundle:
    """Run the joint optimization and package the result.

    Raises ``DatasetMissing`` when the data cannot be resolved and
    ``TrainerError`` if the loss stops being finite.
    """
    say = progress or (lambda _line: None)
    torch.manual_seed(cfg.seed)
    train_x, test_x, source = load_dataset(
        cfg.dataset, source=cfg.data_source, data_dir=cfg.data_dir,
        n_train=cfg.train_samples, n_test=cfg.test_samples, seed=cfg.seed,
    )
    codec = SemanticCodec(
        build_autoencoder(cfg.dataset), bits=cfg.bits, tau=cfg.tau, mu_init=cfg.mu_init
    )
    k = codec.semantic_bits
    opt = torch.optim.Adam([
        {"params": codec.net.parameters(), "lr": cfg.lr},
        {"params": [codec.rho], "lr": cfg.lr_mu},
    ])

    loss_history: list[float] = []
    for epoch in range(cfg.epochs):
        perm = torch.randperm(len(train_x))
        epoch_mse, batches = 0.0, 0
        for i in range(0, len(train_x) - cfg.batch_size + 1, cfg.batch_size):
            x = train_x[perm[i:i + cfg.batch_size]]
            recon = codec(x)
            mse = F.mse_loss(recon, x)
            mu = codec.mu()
            loss = mse + (cfg.lam / k) * ((0.5 - mu) ** 2).sum()
            if not math.isfinite(loss.detach().item()):
                raise TrainerError(
                    f"training diverged: loss is not finite at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_mse += mse.detach().item()
            batches += 1
        loss_history.append(epoch_mse / max(batches, 1))
        with torch.no_grad():
            m = codec.mu()
        say(
            f"epoch {epoch + 1}/{cfg.epochs}: mse {loss_history[-1]:.5f}, "
            f"mu [{float(m.min()):.4f}, {float(m.max()):.4f}]"
        )

    codec.eval()
    with torch.no_grad():
        mu = codec.mu().numpy().astype(float)
        probe = test_x[: min(256, len(test_x))]
        clean_psnr = psnr_batch(codec(probe, noise=False), probe)

    meta = {
        **asdict(cfg),
        "data_source": source,
        "feature_count": codec.features,
        "semantic_bits": k,
        "loss_history": loss_history,
        "clean_psnr": clean_psnr,
        "relaxation": RELAXATION_NOTE,
        "torch_version": torch.__version__,
    }
    return TrainedProfileBundle(mu=mu, state=codec.state_dict(), meta=meta)
