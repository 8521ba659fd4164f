"""Autoencoder, uniform bit quantizer, and the trainable bit-flip channel.

The encoder maps an image to M feature values squashed into (0, 1), each
uniformly quantized to B bits (natural binary, most significant bit
first). Every one of the K = M*B semantic bits then crosses its own
binary symmetric channel whose flip probability mu_i = 0.5*sigmoid(rho_i)
is a trainable parameter, and the decoder reconstructs the image from the
dequantized features.

Differentiability of the discrete middle:

* quantization is a straight-through estimator: the forward pass uses the
  rounded level, the backward pass treats dequantize(quantize(s)) as the
  identity in s;
* flips are sampled hard per bit and image, but the backward pass runs
  through a binary-concrete relaxation of the flip indicator
  (sigmoid((logit mu + logistic noise) / tau)), so the reconstruction
  loss reaches rho with a weight proportional to each bit's arithmetic
  significance. That weighting is what separates the learned mu values:
  most-significant bits are pulled toward 0 while bits the decoder can
  afford to ignore drift up toward 0.5 under the regularizer.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn

from .errors import TrainerError


class MnistAutoencoder(nn.Module):
    """28x28 grayscale autoencoder producing 8 feature maps at 7x7."""

    feature_shape = (8, 7, 7)
    image_shape = (1, 28, 28)

    def __init__(self) -> None:
        super().__init__()
        self.encoder = nn.Sequential(
            nn.Conv2d(1, 32, 3, stride=2, padding=1), nn.PReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1), nn.PReLU(),
            nn.Conv2d(64, 64, 5, stride=1, padding=2), nn.PReLU(),
            nn.Conv2d(64, 8, 5, stride=1, padding=2),
        )
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(8, 64, 5, stride=1, padding=2), nn.PReLU(),
            nn.ConvTranspose2d(64, 64, 5, stride=2, padding=2, output_padding=1), nn.PReLU(),
            nn.ConvTranspose2d(64, 32, 3, stride=1, padding=1), nn.PReLU(),
            nn.ConvTranspose2d(32, 1, 4, stride=2, padding=1),
        )


class CifarAutoencoder(nn.Module):
    """32x32 color autoencoder producing 24 feature maps at 8x8."""

    feature_shape = (24, 8, 8)
    image_shape = (3, 32, 32)

    def __init__(self) -> None:
        super().__init__()
        self.encoder = nn.Sequential(
            nn.Conv2d(3, 64, 5, stride=2, padding=2), nn.PReLU(),
            nn.Conv2d(64, 128, 5, stride=2, padding=2), nn.PReLU(),
            nn.Conv2d(128, 128, 5, stride=1, padding=2), nn.PReLU(),
            nn.Conv2d(128, 128, 5, stride=1, padding=2), nn.PReLU(),
            nn.Conv2d(128, 24, 5, stride=1, padding=2),
        )
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(24, 128, 5, stride=1, padding=2), nn.PReLU(),
            nn.ConvTranspose2d(128, 128, 5, stride=1, padding=2), nn.PReLU(),
            nn.ConvTranspose2d(128, 128, 5, stride=2, padding=2, output_padding=1), nn.PReLU(),
            nn.ConvTranspose2d(128, 64, 5, stride=2, padding=2, output_padding=1), nn.PReLU(),
            nn.ConvTranspose2d(64, 3, 5, stride=1, padding=2),
        )


ARCHITECTURES = {
    "mnist": MnistAutoencoder,
    "cifar10": CifarAutoencoder,
    "cifar100": CifarAutoencoder,
}


def build_autoencoder(dataset: str) -> nn.Module:
    try:
        return ARCHITECTURES[dataset]()
    except KeyError:
        raise TrainerError(f"no architecture registered for dataset {dataset!r}") from None


class SemanticCodec(nn.Module):
    """Autoencoder plus quantizer plus per-bit trainable flip channel."""

    def __init__(self, net: nn.Module, bits: int = 8, tau: float = 2.0 / 3.0,
                 mu_init: float = 0.1) -> None:
        super().__init__()
        if bits < 1:
            raise TrainerError(f"bits per feature must be >= 1, got {bits}")
        if not 0.0 < mu_init < 0.5:
            raise TrainerError(f"mu_init must lie in (0, 0.5), got {mu_init}")
        if tau <= 0.0:
            raise TrainerError(f"relaxation temperature must be positive, got {tau}")
        self.net = net
        self.bits = bits
        self.tau = tau
        self.features = int(np.prod(net.feature_shape))
        self.semantic_bits = self.features * bits
        # mu = 0.5*sigmoid(rho) keeps every flip probability inside (0, 0.5)
        rho0 = math.log(2.0 * mu_init / (1.0 - 2.0 * mu_init))
        self.rho = nn.Parameter(torch.full((self.semantic_bits,), rho0))
        shifts = torch.arange(bits - 1, -1, -1)
        self.register_buffer("_shifts", shifts)
        self.register_buffer("_weights", 2.0 ** shifts.float())

    def mu(self) -> torch.Tensor:
        return 0.5 * torch.sigmoid(self.rho)

    @property
    def levels(self) -> int:
        return 2 ** self.bits - 1

    def encode_features(self, x: torch.Tensor) -> torch.Tensor:
        """Images -> feature values in (0, 1), shape (N, M)."""
        return torch.sigmoid(self.net.encoder(x).flatten(1))

    def decode_features(self, s: torch.Tensor) -> torch.Tensor:
        return self.net.decoder(s.view(s.shape[0], *self.net.feature_shape))

    def bits_of(self, s: torch.Tensor) -> torch.Tensor:
        """Quantize features to hard bits, shape (N, M, B), MSB first."""
        level = torch.round(s * self.levels).long().clamp_(0, self.levels)
        return ((level.unsqueeze(-1) >> self._shifts) & 1).float()

    def features_of(self, b: torch.Tensor) -> torch.Tensor:
        """Recompose (N, M, B) bits into feature values in [0, 1]."""
        return (b * self._weights).sum(-1) / self.levels

    def encode_to_bits(self, x: torch.Tensor) -> torch.Tensor:
        """Images -> flat semantic bits (N, K); feature-major, MSB first."""
        return self.bits_of(self.encode_features(x)).flatten(1)

    def decode_from_bits(self, flat: torch.Tensor) -> torch.Tensor:
        if flat.shape[-1] != self.semantic_bits:
            raise TrainerError(
                f"expected {self.semantic_bits} semantic bits per image, "
                f"got {flat.shape[-1]}"
            )
        b = flat.view(flat.shape[0], self.features, self.bits)
        return self.decode_features(self.features_of(b))

    def _sample_flips(self, b: torch.Tensor) -> torch.Tensor:
        mu = self.mu().view(self.features, self.bits)
        logit_mu = torch.log(mu) - torch.log1p(-mu)
        u = torch.rand(b.shape, device=b.device)
        noise = torch.log(u) - torch.log1p(-u)
        soft = torch.sigmoid((logit_mu + noise) / self.tau)
        hard = (soft > 0.5).float()  # exact Bernoulli(mu) marginally
        return hard + soft - soft.detach()

    def forward(self, x: torch.Tensor, noise: bool = True) -> torch.Tensor:
        s = self.encode_features(x)
        b = self.bits_of(s)
        # straight-through: forward value is the dequantized level,
        # gradient w.r.t. s is the identity
        s_q = s + (self.features_of(b) - s).detach()
        if noise:
            f = self._sample_flips(b)
            # a flip moves the received value by the bit's arithmetic
            # weight, signed by the bit's current state
            delta = (f * (1.0 - 2.0 * b) * self._weights).sum(-1) / self.levels
            s_q = s_q + delta
        return self.decode_features(s_q)
