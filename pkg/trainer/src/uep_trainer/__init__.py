"""Learn per-bit flip-probability budgets and connect them to image quality.

The package trains a quantized convolutional autoencoder whose middle is
K parallel binary symmetric channels with trainable flip probabilities.
The learned profile exports as a JSON array for the planning CLI, and two
studies probe what the profile means for reconstruction quality: flipping
mu-sorted bit segments one at a time, and replaying a block plan with the
bits assigned to protection slots in different orders.
"""

from .errors import DatasetMissing, TrainerError
from .model import CifarAutoencoder, MnistAutoencoder, SemanticCodec, build_autoencoder
from .studies import (
    ordering_psnr,
    run_ordering_study,
    segment_flip_table,
    slot_flip_probs,
    study_images,
)
from .training import TrainConfig, TrainedProfileBundle, train

__all__ = [
    "CifarAutoencoder",
    "DatasetMissing",
    "MnistAutoencoder",
    "SemanticCodec",
    "TrainConfig",
    "TrainedProfileBundle",
    "TrainerError",
    "build_autoencoder",
    "ordering_psnr",
    "run_ordering_study",
    "segment_flip_table",
    "slot_flip_probs",
    "study_images",
    "train",
]
