"""Flip-damage and bit-ordering studies on a trained bundle.

Both studies reuse the bundle's own test split (re-resolved from the
metadata recorded at training time) so a saved bundle is self-contained:
encode the images to semantic bits, corrupt the bits in a controlled
way, decode, and score the reconstruction.
"""

from __future__ import annotations

import numpy as np
import torch

from .data import load_dataset
from .errors import TrainerError
from .metrics import psnr_batch, ssim_batch
from .model import SemanticCodec
from .training import TrainedProfileBundle

ORDERINGS = ("proposed", "random", "reverse")


def study_images(bundle: TrainedProfileBundle, images: int = 256) -> torch.Tensor:
    """The first ``images`` samples of the bundle's test split."""
    meta = bundle.meta
    _, test, _ = load_dataset(
        meta["dataset"],
        source=meta.get("data_source", "auto"),
        data_dir=meta.get("data_dir"),
        n_train=meta.get("train_samples", 24000),
        n_test=meta.get("test_samples", 512),
        seed=meta.get("seed", 0),
    )
    return test[: min(images, len(test))]


@torch.no_grad()
def _decode(codec: SemanticCodec, bits: torch.Tensor) -> torch.Tensor:
    return codec.decode_from_bits(bits)


@torch.no_grad()
def segment_flip_table(
    bundle: TrainedProfileBundle,
    segments: int = 8,
    images: int = 256,
    data: torch.Tensor | None = None,
) -> list[dict]:
    """Flip equal slices of the mu-sorted bits, one slice at a time.

    Bits are sorted ascending by learned flip probability and split into
    ``segments`` near-equal contiguous slices, slice 1 holding the most
    protected (most important) bits. Row 0 of the returned table is the
    no-flip baseline; row s reports reconstruction quality with every bit
    of slice s inverted.
    """
    if segments < 1:
        raise TrainerError(f"segments must be >= 1, got {segments}")
    codec = bundle.codec()
    if segments > codec.semantic_bits:
        raise TrainerError("more segments than semantic bits")
    x = data if data is not None else study_images(bundle, images)
    bits = codec.encode_to_bits(x)
    order = np.argsort(bundle.mu, kind="stable")
    slices = np.array_split(order, segments)

    clean = _decode(codec, bits)
    rows = [{
        "segment": 0,
        "flipped_bits": 0,
        "psnr": psnr_batch(clean, x),
        "ssim": ssim_batch(clean, x),
    }]
    for s, chunk in enumerate(slices, start=1):
        corrupted = bits.clone()
        idx = torch.from_numpy(chunk.copy())
        corrupted[:, idx] = 1.0 - corrupted[:, idx]
        recon = _decode(codec, corrupted)
        rows.append({
            "segment": s,
            "flipped_bits": int(chunk.size),
            "psnr": psnr_batch(recon, x),
            "ssim": ssim_batch(recon, x),
        })
    return rows


def slot_flip_probs(plan: dict) -> np.ndarray:
    """Per-slot achieved flip probability from a block-plan JSON object.

    Slot p is position p of the ascending-sorted profile the plan was
    computed for. Grouped slots take their group's achieved flip
    probability; uncoded singleton slots take the raw channel flip
    probability. Every slot must be covered exactly once.
    """
    try:
        k = int(plan["k_total"])
        eps = float(plan["eps"])
        groups = plan["groups"]
        singles = plan["singletons"]
        perm = plan["permutation"]
    except (KeyError, TypeError) as exc:
        raise TrainerError(f"plan JSON is missing field {exc}") from exc
    if len(perm) != k:
        raise TrainerError("plan permutation length does not match k_total")
    q = np.full(k, -1.0)
    for g in groups:
        start, stop = int(g["start"]), int(g["stop"])
        if not 0 <= start <= stop <= k:
            raise TrainerError(f"group range [{start}, {stop}) escapes the profile")
        if (q[start:stop] >= 0).any():
            raise TrainerError("plan covers a slot twice")
        q[start:stop] = float(g["achieved_flip_prob"])
    start, stop = int(singles["start"]), int(singles["stop"])
    if (q[start:stop] >= 0).any():
        raise TrainerError("plan covers a slot twice")
    q[start:stop] = eps
    if (q < 0.0).any():
        raise TrainerError("plan leaves slots uncovered")
    return q


@torch.no_grad()
def ordering_psnr(
    bundle: TrainedProfileBundle,
    plan: dict,
    ordering: str,
    images: int = 256,
    seed: int = 0,
    genie: bool = False,
    data: torch.Tensor | None = None,
) -> dict:
    """Simulate the plan with bits assigned to slots in a given order.

    "proposed" transmits each bit in its own slot (the assignment the
    plan was computed for); "reverse" walks the sorted bits backwards, so
    the most important bits land in the weakest slots; "random" shuffles
    bits over slots with the given seed. Under a genie channel nothing is
    flipped and the ordering cannot matter.
    """
    if ordering not in ORDERINGS:
        raise TrainerError(f"unknown ordering {ordering!r}; choose from {ORDERINGS}")
    codec = bundle.codec()
    k = codec.semantic_bits
    if int(plan.get("k_total", -1)) != k:
        raise TrainerError(
            f"plan was computed for {plan.get('k_total')} bits but the "
            f"bundle carries {k}"
        )
    q = slot_flip_probs(plan)
    perm = np.asarray(plan["permutation"], dtype=int)

    if ordering == "proposed":
        occupant = perm
    elif ordering == "reverse":
        occupant = perm[::-1]
    else:
        occupant = perm[np.random.default_rng(seed).permutation(k)]
    # bit occupant[p] rides in slot p, so it inherits that slot's residual
    # flip probability
    flip_prob = np.empty(k)
    flip_prob[occupant] = q
    if genie:
        flip_prob[:] = 0.0

    x = data if data is not None else study_images(bundle, images)
    bits = codec.encode_to_bits(x)
    gen = torch.Generator().manual_seed(seed + 1)
    draws = torch.rand(bits.shape, generator=gen)
    flips = (draws < torch.from_numpy(flip_prob).float()).float()
    recon = _decode(codec, bits + flips - 2.0 * bits * flips)
    return {
        "ordering": ordering,
        "psnr": psnr_batch(recon, x),
        "mean_flip_prob": float(flip_prob.mean()),
        "flipped_fraction": float(flips.mean()),
    }


def run_ordering_study(
    bundle: TrainedProfileBundle,
    plan: dict,
    orderings: tuple[str, ...] = ORDERINGS,
    images: int = 256,
    seed: int = 0,
    genie: bool = False,
) -> list[dict]:
    data = study_images(bundle, images)
    return [
        ordering_psnr(
            bundle, plan, ordering, images=images, seed=seed, genie=genie, data=data
        )
        for ordering in orderings
    ]
