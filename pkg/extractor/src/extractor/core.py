"""Frozen REGNET_X_400MF features for small image classification sets.

The backbone runs in eval mode with its final fully connected layer replaced
by the identity, so the forward pass returns the 400-dim activation that
layer would have consumed. Grayscale inputs are stacked to three channels
and everything is resized to 224x224 before normalization with the
backbone's published preprocessing statistics.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, Optional, Sequence

import numpy as np
import torch
from torch import nn
from torchvision import datasets as tv_datasets
from torchvision import models
from torchvision import transforms

FEATURE_DIM = 400

DATASETS = ("mnist", "usps", "cifar10")
SPLITS = ("train", "test")

# published normalization statistics of the pretrained backbone
_MEAN = (0.485, 0.456, 0.406)
_STD = (0.229, 0.224, 0.225)


@dataclasses.dataclass(frozen=True)
class ExtractionJob:
    """One extraction run: which dataset and split, optional row cap,
    output CSV path."""

    dataset: str
    split: str
    out: str
    limit: Optional[int] = None

    def __post_init__(self) -> None:
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}; "
                             f"expected one of {', '.join(DATASETS)}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}; "
                             f"expected one of {', '.join(SPLITS)}")
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be >= 1 when given")


def build_backbone(pretrained: bool = True) -> nn.Module:
    """REGNET_X_400MF with the classifier head replaced by the identity.

    The returned module is frozen and in eval mode; its forward pass yields
    the 400-dim penultimate activation. pretrained=False skips the weight
    download and is only useful for shape and plumbing tests.
    """
    weights = models.RegNet_X_400MF_Weights.IMAGENET1K_V2 if pretrained else None
    net = models.regnet_x_400mf(weights=weights)
    if net.fc.in_features != FEATURE_DIM:
        raise RuntimeError(
            f"backbone head expects {net.fc.in_features} inputs, "
            f"not {FEATURE_DIM}")
    net.fc = nn.Identity()
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


def _stack_channels(t: torch.Tensor) -> torch.Tensor:
    # grayscale tensors arrive as 1xHxW; color ones pass through
    return t.expand(3, -1, -1) if t.shape[0] == 1 else t


def build_transform() -> transforms.Compose:
    return transforms.Compose([
        transforms.Resize((224, 224)),
        transforms.ToTensor(),
        transforms.Lambda(_stack_channels),
        transforms.Normalize(_MEAN, _STD),
    ])


def load_split(job: ExtractionJob, root: str):
    """Instantiate the torchvision dataset for the job, downloading into
    root if it is not cached there."""
    train = job.split == "train"
    tf = build_transform()
    if job.dataset == "mnist":
        return tv_datasets.MNIST(root, train=train, transform=tf,
                                 download=True)
    if job.dataset == "usps":
        return tv_datasets.USPS(root, train=train, transform=tf,
                                download=True)
    return tv_datasets.CIFAR10(root, train=train, transform=tf,
                               download=True)


def run_inference(net: nn.Module, data, limit: Optional[int] = None,
                  batch_size: int = 64) -> tuple[list[int], np.ndarray]:
    """Forward the first limit images (all of them when limit is None)
    through the frozen backbone in inference mode."""
    n = len(data) if limit is None else min(limit, len(data))
    labels: list[int] = []
    chunks: list[np.ndarray] = []
    with torch.inference_mode():
        for start in range(0, n, batch_size):
            batch = [data[i] for i in range(start, min(start + batch_size, n))]
            x = torch.stack([img for img, _ in batch])
            labels.extend(int(y) for _, y in batch)
            chunks.append(net(x).double().numpy())
    feats = (np.concatenate(chunks, axis=0) if chunks
             else np.zeros((0, FEATURE_DIM)))
    return labels, feats


def write_csv(path: str, labels: Sequence[int],
              features: Iterable[Sequence[float]]) -> None:
    """Label-first CSV, no header; floats written with full repr so the
    file round-trips bit for bit."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for y, row in zip(labels, features):
            fh.write(",".join([str(int(y))]
                              + [repr(float(v)) for v in row]) + "\n")


def extract(job: ExtractionJob, root: str = "data-cache",
            batch_size: int = 64, pretrained: bool = True) -> int:
    """Run the job end to end and return the number of rows written."""
    net = build_backbone(pretrained)
    data = load_split(job, root)
    labels, feats = run_inference(net, data, job.limit, batch_size)
    write_csv(job.out, labels, feats)
    return len(labels)
