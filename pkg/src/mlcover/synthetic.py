"""Seeded synthetic multi-label data with planted label dependencies."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import Attribute, MultiLabelDataset


@dataclass(frozen=True)
class PlantedConfig:
    n: int = 500
    m: int = 8
    triplets: tuple[tuple[int, ...], ...] = ((0, 3, 6), (1, 4, 7))
    group_rate: float = 0.35  # P(latent group switched on)
    on_rate: float = 0.9  # P(label on | group on)
    off_rate: float = 0.05  # P(label on | group off)
    free_rate: float = 0.25  # P(label on) for labels outside every group
    features_per_label: int = 3
    shift: float = 0.8  # mean shift of a label's features when the label is on
    noise_features: int = 4
    seed: int = 0


def planted_dataset(cfg: PlantedConfig = PlantedConfig()) -> MultiLabelDataset:
    """Groups of labels share a latent switch; each label drives a few noisy numeric features.

    A member that sees a whole group can pool the evidence of all its
    labels' features, which is what makes covering these groups useful.
    """
    rng = np.random.default_rng(cfg.seed)
    Y = np.zeros((cfg.n, cfg.m), dtype=bool)
    grouped = set()
    for group in cfg.triplets:
        z = rng.random(cfg.n) < cfg.group_rate
        for label in group:
            p = np.where(z, cfg.on_rate, cfg.off_rate)
            Y[:, label] = rng.random(cfg.n) < p
            grouped.add(label)
    for label in range(cfg.m):
        if label not in grouped:
            Y[:, label] = rng.random(cfg.n) < cfg.free_rate
    blocks = []
    for label in range(cfg.m):
        base = rng.normal(size=(cfg.n, cfg.features_per_label))
        blocks.append(base + cfg.shift * Y[:, [label]])
    blocks.append(rng.normal(size=(cfg.n, cfg.noise_features)))
    X = np.round(np.hstack(blocks), 6)
    attributes = tuple(Attribute(f"f{j}", "numeric") for j in range(X.shape[1]))
    labels = tuple(f"l{j}" for j in range(cfg.m))
    features = tuple(tuple(float(v) for v in row) for row in X)
    label_sets = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in Y)
    return MultiLabelDataset(attributes, labels, features, label_sets, relation="planted")
