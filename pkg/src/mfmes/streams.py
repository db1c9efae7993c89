"""Labeled child random streams.

Every consumer of randomness in a run derives its generator from the run's
root seed plus a stable string label ("lhs-init", "rfm-freq:3", "weights:17",
"hyperopt:0", ...).  Adding a consumer therefore never shifts the draws seen
by existing consumers, which keeps traces stable across refactors.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def child_seed(root_seed: int, label: str) -> np.random.SeedSequence:
    """Seed sequence for a labeled child stream of ``root_seed``."""
    return np.random.SeedSequence([int(root_seed), _label_entropy(label)])


def child_rng(root_seed: int, label: str) -> np.random.Generator:
    """Generator for a labeled child stream of ``root_seed``."""
    return np.random.Generator(np.random.PCG64(child_seed(root_seed, label)))
