import random

import numpy as np
import pytest

from engagekit.core import ActionSegment, ActionSequence, TimeSpan, default_dictionary
from engagekit.fewshot import EmbeddingBatch


@pytest.fixture(scope="session")
def dictionary():
    return default_dictionary()


def make_random_sequence(
    rng: random.Random,
    n_frames: int = 1800,
    fps: float = 15.0,
    max_segments: int = 10,
    n_labels: int = 13,
    student_id: str = "",
) -> ActionSequence:
    """Random fused sequence covering [0, n_frames) with <= max_segments parts."""
    k = rng.randint(1, min(max_segments, n_frames))
    cuts = sorted(rng.sample(range(1, n_frames), k - 1)) if k > 1 else []
    bounds = [0] + cuts + [n_frames]
    labels: list[int] = []
    for _ in range(k):
        lab = rng.randrange(n_labels)
        while labels and lab == labels[-1] and n_labels > 1:
            lab = rng.randrange(n_labels)
        labels.append(lab)
    segments = [
        ActionSegment(labels[i], TimeSpan(bounds[i], bounds[i + 1], fps))
        for i in range(k)
    ]
    return ActionSequence(tuple(segments), student_id)


def make_second_aligned_sequence(
    rng: random.Random,
    n_seconds: int = 120,
    fps: float = 15.0,
    max_segments: int = 10,
    n_labels: int = 13,
) -> ActionSequence:
    """Random fused sequence whose boundaries all fall on whole seconds."""
    k = rng.randint(1, min(max_segments, n_seconds))
    cuts = sorted(rng.sample(range(1, n_seconds), k - 1)) if k > 1 else []
    bounds = [0] + cuts + [n_seconds]
    labels: list[int] = []
    for _ in range(k):
        lab = rng.randrange(n_labels)
        while labels and lab == labels[-1] and n_labels > 1:
            lab = rng.randrange(n_labels)
        labels.append(lab)
    segments = [
        ActionSegment(
            labels[i],
            TimeSpan(round(bounds[i] * fps), round(bounds[i + 1] * fps), fps),
        )
        for i in range(k)
    ]
    return ActionSequence(tuple(segments))


def make_random_batch(rng: np.random.Generator, n_max=8, c_max=13, d_max=32) -> EmbeddingBatch:
    n = int(rng.integers(1, n_max + 1))
    c = int(rng.integers(2, c_max + 1))
    d = int(rng.integers(1, d_max + 1))
    return EmbeddingBatch(
        video_embeddings=rng.normal(size=(n, d)),
        class_text_embeddings=rng.normal(size=(c, d)),
        labels=rng.integers(0, c, size=n),
        temperature=float(rng.uniform(0.07, 1.5)),
    )
