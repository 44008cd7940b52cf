"""Pairwise data augmentation: superposition and stitching of sequences."""

from __future__ import annotations

import numpy as np

from .errors import TypeIndexError
from .model import EventSequence

METHODS = ("superpose", "stitch")


def _check_types(s1: EventSequence, s2: EventSequence) -> None:
    if s1.n_types != s2.n_types:
        raise TypeIndexError(f"cannot combine sequences with {s1.n_types} and {s2.n_types} types")


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    """Nudge tied times up by one ulp at a time, keeping the given order."""
    times = times.copy()
    for i in range(1, times.size):
        if times[i] <= times[i - 1]:
            times[i] = np.nextafter(times[i - 1], np.inf)
    return times


def superpose(s1: EventSequence, s2: EventSequence) -> EventSequence:
    """Merge two sequences on the common window ``max(T1, T2)``.

    Tied times keep ``s1``'s event first and are separated by the smallest
    representable increment.
    """
    _check_types(s1, s2)
    times = np.concatenate([s1.times, s2.times])
    types = np.concatenate([s1.types, s2.types])
    order = np.argsort(times, kind="stable")
    times = _strictly_increasing(times[order])
    T = max(s1.T, s2.T)
    if times.size and times[-1] > T:
        T = float(times[-1])
    return EventSequence(times, types[order], T, s1.n_types, id=f"{s1.id}+{s2.id}", origin="superposed")


def stitch(s1: EventSequence, s2: EventSequence) -> EventSequence:
    """Append ``s2`` after ``s1``, shifting it by ``T1``; the window becomes ``T1 + T2``."""
    _check_types(s1, s2)
    times = _strictly_increasing(np.concatenate([s1.times, s2.times + s1.T]))
    T = s1.T + s2.T
    if times.size and times[-1] > T:
        T = float(times[-1])
    types = np.concatenate([s1.types, s2.types])
    return EventSequence(times, types, T, s1.n_types, id=f"{s1.id}|{s2.id}", origin="stitched")


def sample_pairs(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` pairs of distinct indices in ``0..n-1``, uniform, with replacement across pairs."""
    if n < 2:
        raise ValueError("need at least two sequences to form pairs")
    first = rng.integers(0, n, size=count)
    second = rng.integers(0, n - 1, size=count)
    second = second + (second >= first)
    return np.column_stack([first, second]).astype(np.int64)


def combine(s1: EventSequence, s2: EventSequence, method: str) -> EventSequence:
    if method == "superpose":
        return superpose(s1, s2)
    if method == "stitch":
        return stitch(s1, s2)
    raise ValueError(f"unknown augmentation method {method!r}; expected one of {METHODS}")


def make_candidates(originals, method: str, count: int | None = None, rng=None, pairs=None):
    """Augmented candidate set built from random pairs of ``originals``.

    ``count`` defaults to ``len(originals)``. Pass ``pairs`` to reuse an
    already drawn pairing (as returned by :func:`sample_pairs`).
    """
    originals = list(originals)
    if len(originals) < 2:
        raise ValueError("augmentation needs at least two original sequences")
    if method not in METHODS:
        raise ValueError(f"unknown augmentation method {method!r}; expected one of {METHODS}")
    if pairs is None:
        if rng is None:
            raise ValueError("either rng or pairs is required")
        pairs = sample_pairs(len(originals), len(originals) if count is None else count, rng)
    return [combine(originals[i], originals[j], method) for i, j in pairs]
