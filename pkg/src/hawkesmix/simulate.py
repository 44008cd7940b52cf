"""Synthetic data: Ogata thinning for one component, labeled mixture datasets.

Random streams come from numpy's counter-based Philox generator keyed by
``SeedSequence(seed, spawn_key=...)``; sequence ``n`` of a dataset always uses
the stream keyed ``(1, n)`` and the labels use ``(0,)``, so datasets can be
generated in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TruncationError
from .model import EventSequence, HawkesParams, MixtureModel

_SEED_MASK = (1 << 64) - 1


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the stream ``key`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def simulate_hp(
    params: HawkesParams,
    T: float,
    rng: np.random.Generator,
    max_events: int = 100_000,
    id: str = "",
) -> EventSequence:
    """Draw one sequence on ``(0, T]`` by Ogata's modified thinning.

    Between events the exponential kernels only decay, so the total
    intensity at the current time bounds the intensity until the next
    accepted event.
    """
    if not params.is_stationary():
        params.check_stationarity()
    C, beta = params.n_types, params.beta
    mu, A = params.mu, params.A
    excitation = np.zeros(C)
    t = 0.0
    times: list[float] = []
    types: list[int] = []
    while True:
        bound = mu.sum() + excitation.sum()
        if bound <= 0:
            break
        step = rng.exponential(1.0 / bound)
        t_next = t + step
        if t_next > T:
            break
        excitation *= np.exp(-beta * step)
        lam = mu + excitation
        u = rng.uniform() * bound
        t = t_next
        if u >= lam.sum() or (times and t <= times[-1]) or t <= 0:
            continue
        c = min(int(np.searchsorted(np.cumsum(lam), u, side="right")), C - 1)
        times.append(t)
        types.append(c)
        excitation += beta * A[:, c]
        if len(times) >= max_events:
            partial = EventSequence(times, types, T, C, id=id)
            raise TruncationError(f"max_events={max_events} reached at t={t:.6g}", partial=partial)
    return EventSequence(times, types, T, C, id=id)


@dataclass(frozen=True)
class SimConfig:
    model: MixtureModel
    n_sequences: int
    horizon: float
    seed: int = 0
    max_events: int = 10_000

    def __post_init__(self):
        if self.n_sequences < 1:
            raise ValueError("n_sequences must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be >= 1")


@dataclass(frozen=True)
class LabeledDataset:
    sequences: list
    labels: list
    config: SimConfig | None = None

    def __post_init__(self):
        if len(self.sequences) != len(self.labels):
            raise ValueError("sequences and labels differ in length")

    def __len__(self):
        return len(self.sequences)


def simulate_mixture(config: SimConfig) -> LabeledDataset:
    """Draw ``k_n ~ Categorical(pi)`` then ``s_n ~ HP(component k_n)`` for each ``n``."""
    model = config.model
    labels = make_rng(config.seed, 0).choice(model.K, size=config.n_sequences, p=model.pi)
    seqs = []
    for n, k in enumerate(labels):
        try:
            s = simulate_hp(
                model.components[k],
                config.horizon,
                make_rng(config.seed, 1, n),
                max_events=config.max_events,
                id=f"seq{n}",
            )
        except TruncationError as err:
            raise TruncationError(f"sequence {n}: {err}", partial=err.partial, index=n) from err
        seqs.append(s)
    return LabeledDataset(seqs, [int(k) for k in labels], config)
