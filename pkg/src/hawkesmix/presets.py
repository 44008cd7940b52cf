"""Ground-truth synthetic configurations shipped with the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HawkesParams, MixtureModel
from .simulate import SimConfig


@dataclass(frozen=True)
class Preset:
    name: str
    model: MixtureModel
    horizon: float
    n_sequences: int
    description: str = ""

    def sim_config(self, n: int | None = None, seed: int = 0, horizon: float | None = None) -> SimConfig:
        return SimConfig(self.model, self.n_sequences if n is None else n,
                         self.horizon if horizon is None else horizon, seed)


def _k2c2() -> Preset:
    # component 1 runs about four times faster than component 0 and favours
    # the other event type; the horizon gives about 8 events per sequence
    beta = 1.0
    c0 = HawkesParams([1.0, 0.3], [[0.3, 0.03], [0.03, 0.09]], beta)
    c1 = HawkesParams([1.2, 4.0], [[0.09, 0.03], [0.03, 0.3]], beta)
    return Preset("k2c2", MixtureModel((c0, c1), [0.5, 0.5]), 1.76, 400,
                  "two components with different dominant types and a fourfold rate gap")


def _k2c2_symmetric() -> Preset:
    beta = 1.0
    c0 = HawkesParams([0.8, 0.1], [[0.5, 0.0], [0.0, 0.1]], beta)
    c1 = HawkesParams([0.1, 0.8], [[0.1, 0.0], [0.0, 0.5]], beta)
    return Preset("k2c2-sym", MixtureModel((c0, c1), [0.5, 0.5]), 5.0, 400,
                  "mirror-image components with equal total rates")


def _k3c5() -> Preset:
    beta = 1.0
    comps = []
    for k in range(3):
        mu = np.full(5, 0.05)
        mu[k] = 0.5
        mu[k + 2] = 0.3
        A = np.full((5, 5), 0.02)
        A[k, k] = 0.4
        A[k + 2, k] = 0.2
        comps.append(HawkesParams(mu, A, beta))
    return Preset("k3c5", MixtureModel(tuple(comps), [0.4, 0.35, 0.25]), 6.0, 600,
                  "three components over five event types, unequal weights")


PRESETS = {p.name: p for p in (_k2c2(), _k2c2_symmetric(), _k3c5())}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
