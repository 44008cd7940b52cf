"""Event sequences, exponential-kernel Hawkes components and their mixtures.

The impact function of every component is ``phi[c, c'](t) = A[c, c'] * beta *
exp(-beta * t)``, so ``A[c, c']`` is the expected number of type-``c``
offspring of one type-``c'`` event and the compensator has a closed form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DomainError,
    SingularLikelihoodError,
    TypeIndexError,
    UndefinedEasinessError,
)

ORIGINS = ("observed", "superposed", "stitched")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Typed events observed on the window ``(0, T]``.

    Parameters
    ----------
    times : array_like
        Strictly increasing event times with ``0 < t <= T``.
    types : array_like of int
        Event types, each in ``0..n_types-1``.
    T : float
        Window length.
    n_types : int
        Number of event types ``C`` of the process the sequence belongs to.
    id : str
        Opaque identifier.
    origin : {"observed", "superposed", "stitched"}
    """

    times: np.ndarray
    types: np.ndarray
    T: float
    n_types: int
    id: str = ""
    origin: str = "observed"

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        types = np.array(self.types, dtype=np.int64).reshape(-1)
        T = float(self.T)
        if times.shape != types.shape:
            raise ValueError("times and types must have the same length")
        if not (np.isfinite(T) and T >= 0):
            raise DomainError(f"horizon must be finite and >= 0, got {T}")
        if self.n_types < 1:
            raise ValueError("n_types must be >= 1")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise DomainError("event times must be finite")
            if times[0] <= 0 or times[-1] > T:
                raise DomainError("event times must lie in (0, T]")
            if np.any(np.diff(times) <= 0):
                raise DomainError("event times must be strictly increasing")
            if types.min() < 0 or types.max() >= self.n_types:
                raise TypeIndexError(f"event types must lie in 0..{self.n_types - 1}")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "types", _frozen(types))
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "n_types", int(self.n_types))

    @classmethod
    def from_events(cls, events: Iterable[Sequence[float]], T: float, n_types: int, **kw) -> "EventSequence":
        events = list(events)
        times = [float(e[0]) for e in events]
        types = [int(e[1]) for e in events]
        return cls(times, types, T, n_types, **kw)

    @property
    def events(self) -> list[tuple[float, int]]:
        return [(float(t), int(c)) for t, c in zip(self.times, self.types)]

    def __len__(self) -> int:
        return int(self.times.size)

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return (
            self.T == other.T
            and self.n_types == other.n_types
            and self.id == other.id
            and self.origin == other.origin
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.types, other.types)
        )

    __hash__ = None

    def type_counts(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.n_types)


@dataclass(frozen=True, eq=False)
class HawkesParams:
    """One multivariate Hawkes component with exponential decay ``beta``."""

    mu: np.ndarray
    A: np.ndarray
    beta: float

    def __post_init__(self):
        mu = np.array(self.mu, dtype=np.float64).reshape(-1)
        A = np.array(self.A, dtype=np.float64)
        C = mu.size
        if C < 1:
            raise ValueError("mu must have at least one entry")
        if A.shape != (C, C):
            raise ValueError(f"A must be {C}x{C}, got shape {A.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(A))):
            raise DomainError("parameters must be finite")
        if np.any(mu < 0) or np.any(A < 0):
            raise DomainError("mu and A must be nonnegative")
        beta = float(self.beta)
        if not (np.isfinite(beta) and beta > 0):
            raise DomainError(f"beta must be positive, got {beta}")
        object.__setattr__(self, "mu", _frozen(mu))
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "beta", beta)

    @property
    def n_types(self) -> int:
        return int(self.mu.size)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def is_stationary(self) -> bool:
        return self.spectral_radius() < 1.0

    def check_stationarity(self) -> bool:
        """Warn (but do not fail) when the branching matrix is supercritical."""
        ok = self.is_stationary()
        if not ok:
            warnings.warn(
                f"spectral radius of A is {self.spectral_radius():.3g} >= 1; "
                "the process is not stationary",
                RuntimeWarning,
                stacklevel=2,
            )
        return ok

    def stationary_rates(self) -> np.ndarray:
        """Long-run event rate per type, ``(I - A)^{-1} mu``."""
        return np.linalg.solve(np.eye(self.n_types) - self.A, self.mu)

    def __eq__(self, other):
        if not isinstance(other, HawkesParams):
            return NotImplemented
        return self.beta == other.beta and np.array_equal(self.mu, other.mu) and np.array_equal(self.A, other.A)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """K Hawkes components sharing ``C`` and ``beta``, with mixing weights ``pi``."""

    components: tuple
    pi: np.ndarray = field(default=None)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if self.pi is None:
            pi = np.full(len(comps), 1.0 / len(comps))
        else:
            pi = np.array(self.pi, dtype=np.float64).reshape(-1)
        if pi.size != len(comps):
            raise ValueError("pi must have one entry per component")
        if np.any(pi < 0) or not np.all(np.isfinite(pi)):
            raise DomainError("pi must be nonnegative and finite")
        if abs(pi.sum() - 1.0) > 1e-8:
            raise DomainError(f"pi must sum to 1, got {pi.sum()!r}")
        C, beta = comps[0].n_types, comps[0].beta
        for p in comps[1:]:
            if p.n_types != C or p.beta != beta:
                raise ValueError("all components must share C and beta")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "pi", _frozen(pi))

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def n_types(self) -> int:
        return self.components[0].n_types

    @property
    def beta(self) -> float:
        return self.components[0].beta

    def __eq__(self, other):
        if not isinstance(other, MixtureModel):
            return NotImplemented
        return np.array_equal(self.pi, other.pi) and all(
            a == b for a, b in zip(self.components, other.components)
        ) and self.K == other.K

    __hash__ = None


def intensity(params: HawkesParams, seq: EventSequence, t: float, c: int) -> float:
    """Conditional intensity of type ``c`` at time ``t`` given events strictly before ``t``."""
    if not 0 <= c < params.n_types:
        raise TypeIndexError(f"type index {c} outside 0..{params.n_types - 1}")
    if not 0 <= t <= seq.T:
        raise DomainError(f"t={t} outside [0, {seq.T}]")
    past = seq.times < t
    dt = t - seq.times[past]
    excitation = params.A[c, seq.types[past]] * params.beta * np.exp(-params.beta * dt)
    return float(params.mu[c] + excitation.sum())


def _check_compatible(params: HawkesParams, seq: EventSequence) -> None:
    if seq.n_types != params.n_types:
        raise TypeIndexError(
            f"sequence has {seq.n_types} types but the model has {params.n_types}"
        )


def event_intensities(params: HawkesParams, seq: EventSequence) -> np.ndarray:
    """Intensity of each observed event's own type just before it occurs.

    Direct pairwise evaluation: ``O(I^2)`` in the number of events.
    """
    t, c = seq.times, seq.types
    dt = t[:, None] - t[None, :]
    lower = np.tril(np.ones((t.size, t.size), dtype=bool), k=-1)
    kern = np.where(lower, params.beta * np.exp(-params.beta * np.where(lower, dt, 0.0)), 0.0)
    return params.mu[c] + (params.A[c[:, None], c[None, :]] * kern).sum(axis=1)


def compensator(params: HawkesParams, seq: EventSequence) -> float:
    """Closed-form ``sum_c int_0^T lambda_c(s) ds``."""
    tail = 1.0 - np.exp(-params.beta * (seq.T - seq.times))
    offspring = params.A.sum(axis=0)[seq.types]
    return float(params.mu.sum() * seq.T + np.dot(offspring, tail))


def component_loglik(params: HawkesParams, seq: EventSequence, strict: bool = False) -> float:
    """Exact log-likelihood of ``seq`` under a single Hawkes component.

    Returns ``-inf`` when some event has zero intensity, unless ``strict`` is
    set, in which case :class:`SingularLikelihoodError` is raised.
    """
    _check_compatible(params, seq)
    lam = event_intensities(params, seq)
    if np.any(lam <= 0):
        if strict:
            i = int(np.argmax(lam <= 0))
            raise SingularLikelihoodError(f"event {i} at t={seq.times[i]} has zero intensity")
        return -math.inf
    return float(np.log(lam).sum() - compensator(params, seq))


def component_logliks(model: MixtureModel, seq: EventSequence) -> np.ndarray:
    return np.array([component_loglik(p, seq) for p in model.components])


def mixture_loglik(model: MixtureModel, seq: EventSequence) -> float:
    """``log sum_k pi_k p(s | component k)`` evaluated in log space."""
    ll = component_logliks(model, seq)
    with np.errstate(divide="ignore"):
        terms = np.log(model.pi) + ll
    return _lse(terms)


def _lse(x: np.ndarray) -> float:
    if not np.any(np.isfinite(x)):
        return -math.inf
    return float(logsumexp(x))


def _check_nonempty(seq: EventSequence) -> int:
    n = len(seq)
    if n == 0:
        raise UndefinedEasinessError("easiness is undefined for an empty sequence")
    return n


def easiness_hard(model: MixtureModel, seq: EventSequence) -> float:
    """Best per-event component log-likelihood; mixing weights play no role."""
    n = _check_nonempty(seq)
    return float(np.max(component_logliks(model, seq)) / n)


def easiness_smooth(model: MixtureModel, seq: EventSequence) -> float:
    """Log-sum-exp relaxation of :func:`easiness_hard`.

    Lies in ``[hard, hard + log(K) / I]``.
    """
    n = _check_nonempty(seq)
    return smooth_max_per_event(component_logliks(model, seq), n)


def smooth_max_per_event(ll: np.ndarray, n_events) -> np.ndarray:
    """``logsumexp(ll, axis=-1) / n_events``, split as ``max/n + log(sum)/n``.

    The split keeps ``hard <= smooth <= hard + log(K)/n`` exact in floating point.
    """
    ll = np.asarray(ll, dtype=np.float64)
    m = np.max(ll, axis=-1)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.exp(ll - np.expand_dims(safe, -1)).sum(axis=-1)
        out = m / n_events + np.log(s) / n_events
    out = np.where(np.isfinite(m), out, m / n_events)
    return out if out.ndim else float(out)
