"""Batched likelihood evaluation and EM machinery over many short sequences.

Sequences are grouped into length buckets and padded, so every pass over the
data is a handful of dense numpy operations. The event term is evaluated by
the direct pairwise sum, ``O(I^2)`` per sequence and component; only the
decay factors ``beta * exp(-beta * (t_i - t_j))``, which do not depend on the
fitted parameters, are cached.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import FitError, SingularLikelihoodError
from .model import EventSequence, HawkesParams, MixtureModel

log = logging.getLogger(__name__)


@dataclass
class _Bucket:
    index: np.ndarray  # positions in the batch
    types: np.ndarray  # (B, W)
    mask: np.ndarray  # (B, W) float 0/1
    pair: np.ndarray  # (B, W, W) flat index c_i * C + c_j
    kern: np.ndarray  # (B, W, W) strictly lower-triangular decay factors
    G: np.ndarray  # (B, C) sum over events of type c' of 1 - exp(-beta (T - t_j))
    T: np.ndarray  # (B,)


# largest number of (sequence, event, event) cells per bucket; keeps each
# pairwise array around 2 MB so passes stay cache-friendly
BUCKET_CELLS = 1 << 18


def _bucket_ranges(lengths: np.ndarray):
    order = np.argsort(lengths, kind="stable")
    start = 0
    while start < order.size:
        lo = lengths[order[start]]
        cap = max(int(lo * 1.25), lo + 4)
        stop = start
        while stop < order.size and lengths[order[stop]] <= cap:
            stop += 1
        width = int(lengths[order[stop - 1]])
        rows = max(1, BUCKET_CELLS // max(width * width, 1))
        for lo_row in range(start, stop, rows):
            yield order[lo_row:min(lo_row + rows, stop)]
        start = stop


class SequenceBatch:
    """Padded, bucketed view of a list of sequences for a fixed decay ``beta``."""

    def __init__(self, sequences, beta: float, n_types: int | None = None):
        self.sequences = list(sequences)
        if n_types is None:
            if not self.sequences:
                raise ValueError("n_types is required for an empty batch")
            n_types = self.sequences[0].n_types
        for s in self.sequences:
            if s.n_types != n_types:
                raise ValueError("all sequences in a batch must share the number of types")
        self.n_types = C = int(n_types)
        self.beta = float(beta)
        self.n_events = np.array([len(s) for s in self.sequences], dtype=np.int64)
        self.T = np.array([s.T for s in self.sequences], dtype=np.float64)
        self.buckets: list[_Bucket] = []
        for idx in _bucket_ranges(self.n_events):
            B, W = idx.size, int(self.n_events[idx].max())
            times = np.zeros((B, W))
            types = np.zeros((B, W), dtype=np.int64)
            mask = np.zeros((B, W))
            for r, n in enumerate(idx):
                s: EventSequence = self.sequences[n]
                k = len(s)
                times[r, :k] = s.times
                types[r, :k] = s.types
                mask[r, :k] = 1.0
            T = self.T[idx]
            valid = mask[:, :, None] * mask[:, None, :] * np.tri(W, W, -1)[None]
            dt = np.where(valid > 0, times[:, :, None] - times[:, None, :], 0.0)
            kern = np.where(valid > 0, self.beta * np.exp(-self.beta * dt), 0.0)
            tail = (1.0 - np.exp(-self.beta * (T[:, None] - times))) * mask
            G = np.zeros((B, C))
            for c in range(C):
                G[:, c] = (tail * (types == c)).sum(axis=1)
            pair = types[:, :, None] * C + types[:, None, :]
            self.buckets.append(_Bucket(idx, types, mask, pair, kern, G, T))

    def __len__(self):
        return len(self.sequences)

    # -- single component -------------------------------------------------

    def _component_pass(self, params: HawkesParams):
        """Per-bucket intensities and excitation terms for one component."""
        mu, Aflat = params.mu, params.A.ravel()
        out = []
        for b in self.buckets:
            exc = Aflat[b.pair] * b.kern
            lam = mu[b.types] + exc.sum(axis=2)
            lam = np.where(b.mask > 0, lam, 1.0)
            out.append((exc, lam))
        return out

    def _loglik_from_pass(self, params: HawkesParams, cache, strict=False) -> np.ndarray:
        ll = np.empty(len(self))
        colsum = params.A.sum(axis=0)
        total_mu = params.mu.sum()
        for b, (_, lam) in zip(self.buckets, cache):
            with np.errstate(divide="ignore"):
                logs = np.log(lam)
            if strict and np.any(lam <= 0):
                raise SingularLikelihoodError("an event has zero intensity")
            ll[b.index] = logs.sum(axis=1) - total_mu * b.T - b.G @ colsum
        return ll

    def component_loglik(self, params: HawkesParams, strict: bool = False) -> np.ndarray:
        return self._loglik_from_pass(params, self._component_pass(params), strict)

    def _weighted_stats(self, params: HawkesParams, cache, r: np.ndarray, inverse: bool = True):
        """Weighted sums needed by both the MM update and the gradient.

        Returns the background and parent attributions (numerators of the
        MM update), the inverse-intensity sums (gradient event terms) and the
        exposure terms. ``inverse=False`` skips the gradient sums (left at zero).
        """
        C = self.n_types
        mu = params.mu
        bg_num = np.zeros(C)
        par_num = np.zeros(C * C)
        inv_mu = np.zeros(C)
        inv_A = np.zeros(C * C)
        for b, (exc, lam) in zip(self.buckets, cache):
            rb = r[b.index]
            live = (lam > 0) & (b.mask > 0)
            if inverse:
                # 1 / lam can overflow on sequences the component does not explain; skip zero weights
                hot = live & (rb[:, None] != 0)
                with np.errstate(over="ignore", invalid="ignore"):
                    weighted = np.divide(1.0, lam, out=np.zeros_like(lam), where=hot) * rb[:, None]
                inv_mu += np.bincount(b.types.ravel(), weights=weighted.ravel(), minlength=C)
            # attribution shares are <= 1; form them before weighting to avoid overflow
            bg = np.divide(mu[b.types], lam, out=np.zeros_like(lam), where=live)
            bg_num += np.bincount(b.types.ravel(), weights=(bg * rb[:, None]).ravel(), minlength=C)
            if b.kern.shape[1]:
                share = np.divide(exc, lam[:, :, None], out=np.zeros_like(exc), where=live[:, :, None])
                par_num += np.bincount(b.pair.ravel(), weights=(share * rb[:, None, None]).ravel(), minlength=C * C)
                if inverse:
                    with np.errstate(over="ignore", invalid="ignore"):
                        terms = (b.kern * weighted[:, :, None]).ravel()
                    inv_A += np.bincount(b.pair.ravel(), weights=terms, minlength=C * C)
        exposure_mu = float(r @ self.T)
        exposure_A = np.zeros(C)
        for b in self.buckets:
            exposure_A += r[b.index] @ b.G
        return bg_num, par_num.reshape(C, C), inv_mu, inv_A.reshape(C, C), exposure_mu, exposure_A

    # -- mixtures -----------------------------------------------------------

    def evaluate(self, model: MixtureModel) -> "Evaluation":
        caches = [self._component_pass(p) for p in model.components]
        ll = np.column_stack(
            [self._loglik_from_pass(p, c) for p, c in zip(model.components, caches)]
        ) if len(self) else np.zeros((0, model.K))
        return Evaluation(self, model, ll, caches)

    def loglik_matrix(self, model: MixtureModel) -> np.ndarray:
        """Component log-likelihoods, shape ``(N, K)``."""
        return np.column_stack([self.component_loglik(p) for p in model.components])


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    ok = np.isfinite(m)
    with np.errstate(invalid="ignore"):
        e = np.exp(logits - np.where(ok, m, 0.0))
    s = e.sum(axis=1, keepdims=True)
    return np.where(ok, e / np.where(s > 0, s, 1.0), 0.0)


def _row_lse(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1)
    ok = np.isfinite(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.exp(logits - np.where(ok, m, 0.0)[:, None]).sum(axis=1)
        return np.where(ok, m + np.log(s), m)


class Evaluation:
    """A model evaluated on a batch: component log-likelihoods plus caches.

    The objective handled here is

        F = sum_n u_n log sum_k pi_k p_k(s_n) + sum_n v_n log sum_k p_k(s_n)

    i.e. a weighted mixture log-likelihood plus a weighted smooth-max term
    that ignores the mixing weights.
    """

    def __init__(self, batch: SequenceBatch, model: MixtureModel, ll: np.ndarray, caches):
        self.batch = batch
        self.model = model
        self.ll = ll
        self._caches = caches

    def _log_joint(self):
        with np.errstate(divide="ignore"):
            return np.log(self.model.pi)[None, :] + self.ll

    def mixture_loglik(self) -> np.ndarray:
        return _row_lse(self._log_joint())

    def smooth_loglik(self) -> np.ndarray:
        return _row_lse(self.ll)

    def objective(self, u: np.ndarray, v: np.ndarray | None = None) -> float:
        f = _weighted_sum(u, self.mixture_loglik())
        if v is not None:
            f += _weighted_sum(v, self.smooth_loglik())
        return float(f)

    def component_weights(self, u, v=None) -> tuple[np.ndarray, np.ndarray]:
        """Per (sequence, component) weights r and the mixing responsibility mass."""
        gamma = _softmax_rows(self._log_joint())
        r = u[:, None] * gamma
        if v is not None:
            r = r + v[:, None] * _softmax_rows(self.ll)
        return r, u @ gamma

    def m_step(self, u, v=None) -> MixtureModel:
        """One EM iteration whose component update is the branching-structure MM step.

        For a component with sequence weights ``r``, each event's intensity is
        split into background and parent contributions; the update divides the
        weighted attributions by the weighted exposures. It preserves
        nonnegativity and never decreases the objective.
        """
        r, mass = self.component_weights(u, v)
        total = float(np.sum(u))
        new = []
        for k, (p, cache) in enumerate(zip(self.model.components, self._caches)):
            bg, par, _, _, exp_mu, exp_A = self.batch._weighted_stats(p, cache, r[:, k], inverse=False)
            mu = bg / exp_mu if exp_mu > 0 else p.mu
            with np.errstate(divide="ignore", invalid="ignore"):
                A = np.where(exp_A[None, :] > 0, par / exp_A[None, :], p.A)
            new.append(HawkesParams(mu, A, p.beta))
        pi = mass / total if total > 0 else self.model.pi
        pi = np.clip(pi, 0.0, None)
        return MixtureModel(tuple(new), pi / pi.sum())

    def gradient(self, u, v=None) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradient of the objective w.r.t. each component's ``mu`` and ``A``."""
        r, _ = self.component_weights(u, v)
        grads = []
        for k, (p, cache) in enumerate(zip(self.model.components, self._caches)):
            _, _, inv_mu, inv_A, exp_mu, exp_A = self.batch._weighted_stats(p, cache, r[:, k])
            grads.append((inv_mu - exp_mu, inv_A - exp_A[None, :]))
        return grads


def _weighted_sum(w: np.ndarray, x: np.ndarray) -> float:
    nz = w != 0
    return float(np.dot(w[nz], x[nz]))


@dataclass
class EMResult:
    model: MixtureModel
    objective: list
    n_iter: int
    converged: bool


def _floor_base_rates(batch: SequenceBatch, model: MixtureModel, rel: float = 1e-8) -> MixtureModel:
    rate = max(float(batch.n_events.sum()) / max(float(batch.T.sum()), 1e-300), 1e-300)
    floor = rel * rate / model.n_types
    log.info("lifting zero base rates to %.3g before EM", floor)
    comps = tuple(HawkesParams(np.maximum(p.mu, floor), p.A, p.beta) for p in model.components)
    return MixtureModel(comps, model.pi)


def run_em(batch: SequenceBatch, model: MixtureModel, u, v=None, max_iter=200, tol=1e-6) -> EMResult:
    """Iterate EM from ``model`` until the relative objective change drops below ``tol``."""
    u = np.asarray(u, dtype=np.float64)
    v = None if v is None else np.asarray(v, dtype=np.float64)
    ev = batch.evaluate(model)
    f = ev.objective(u, v)
    if f == -np.inf:
        # a warm start can carry a zero base rate for a type that the newly
        # weighted data contains; lift such rates to a tiny positive floor
        model = _floor_base_rates(batch, model)
        ev = batch.evaluate(model)
        f = ev.objective(u, v)
    if not np.isfinite(f):
        raise FitError(f"non-finite objective {f} at the starting point")
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        model = ev.m_step(u, v)
        ev = batch.evaluate(model)
        f_new = ev.objective(u, v)
        if not np.isfinite(f_new):
            raise FitError(f"non-finite objective {f_new} after EM iteration {it}")
        history.append(f_new)
        done = abs(f_new - f) <= tol * abs(f)
        f = f_new
        if done:
            converged = True
            break
    return EMResult(model, history, it, converged)
