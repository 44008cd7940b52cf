"""Mixture fitting: weighted EM, adversarial self-paced learning and baselines.

The adversarial self-paced objective over the candidate set ``S`` (fresh
augmented pairs) and the accumulated easy set ``E`` is

    sum_{s in S u E} log p(s) + alpha * sum_{n in S} [w_n e(s_n) + zeta (1 - w_n)]

with ``e`` the smooth per-event easiness. The model update maximises it for
fixed ``w``; the selection minimises it for fixed model, which amounts to
flagging the ``L`` candidates of lowest easiness.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .augment import METHODS, make_candidates, sample_pairs
from .engine import EMResult, SequenceBatch, run_em
from .errors import FitError
from .model import HawkesParams, MixtureModel, smooth_max_per_event
from .simulate import make_rng

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# initialisation and plain EM
# ---------------------------------------------------------------------------


def _kmeans(X: np.ndarray, w: np.ndarray, K: int, rng: np.random.Generator, n_iter: int = 20) -> np.ndarray:
    """Weighted k-means with k-means++ seeding; returns hard labels."""
    N = X.shape[0]
    p = w / w.sum()
    centers = [X[rng.choice(N, p=p)]]
    for _ in range(1, K):
        d2 = np.min([((X - c) ** 2).sum(axis=1) for c in centers], axis=0) * w
        if d2.sum() <= 0:
            centers.append(X[rng.choice(N, p=p)])
        else:
            centers.append(X[rng.choice(N, p=d2 / d2.sum())])
    centers = np.array(centers)
    labels = np.zeros(N, dtype=np.int64)
    for _ in range(n_iter):
        d = ((X[:, None, :] - centers[None]) ** 2).sum(axis=2)
        new = np.argmin(d, axis=1)
        if _ and np.array_equal(new, labels):
            break
        labels = new
        for k in range(K):
            m = (labels == k) & (w > 0)
            if m.any():
                centers[k] = np.average(X[m], axis=0, weights=w[m])
    return labels


def initial_model(sequences, K: int, beta: float, seed: int = 0, weights=None) -> MixtureModel:
    """Seed a mixture from k-means++ clusters of per-sequence type histograms.

    Each cluster's base rates are its empirical event rates, infectivities
    start at ``0.1 / C`` and the mixing weights are uniform.
    """
    sequences = list(sequences)
    C = sequences[0].n_types
    w = np.ones(len(sequences)) if weights is None else np.asarray(weights, dtype=np.float64)
    counts = np.array([s.type_counts() for s in sequences], dtype=np.float64)
    sizes = counts.sum(axis=1, keepdims=True)
    hist = np.divide(counts, sizes, out=np.zeros_like(counts), where=sizes > 0)
    T = np.array([s.T for s in sequences])
    labels = _kmeans(hist, w, K, make_rng(seed, 7))
    overall = (w @ counts) / max(float(w @ T), 1e-300)
    comps = []
    for k in range(K):
        m = labels == k
        exposure = float(w[m] @ T[m])
        rate = (w[m] @ counts[m]) / exposure if exposure > 0 else overall
        mu = np.maximum(rate, 1e-2 * overall)
        comps.append(HawkesParams(mu, np.full((C, C), 0.1 / C), beta))
    return MixtureModel(tuple(comps), np.full(K, 1.0 / K))


def _validate_weights(sequences, weights, K):
    w = np.ones(len(sequences)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (len(sequences),):
        raise ValueError("one weight per sequence is required")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if np.count_nonzero(w) < K:
        raise FitError(f"need at least K={K} sequences with nonzero weight, got {np.count_nonzero(w)}")
    return w


def fit_em(sequences, K: int, beta: float, weights=None, init=None, seed: int = 0,
           max_iter: int = 500, tol: float = 1e-7) -> EMResult:
    """Weighted maximum-likelihood mixture fit by EM; returns the full :class:`EMResult`."""
    sequences = list(sequences)
    if not sequences:
        raise FitError("cannot fit an empty dataset")
    w = _validate_weights(sequences, weights, K)
    if init is None:
        init = initial_model(sequences, K, beta, seed, w)
    elif init.K != K:
        raise ValueError(f"init has K={init.K}, expected {K}")
    batch = SequenceBatch(sequences, init.beta)
    return run_em(batch, init, w, max_iter=max_iter, tol=tol)


def mle_fit(sequences, weights=None, K: int = 2, beta: float = 1.0, init=None, seed: int = 0,
            max_iter: int = 500, tol: float = 1e-7) -> MixtureModel:
    """Locally maximise ``sum_n weight_n log p(s_n)`` over nonnegative parameters."""
    return fit_em(sequences, K, beta, weights, init, seed, max_iter, tol).model


# ---------------------------------------------------------------------------
# configuration and reporting
# ---------------------------------------------------------------------------


@dataclass
class AsplConfig:
    K: int = 2
    beta: float = 1.0
    alpha: float = 10.0
    augment_method: str = "superpose"
    easy_target: float = 2.0  # stop once |S_easy| >= easy_target * N
    select_fraction: float = 0.25  # L = floor(select_fraction * sum(pi^2) * |S|)
    n_augment: int | None = None  # candidates per outer iteration, default N
    inner_max_iters: int = 10
    inner_tol: float = 1e-4
    em_iters: int = 200
    em_tol: float = 1e-6
    spl_target: float = 1.0  # SPL stops once it holds spl_target * N originals
    rescale_superposed: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.augment_method not in METHODS:
            raise ValueError(f"augment_method must be one of {METHODS}")
        if not self.easy_target > 0 or not 0 < self.spl_target <= 1:
            raise ValueError("targets must be positive (spl_target at most 1)")


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    easy_size: int
    L: int
    zeta: float
    seconds: float
    inner_iters: int
    inner_converged: bool
    selected_pairs: list = field(default_factory=list)


@dataclass
class FitReport:
    strategy: str
    n_originals: int
    target: int
    records: list = field(default_factory=list)
    model: MixtureModel | None = None
    converged: bool = True
    warnings: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def objectives(self) -> list:
        return [r.objective for r in self.records]

    @property
    def easy_sizes(self) -> list:
        return [r.easy_size for r in self.records]

    def check_invariants(self) -> None:
        """Raise ``AssertionError`` unless the outer loop made valid progress and halted."""
        prev = 0
        for r in self.records:
            if not math.isfinite(r.objective):
                raise AssertionError(f"iteration {r.iteration}: non-finite objective")
            if r.L < 1:
                raise AssertionError(f"iteration {r.iteration}: L={r.L} < 1")
            if r.easy_size - prev != r.L:
                raise AssertionError(
                    f"iteration {r.iteration}: easy set grew by {r.easy_size - prev}, expected L={r.L}"
                )
            prev = r.easy_size
        if prev < self.target:
            raise AssertionError(f"loop ended with {prev} easy sequences, target {self.target}")

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy,
            "n_originals": self.n_originals,
            "target": self.target,
            "converged": self.converged,
            "warnings": list(self.warnings),
            "seconds": self.seconds,
            "iterations": [asdict(r) for r in self.records],
        }
        for it in d["iterations"]:
            it["selected_pairs"] = [list(map(int, p)) for p in it["selected_pairs"]]
        return d


# ---------------------------------------------------------------------------
# selection, objective and model update
# ---------------------------------------------------------------------------


@dataclass
class SelectionState:
    w: np.ndarray
    easiness: np.ndarray
    zeta: float
    L: int
    iteration: int = 0

    @property
    def selected(self) -> np.ndarray:
        return np.flatnonzero(self.w)


def selection_budget(pi_hat, n_candidates: int, fraction: float = 0.25) -> int:
    """``floor(fraction * sum(pi^2) * n)``, without clamping."""
    pi_hat = np.asarray(pi_hat, dtype=np.float64)
    return int(math.floor(fraction * float(pi_hat @ pi_hat) * n_candidates + 1e-9))


def candidate_easiness(batch: SequenceBatch, model: MixtureModel, ll=None) -> np.ndarray:
    """Smooth easiness per sequence; ``+inf`` for empty ones so they are never selected."""
    if ll is None:
        ll = batch.loglik_matrix(model)
    n = batch.n_events
    out = np.full(len(batch), np.inf)
    ok = n > 0
    out[ok] = smooth_max_per_event(ll[ok], n[ok])
    return out


def select_from_easiness(easiness, pi_hat, fraction: float = 0.25, iteration: int = 0,
                         lowest: bool = True) -> SelectionState:
    """Flag the ``L`` lowest (or highest) easiness values; ties go to the lower index."""
    e = np.asarray(easiness, dtype=np.float64)
    valid = np.isfinite(e)
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise FitError("no candidate has a defined easiness")
    L = selection_budget(pi_hat, e.size, fraction)
    if L < 1:
        log.warning("selection budget floor(%.3g * sum(pi^2) * %d) is 0; using L=1", fraction, e.size)
    L = min(max(L, 1), n_valid)
    key = np.where(valid, e if lowest else -e, np.inf)
    order = np.argsort(key, kind="stable")
    w = np.zeros(e.size, dtype=np.int8)
    w[order[:L]] = 1
    return SelectionState(w, e, float(e[order[L - 1]]), L, iteration)


def select_easy(candidates, model: MixtureModel, pi_hat=None, fraction: float = 0.25) -> SelectionState:
    """Adversarial selection: the ``L`` candidates the model finds hardest.

    ``L = floor(fraction * sum_k pi_k^2 * |candidates|)`` clamped to at least
    one; ``zeta`` is the ``L``-th smallest easiness.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to select from")
    pi_hat = model.pi if pi_hat is None else pi_hat
    batch = SequenceBatch(candidates, model.beta)
    return select_from_easiness(candidate_easiness(batch, model), pi_hat, fraction)


def _regulariser_weights(batch: SequenceBatch, n_cand: int, w, alpha: float) -> np.ndarray:
    v = np.zeros(len(batch))
    n = batch.n_events[:n_cand]
    w = np.asarray(w, dtype=np.float64)
    v[:n_cand] = np.where(n > 0, alpha * w / np.maximum(n, 1), 0.0)
    return v


def _objective_from_eval(ev, n_cand, w, alpha, zeta) -> float:
    """Max-min objective value from an already evaluated union batch (candidates first)."""
    u = np.ones(len(ev.batch))
    f = ev.objective(u)
    if alpha:
        w = np.asarray(w, dtype=np.float64)
        e = candidate_easiness(ev.batch, ev.model, ev.ll)[:n_cand]
        picked = w > 0
        f += alpha * (float(np.sum(e[picked])) + zeta * float(np.sum(1 - w)))
    return float(f)


def aspl_objective(model: MixtureModel, candidates, easy_set, w, alpha: float, zeta: float) -> float:
    """Value of the max-min objective at ``(model, w)`` for threshold ``zeta``."""
    candidates, easy_set = list(candidates), list(easy_set)
    batch = SequenceBatch(candidates + easy_set, model.beta, model.n_types)
    return _objective_from_eval(batch.evaluate(model), len(candidates), w, alpha, zeta)


def _update(batch, n_cand, w, alpha, model, cfg) -> EMResult:
    v = _regulariser_weights(batch, n_cand, w, alpha) if alpha else None
    return run_em(batch, model, np.ones(len(batch)), v, max_iter=cfg.em_iters, tol=cfg.em_tol)


def update_model(candidates, easy_set, w_hat, alpha: float, K: int, warm_start: MixtureModel | None = None,
                 beta: float | None = None, em_iters: int = 200, em_tol: float = 1e-6, seed: int = 0) -> MixtureModel:
    """Maximise log-likelihood on ``candidates + easy_set`` plus ``alpha * sum w_n easiness_n``.

    The easiness term enters EM as an extra weight ``alpha * w_n / I_n`` on
    candidate ``n``, distributed over components by likelihood alone.
    """
    candidates, easy_set = list(candidates), list(easy_set)
    union = candidates + easy_set
    if warm_start is None:
        if beta is None:
            raise ValueError("beta is required without a warm start")
        warm_start = initial_model(union, K, beta, seed)
    batch = SequenceBatch(union, warm_start.beta)
    cfg = AsplConfig(K=K, beta=warm_start.beta, alpha=alpha, em_iters=em_iters, em_tol=em_tol)
    return _update(batch, len(candidates), w_hat, alpha, warm_start, cfg).model


def objective_gradient(model: MixtureModel, candidates, easy_set, w, alpha: float):
    """Gradient of the model-update objective w.r.t. every component's ``mu`` and ``A``."""
    candidates, easy_set = list(candidates), list(easy_set)
    batch = SequenceBatch(candidates + easy_set, model.beta, model.n_types)
    v = _regulariser_weights(batch, len(candidates), w, alpha)
    return batch.evaluate(model).gradient(np.ones(len(batch)), v)


# ---------------------------------------------------------------------------
# outer loops
# ---------------------------------------------------------------------------


def rescale_superposed(model: MixtureModel, factor: float = 2.0) -> MixtureModel:
    """Map a model of superposed pairs back to single sequences by dividing base rates."""
    comps = tuple(HawkesParams(p.mu / factor, p.A, p.beta) for p in model.components)
    return MixtureModel(comps, model.pi)


@dataclass
class _AsplState:
    originals: list
    cfg: AsplConfig
    model: MixtureModel | None = None
    easy: list = field(default_factory=list)
    m: int = 0


def _outer_iteration(state: _AsplState, rng) -> IterationRecord:
    """One pass of the outer loop: augment, alternate update/selection, grow the easy set."""
    cfg = state.cfg
    start = time.perf_counter()
    N = len(state.originals)
    pairs = sample_pairs(N, cfg.n_augment or N, rng)
    cands = make_candidates(state.originals, cfg.augment_method, pairs=pairs)
    batch = SequenceBatch(cands + state.easy, cfg.beta, state.originals[0].n_types)
    n_cand = len(cands)
    model = state.model
    if model is None:
        model = initial_model(batch.sequences, cfg.K, cfg.beta, cfg.seed)
    w = np.zeros(n_cand, dtype=np.int8)
    sel = None
    prev_obj = None
    converged = False
    inner = 0
    for inner in range(1, cfg.inner_max_iters + 1):
        res = _update(batch, n_cand, w, cfg.alpha, model, cfg)
        model = res.model
        ev = batch.evaluate(model)
        e = candidate_easiness(batch, model, ev.ll)[:n_cand]
        sel = select_from_easiness(e, model.pi, cfg.select_fraction, state.m)
        obj = _objective_from_eval(ev, n_cand, sel.w, cfg.alpha, sel.zeta)
        same = np.array_equal(sel.w, w)
        small = prev_obj is not None and abs(obj - prev_obj) <= cfg.inner_tol * abs(prev_obj)
        w = sel.w
        prev_obj = obj
        if same or small:
            converged = True
            break
    chosen = sel.selected
    state.easy.extend(cands[i] for i in chosen)
    state.model = model
    rec = IterationRecord(
        iteration=state.m,
        objective=float(prev_obj),
        easy_size=len(state.easy),
        L=sel.L,
        zeta=sel.zeta,
        seconds=time.perf_counter() - start,
        inner_iters=inner,
        inner_converged=converged,
        selected_pairs=[tuple(int(x) for x in pairs[i]) for i in chosen],
    )
    state.m += 1
    return rec


def aspl_fit(originals, config: AsplConfig | None = None):
    """Adversarial self-paced learning of a Hawkes mixture.

    Each outer iteration draws a fresh set of augmented pairs, alternates the
    regularised model update with adversarial selection until the selection
    stops changing, and moves the selected pairs into the easy set. The loop
    ends when the easy set holds ``easy_target * N`` sequences.

    Returns
    -------
    model : MixtureModel
    report : FitReport
    """
    cfg = config or AsplConfig()
    originals = list(originals)
    if len(originals) < 2:
        raise ValueError("ASPL needs at least two original sequences")
    N = len(originals)
    target = int(math.ceil(cfg.easy_target * N))
    report = FitReport("aspl", N, target)
    state = _AsplState(originals, cfg)
    rng = make_rng(cfg.seed, 11)
    t0 = time.perf_counter()
    while len(state.easy) < target:
        before = len(state.easy)
        try:
            rec = _outer_iteration(state, rng)
        except FitError as err:
            raise FitError(f"outer iteration {state.m}: {err}") from err
        assert len(state.easy) - before == rec.L >= 1
        report.records.append(rec)
        if not rec.inner_converged:
            report.converged = False
        log.info(
            "aspl iteration=%d objective=%.6g easy=%d L=%d zeta=%.6g inner=%d seconds=%.3f",
            rec.iteration, rec.objective, rec.easy_size, rec.L, rec.zeta, rec.inner_iters, rec.seconds,
        )
    model = state.model
    if cfg.rescale_superposed and cfg.augment_method == "superpose":
        model = rescale_superposed(model)
    if not report.converged:
        report.warnings.append("inner alternation hit inner_max_iters in some outer iteration")
    report.model = model
    report.seconds = time.perf_counter() - t0
    return model, report


def spl_fit(originals, config: AsplConfig | None = None):
    """Vanilla self-paced baseline on the original sequences.

    Starting from the seeded initial model, each round moves the ``L``
    remaining originals with the highest easiness into the training set and
    refits by plain EM, warm-started from the previous model.
    """
    cfg = config or AsplConfig()
    originals = list(originals)
    if len(originals) < 2:
        raise ValueError("SPL needs at least two original sequences")
    N = len(originals)
    target = int(math.ceil(cfg.spl_target * N))
    report = FitReport("spl", N, target)
    batch = SequenceBatch(originals, cfg.beta)
    model = initial_model(originals, cfg.K, cfg.beta, cfg.seed)
    chosen = np.zeros(N, dtype=bool)
    m = 0
    t0 = time.perf_counter()
    while chosen.sum() < target:
        start = time.perf_counter()
        e = candidate_easiness(batch, model)
        finite = np.isfinite(e)
        L = max(selection_budget(model.pi, N, cfg.select_fraction), 1)
        L = min(L, int((~chosen).sum()))
        # unchosen with defined easiness (highest first), then unchosen empty ones
        tier = np.where(chosen, 2, np.where(finite, 0, 1))
        order = np.lexsort((np.where(tier == 0, -e, 0.0), tier))[:L]
        chosen[order] = True
        picked = e[order]
        zeta = float(picked[np.isfinite(picked)].min()) if np.isfinite(picked).any() else float("nan")
        if chosen.sum() < cfg.K:
            obj = batch.evaluate(model).objective(chosen.astype(np.float64))
            report.records.append(IterationRecord(m, float(obj), int(chosen.sum()), L, zeta,
                                                  time.perf_counter() - start, 0, True))
            m += 1
            continue
        res = run_em(batch, model, chosen.astype(np.float64), max_iter=cfg.em_iters, tol=cfg.em_tol)
        model = res.model
        report.records.append(IterationRecord(m, float(res.objective[-1]), int(chosen.sum()), L, zeta,
                                              time.perf_counter() - start, res.n_iter, res.converged))
        if not res.converged:
            report.converged = False
        m += 1
    report.model = model
    report.seconds = time.perf_counter() - t0
    return model, report
