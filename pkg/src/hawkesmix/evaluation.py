"""Held-out metrics, the multi-trial benchmark and the complexity probe."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import SequenceBatch
from .errors import HawkesError
from .learning import AsplConfig, FitReport, _AsplState, _outer_iteration, aspl_fit, mle_fit, spl_fit
from .model import EventSequence, MixtureModel
from .simulate import SimConfig, make_rng, simulate_mixture

log = logging.getLogger(__name__)

METHODS = ("mle", "spl", "aspl")
JOBS_ENV = "HAWKESMIX_JOBS"


def per_event_loglik(model: MixtureModel, sequences) -> np.ndarray:
    """Mixture log-likelihood divided by the event count; ``nan`` for empty sequences."""
    sequences = list(sequences)
    if not sequences:
        return np.zeros(0)
    batch = SequenceBatch(sequences, model.beta, model.n_types)
    ll = batch.evaluate(model).mixture_loglik()
    n = batch.n_events
    out = np.full(len(sequences), np.nan)
    out[n > 0] = ll[n > 0] / n[n > 0]
    return out


def test_loglike_detail(model: MixtureModel, test) -> tuple[float, int]:
    """Average per-event test log-likelihood and the number of empty sequences skipped."""
    vals = per_event_loglik(model, test)
    ok = ~np.isnan(vals)
    if not ok.any():
        raise HawkesError("every test sequence is empty; the metric is undefined")
    skipped = int((~ok).sum())
    if skipped:
        log.info("test_loglike skipped %d empty sequences", skipped)
    return float(np.mean(vals[ok])), skipped


def test_loglike(model: MixtureModel, test) -> float:
    """``mean_n log p(s_n) / I_n`` over nonempty test sequences."""
    return test_loglike_detail(model, test)[0]


test_loglike.__test__ = False
test_loglike_detail.__test__ = False


def assign_clusters(model: MixtureModel, sequences) -> list[int]:
    """MAP component per sequence, ``argmax_k log pi_k + log p_k(s)``; ties go to the lower index."""
    sequences = list(sequences)
    if not sequences:
        return []
    ll = SequenceBatch(sequences, model.beta, model.n_types).loglik_matrix(model)
    with np.errstate(divide="ignore"):
        score = np.log(model.pi)[None, :] + ll
    return [int(k) for k in np.argmax(score, axis=1)]


def purity(assignments, true_labels) -> float:
    a = np.asarray(assignments)
    y = np.asarray(true_labels)
    if a.shape != y.shape:
        raise ValueError(f"length mismatch: {a.size} assignments vs {y.size} labels")
    if a.size == 0:
        raise ValueError("purity of an empty assignment is undefined")
    total = 0
    for k in np.unique(a):
        total += np.bincount(y[a == k]).max()
    return total / a.size


def selection_enrichment(report: FitReport, labels, iteration: int = 0) -> float:
    """Fraction of same-label pairs among the candidates selected in one outer iteration."""
    labels = np.asarray(labels)
    pairs = report.records[iteration].selected_pairs
    return float(np.mean([labels[i] == labels[j] for i, j in pairs]))


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    method: str
    loglike: float
    purity: float
    seconds: float
    report: FitReport | None = None
    model: MixtureModel | None = None
    train_labels: list | None = None


@dataclass
class MethodSummary:
    method: str
    mean_loglike: float
    ci95: float | None
    mean_purity: float | None
    mean_seconds: float
    n_trials: int


@dataclass
class BenchmarkResult:
    rows: list
    trials: list = field(default_factory=list)

    def by_method(self, method: str) -> list:
        return [t for t in self.trials if t.method == method]

    def loglikes(self, method: str) -> np.ndarray:
        return np.array([t.loglike for t in sorted(self.by_method(method), key=lambda t: t.trial)])


def _seed_for(seed: int, *key: int) -> int:
    return int(make_rng(seed, *key).integers(0, 2**63 - 1))


def _fit(method: str, train, cfg: AsplConfig):
    if method == "mle":
        return mle_fit(train, K=cfg.K, beta=cfg.beta, seed=cfg.seed), None
    if method == "spl":
        return spl_fit(train, cfg)
    if method == "aspl":
        return aspl_fit(train, cfg)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _split(n: int, train_fraction: float, seed: int, trial: int):
    perm = make_rng(seed, 21, trial).permutation(n)
    n_train = int(round(train_fraction * n))
    if not 0 < n_train < n:
        raise ValueError(f"split {train_fraction} leaves an empty train or test set for n={n}")
    return perm[:n_train], perm[n_train:]


def run_trial(trial: int, sequences, labels, methods, train_fraction, seed, config, sim=None):
    """Fit every method on one random split; all methods share the split."""
    if sim is not None:
        ds = simulate_mixture(replace(sim, seed=_seed_for(seed, 41, trial)))
        sequences, labels = ds.sequences, ds.labels
    tr, te = _split(len(sequences), train_fraction, seed, trial)
    train = [sequences[i] for i in tr]
    test = [sequences[i] for i in te]
    cfg = replace(config, seed=_seed_for(seed, 31, trial))
    out = []
    for method in methods:
        start = time.perf_counter()
        try:
            model, report = _fit(method, train, cfg)
        except HawkesError as err:
            raise type(err)(f"trial {trial}, method {method}: {err}") from err
        seconds = time.perf_counter() - start
        ll = test_loglike(model, test)
        pur = float("nan")
        if labels is not None:
            pur = purity(assign_clusters(model, test), [labels[i] for i in te])
        out.append(TrialResult(
            trial, method, ll, pur, seconds, report, model,
            None if labels is None else [int(labels[i]) for i in tr],
        ))
    return out


def _summarise(method: str, trials: list) -> MethodSummary:
    ll = np.array([t.loglike for t in trials])
    pur = np.array([t.purity for t in trials])
    ci = 1.96 * ll.std(ddof=1) / math.sqrt(ll.size) if ll.size > 1 else None
    return MethodSummary(
        method,
        float(ll.mean()),
        None if ci is None else float(ci),
        None if np.all(np.isnan(pur)) else float(np.nanmean(pur)),
        float(np.mean([t.seconds for t in trials])),
        int(ll.size),
    )


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def benchmark(trials: int, data=None, sim: SimConfig | None = None, methods=METHODS, train_fraction: float = 0.5,
              seed: int = 0, config: AsplConfig | None = None, n_jobs: int | None = None) -> BenchmarkResult:
    """Compare fitting strategies over random train/test splits.

    Parameters
    ----------
    trials : int
        Number of random splits; each trial also draws its own fitting seed.
    data : tuple (sequences, labels) or None
        Fixed dataset to split. ``labels`` may be None.
    sim : SimConfig or None
        Alternative to ``data``: a fresh dataset is simulated for every trial.
    methods : iterable of {"mle", "spl", "aspl"}
    train_fraction : float
    seed : int
    config : AsplConfig
        Shared settings (K, beta, alpha, ...); the seed field is overridden per trial.
    n_jobs : int
        Worker processes; defaults to the ``HAWKESMIX_JOBS`` environment variable or 1.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    if (data is None) == (sim is None):
        raise ValueError("pass exactly one of data or sim")
    config = config or AsplConfig()
    sequences, labels = (None, None) if data is None else data
    n_jobs = default_jobs() if n_jobs is None else n_jobs
    args = [(t, sequences, labels, methods, train_fraction, seed, config, sim) for t in range(trials)]
    if n_jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(run_trial, *zip(*args)))
    else:
        chunks = [run_trial(*a) for a in args]
    flat = [r for chunk in chunks for r in chunk]
    rows = [_summarise(m, [r for r in flat if r.method == m]) for m in methods]
    return BenchmarkResult(rows, flat)


CSV_COLUMNS = ("method", "mean_loglike", "ci95", "mean_purity", "mean_seconds")


def _fmt(x, timing=True):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "n/a"
    return repr(float(x))


def result_rows(result: BenchmarkResult, timing: bool = True) -> list[list[str]]:
    return [
        [r.method, _fmt(r.mean_loglike), _fmt(r.ci95), _fmt(r.mean_purity),
         _fmt(r.mean_seconds) if timing else "n/a"]
        for r in result.rows
    ]


def write_csv(result: BenchmarkResult, path, timing: bool = True) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(result_rows(result, timing))


def format_table(result: BenchmarkResult, timing: bool = True) -> str:
    rows = [list(CSV_COLUMNS)]
    for r in result.rows:
        rows.append([
            r.method,
            f"{r.mean_loglike:.4f}",
            "n/a" if r.ci95 is None else f"{r.ci95:.4f}",
            "n/a" if r.mean_purity is None else f"{r.mean_purity:.3f}",
            f"{r.mean_seconds:.2f}" if timing else "n/a",
        ])
    widths = [max(len(row[i]) for row in rows) for i in range(len(CSV_COLUMNS))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows)


# ---------------------------------------------------------------------------
# complexity probe
# ---------------------------------------------------------------------------


def _fixed_length_sequences(N: int, I: int, C: int, rng) -> list:
    seqs = []
    for n in range(N):
        times = np.sort(rng.uniform(0, I, size=I))
        types = rng.integers(0, C, size=I)
        seqs.append(EventSequence(times, types, float(I), C, id=f"p{n}"))
    return seqs


def time_outer_iteration(I: int, K: int, N: int, M: int, C: int = 2, seed: int = 0, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall time of one ASPL outer iteration on ``N`` sequences of ``I`` events.

    EM runs exactly ``M`` iterations (no early stopping) and the inner
    alternation runs once, so the work is fixed by ``(I, K, N, M)``.
    """
    originals = _fixed_length_sequences(N, I, C, make_rng(seed, 51, I, N))
    cfg = AsplConfig(K=K, beta=1.0, em_iters=M, em_tol=-1.0, inner_max_iters=1, seed=seed)
    best = math.inf
    for r in range(repeats):
        state = _AsplState(originals, cfg)
        start = time.perf_counter()
        _outer_iteration(state, make_rng(seed, 52, r))
        best = min(best, time.perf_counter() - start)
    return best


@dataclass
class ProbeRow:
    I: int
    K: int
    N: int
    M: int
    seconds: float


def complexity_probe(I_values, K: int = 2, N: int = 32, M: int = 20, seed: int = 0, repeats: int = 3) -> list:
    """Time one outer iteration for each ``I`` in ``I_values`` with the rest fixed."""
    I_values = list(I_values)
    if len(I_values) < 3:
        raise ValueError("need at least three values of I")
    return [ProbeRow(I, K, N, M, time_outer_iteration(I, K, N, M, seed=seed, repeats=repeats)) for I in I_values]


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
