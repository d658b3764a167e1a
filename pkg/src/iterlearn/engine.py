"""Generational loop, replicate fan-out, threshold runs and bottleneck sweeps."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache

import numpy as np

from .agents import (
    AUTO_DIRECTIONS,
    OBVERSION_MAX_N,
    ailm_train,
    make_auto_set,
    make_bottleneck,
    naive_agent,
    naive_pupil,
    oilm_train,
    oneway_train,
)
from .errors import ConfigError, IlmError
from .lang import MAX_N, LanguageTable
from .metrics import (
    BaselineEstimate,
    MetricTriple,
    compositionality,
    estimate_baseline,
    expressivity,
    pair_stability,
    sampled_metrics,
)
from .neural import LOSSES, REDUCTIONS, TrainConfig

log = logging.getLogger(__name__)

MODELS = ("oilm", "ailm", "oneway")
DEFAULT_ETA = {"oilm": 1.0, "ailm": 5.0, "oneway": 1.0}
RNG_ALGORITHM = "numpy.PCG64/blake2b-derived-seeds"
STREAMS = ("bottleneck", "init", "shuffle", "auto")


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "ailm"
    n: int = 8
    hidden: int | None = None
    bottleneck_size: int = 50
    auto_size: int | None = None
    auto_mode: str = "shared"
    auto_direction: str = "m2m"
    r: int = 20
    eta: float | None = None
    loss: str = "squared_error"
    reduction: str = "mean"
    epochs: int = 20
    generations: int = 40
    replicates: int = 25
    lam: float = 0.95
    seed: int = 0
    cap: int = 500
    loss_divisor: float | None = None
    metric_samples: int = 0
    allow_large_obversion: bool = False

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if self.model not in MODELS:
            raise ConfigError(f"model: unknown model {self.model!r}; expected one of {MODELS}")
        if not 1 <= self.n <= MAX_N:
            raise ConfigError(f"n: {self.n} outside [1, {MAX_N}]")
        if self.hidden is None:
            set_("hidden", self.n)
        if self.eta is None:
            set_("eta", DEFAULT_ETA[self.model])
        if self.auto_size is None:
            set_("auto_size", self.bottleneck_size)
        if self.loss_divisor is None:
            set_("loss_divisor", float(self.r) if self.r > 0 else 1.0)
        if self.hidden < 1:
            raise ConfigError(f"hidden: must be >= 1, got {self.hidden}")
        if not 1 <= self.bottleneck_size <= 1 << self.n:
            raise ConfigError(f"bottleneck_size: {self.bottleneck_size} outside [1, 2^{self.n}]")
        if self.auto_mode not in ("shared", "independent"):
            raise ConfigError(f"auto_mode: expected shared or independent, got {self.auto_mode!r}")
        if self.auto_mode == "shared" and self.auto_size != self.bottleneck_size:
            raise ConfigError(
                f"auto_size: shared mode requires auto_size == bottleneck_size "
                f"({self.auto_size} != {self.bottleneck_size})"
            )
        if not 1 <= self.auto_size <= 1 << self.n:
            raise ConfigError(f"auto_size: {self.auto_size} outside [1, 2^{self.n}]")
        if self.auto_direction not in AUTO_DIRECTIONS:
            raise ConfigError(f"auto_direction: expected one of {sorted(AUTO_DIRECTIONS)}")
        if self.r < 0:
            raise ConfigError("r: must be >= 0")
        if not self.eta > 0:
            raise ConfigError(f"eta: must be > 0, got {self.eta}")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss: expected one of {sorted(LOSSES)}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"reduction: expected one of {sorted(REDUCTIONS)}")
        if self.epochs < 1:
            raise ConfigError("epochs: must be >= 1")
        if self.generations < 1:
            raise ConfigError("generations: must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates: must be >= 1")
        if not 0 < self.lam < 1:
            raise ConfigError(f"lam: must lie in (0, 1), got {self.lam}")
        if self.cap < 1:
            raise ConfigError("cap: must be >= 1")
        if self.metric_samples < 0:
            raise ConfigError("metric_samples: must be >= 0")
        if self.model == "oilm" and self.n > OBVERSION_MAX_N and not self.allow_large_obversion:
            raise ConfigError(
                f"n: obversion at n={self.n} needs 2^(2n) = {1 << (2 * self.n):,} pair "
                f"probabilities per generation; O-ILM is capped at n <= {OBVERSION_MAX_N}"
            )

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(
            eta=self.eta, loss=self.loss, epochs=self.epochs, reduction=self.reduction
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


@dataclass
class GenerationRecord:
    replicate: int
    generation: int
    metrics: MetricTriple | None
    loss_dec: np.ndarray | None = None
    loss_enc: np.ndarray | None = None
    loss_auto: np.ndarray | None = None
    ms: float = 0.0
    error: str | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.replicate, self.generation)


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    records: list[GenerationRecord] = field(default_factory=list)
    error: str | None = None


def derive_seed(master: int, replicate: int, tag: str) -> int:
    """Deterministic 64-bit child seed for one (replicate, stream) pair."""
    data = f"{master}:{replicate}:{tag}".encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def stream(master: int, replicate: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, replicate, tag)))


@lru_cache(maxsize=64)
def cached_baseline(kind: str, n: int, hidden: int, seed: int) -> BaselineEstimate:
    return estimate_baseline(kind, n, hidden, stream(seed, -1, "baseline"))


def baseline_for(cfg: ExperimentConfig) -> BaselineEstimate:
    return cached_baseline(cfg.model, cfg.n, cfg.hidden, cfg.seed)


def _train_pupil(cfg: ExperimentConfig, tutor, rngs) -> object:
    pupil = naive_pupil(cfg.model, cfg.n, cfg.hidden, rngs["init"])
    bottleneck = make_bottleneck(tutor, cfg.n, cfg.bottleneck_size, rngs["bottleneck"])
    tc = cfg.train_config
    if cfg.model == "oilm":
        return oilm_train(pupil, bottleneck, tc, rngs["shuffle"])
    if cfg.model == "oneway":
        return oneway_train(pupil, bottleneck, tc, rngs["shuffle"])
    auto = make_auto_set(tutor, bottleneck, cfg.n, cfg.auto_mode, cfg.auto_size, rngs["auto"])
    return ailm_train(
        pupil, bottleneck, auto, cfg.r, tc, rngs["shuffle"],
        auto_rng=rngs["auto"], direction=cfg.auto_direction,
    )


def measure(cfg: ExperimentConfig, tutor, pupil, baseline: BaselineEstimate, rng=None) -> MetricTriple:
    """Raw and corrected metrics of ``pupil``; stability is measured against ``tutor``."""
    if cfg.metric_samples:
        x, c, s = sampled_metrics(tutor, pupil, cfg.metric_samples, rng)
    else:
        lang = pupil.language()
        x, c, s = expressivity(lang), compositionality(lang), pair_stability(tutor, pupil)
    return baseline.correct(x, c, s)


class _TableTutor:
    """Wraps a fixed language so it can act as the generation-0 tutor."""

    decode_block = None

    def __init__(self, table: LanguageTable):
        self.table = table

    def language(self) -> LanguageTable:
        return self.table


def iter_agents(
    cfg: ExperimentConfig,
    replicate: int,
    initial_language: LanguageTable | None = None,
    baseline: BaselineEstimate | None = None,
):
    """Yield ``(record, pupil)`` per generation, forever.

    Generation 0 is the naive (or injected) tutor and is not reported.
    """
    rngs = {tag: stream(cfg.seed, replicate, tag) for tag in STREAMS}
    baseline = baseline_for(cfg) if baseline is None else baseline
    if initial_language is not None:
        tutor = _TableTutor(initial_language)
    else:
        tutor = naive_agent(cfg.model, cfg.n, cfg.hidden, rngs["init"])
    metric_rng = stream(cfg.seed, replicate, "metrics") if cfg.metric_samples else None
    g = 0
    while True:
        g += 1
        t0 = time.perf_counter()
        pupil = _train_pupil(cfg, tutor, rngs)
        metrics = measure(cfg, tutor, pupil, baseline, metric_rng)
        ms = (time.perf_counter() - t0) * 1000.0
        st = pupil.stats
        yield GenerationRecord(replicate, g, metrics, st.loss_dec, st.loss_enc, st.loss_auto, ms), pupil
        tutor = pupil


def iter_generations(
    cfg: ExperimentConfig,
    replicate: int,
    initial_language: LanguageTable | None = None,
    baseline: BaselineEstimate | None = None,
):
    """Yield one :class:`GenerationRecord` per generation, forever."""
    for record, _ in iter_agents(cfg, replicate, initial_language, baseline):
        yield record


def iter_cohort(cfg: ExperimentConfig, baseline: BaselineEstimate | None = None):
    """Advance every replicate one generation at a time.

    Yields ``(records, agents)``: lists indexed by replicate for the same
    generation. The sequence per replicate is identical to
    :func:`run_replicate`, so callers may stop early without changing results.
    """
    baseline = baseline_for(cfg) if baseline is None else baseline
    streams = [iter_agents(cfg, k, baseline=baseline) for k in range(cfg.replicates)]
    while True:
        pairs = [next(it) for it in streams]
        yield [p[0] for p in pairs], [p[1] for p in pairs]


def run_replicate(
    cfg: ExperimentConfig,
    replicate: int = 0,
    initial_language: LanguageTable | None = None,
    baseline: BaselineEstimate | None = None,
) -> ReplicateResult:
    result = ReplicateResult(replicate, derive_seed(cfg.seed, replicate, "replicate"))
    gen = iter_generations(cfg, replicate, initial_language, baseline)
    try:
        for _ in range(cfg.generations):
            result.records.append(next(gen))
    except IlmError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        result.records.append(
            GenerationRecord(replicate, len(result.records) + 1, None, error=result.error)
        )
        log.warning("replicate %d aborted: %s", replicate, result.error)
    return result


def _run_one(args) -> ReplicateResult:
    cfg, replicate, baseline = args
    return run_replicate(cfg, replicate, baseline=baseline)


def _fan_out(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_replicates(
    cfg: ExperimentConfig, workers: int = 1, baseline: BaselineEstimate | None = None
) -> list[ReplicateResult]:
    """Every replicate of ``cfg`` in replicate order, whatever the worker count."""
    baseline = baseline_for(cfg) if baseline is None else baseline
    return _fan_out(_run_one, [(cfg, k, baseline) for k in range(cfg.replicates)], workers)


def run_experiment(
    cfg: ExperimentConfig, workers: int = 1, baseline: BaselineEstimate | None = None
) -> list[GenerationRecord]:
    """All replicates of ``cfg``; records sorted by (replicate, generation)."""
    results = run_replicates(cfg, workers, baseline)
    records = [rec for res in results for rec in res.records]
    return sorted(records, key=lambda rec: rec.key)


def generations_to_threshold(
    cfg: ExperimentConfig,
    replicate: int,
    initial_language: LanguageTable | None = None,
    baseline: BaselineEstimate | None = None,
) -> int | None:
    """First generation whose corrected x, c and s all exceed ``cfg.lam``; ``None`` if capped."""
    gen = iter_generations(cfg, replicate, initial_language, baseline)
    for _ in range(cfg.cap):
        rec = next(gen)
        if rec.metrics.egood(cfg.lam):
            return rec.generation
    return None


def _until_one(args):
    cfg, replicate, baseline = args
    return generations_to_threshold(cfg, replicate, baseline=baseline)


def run_until_egood(
    cfg: ExperimentConfig, workers: int = 1, baseline: BaselineEstimate | None = None
) -> list[int | None]:
    """Generations-to-threshold for each replicate (``None`` marks a capped run)."""
    baseline = baseline_for(cfg) if baseline is None else baseline
    return _fan_out(_until_one, [(cfg, k, baseline) for k in range(cfg.replicates)], workers)


def mean_generations(results: list[int | None], cap: int) -> float:
    """Mean generations with capped runs counted at the cap."""
    return float(np.mean([cap if g is None else g for g in results]))


@dataclass
class SweepPoint:
    n: int
    bottleneck: int
    results: list[int | None]
    cap: int

    @property
    def mean(self) -> float:
        return mean_generations(self.results, self.cap)

    @property
    def all_capped(self) -> bool:
        return all(g is None for g in self.results)


@dataclass
class SweepSummary:
    points: list[SweepPoint]
    best: dict[int, int]
    best_mean: dict[int, float]
    neighbour_mean: dict[int, float]
    slope: float
    intercept: float
    excluded: list[int]


def linear_fit(xs, ys) -> tuple[float, float]:
    """Ordinary least squares ``y = slope * x + intercept``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(xs, ys, 1)
    return float(slope), float(intercept)


def summarize_sweep(points: list[SweepPoint]) -> SweepSummary:
    by_n: dict[int, list[SweepPoint]] = {}
    for p in points:
        by_n.setdefault(p.n, []).append(p)
    best, best_mean, neighbour, excluded = {}, {}, {}, []
    for n, pts in sorted(by_n.items()):
        pts = sorted(pts, key=lambda p: p.bottleneck)
        if all(p.all_capped for p in pts):
            log.warning("n=%d: every bottleneck hit the cap; excluded from the fit", n)
            excluded.append(n)
            continue
        # ties go to the smaller bottleneck
        k = min(range(len(pts)), key=lambda i: (pts[i].mean, pts[i].bottleneck))
        best[n] = pts[k].bottleneck
        best_mean[n] = pts[k].mean
        lookup = {p.bottleneck: p.mean for p in pts}
        side = [lookup[b] for b in (best[n] - 1, best[n] + 1) if b in lookup]
        neighbour[n] = float(np.mean(side)) if side else math.nan
    slope, intercept = linear_fit(list(best), list(best.values()))
    return SweepSummary(points, best, best_mean, neighbour, slope, intercept, excluded)


def sweep_bottleneck(
    ns, bottlenecks, template: ExperimentConfig, auto_factor: int | None = 3, workers: int = 1
) -> SweepSummary:
    """Mean generations-to-threshold on an (n, bottleneck) grid and the best-bottleneck fit.

    ``bottlenecks`` is either one iterable shared by every n or a callable
    ``n -> iterable``. For the A-ILM the autoencoder set is independent and
    ``auto_factor`` times the bottleneck unless ``auto_factor`` is None.
    """
    points = []
    for n in ns:
        sizes = bottlenecks(n) if callable(bottlenecks) else bottlenecks
        for b in sizes:
            if b > 1 << n:
                continue
            kw = dict(n=n, hidden=None, bottleneck_size=b)
            if template.model == "ailm" and auto_factor is not None:
                kw.update(auto_mode="independent", auto_size=min(auto_factor * b, 1 << n))
            elif template.auto_mode == "shared":
                kw.update(auto_size=b)
            cfg = template.with_(**kw)
            points.append(SweepPoint(n, b, run_until_egood(cfg, workers), cfg.cap))
    return summarize_sweep(points)
