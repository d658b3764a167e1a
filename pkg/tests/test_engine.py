import numpy as np
import pytest

from iterlearn.engine import (
    ExperimentConfig,
    SweepPoint,
    derive_seed,
    generations_to_threshold,
    iter_agents,
    iter_cohort,
    linear_fit,
    mean_generations,
    run_experiment,
    run_replicate,
    run_until_egood,
    stream,
    summarize_sweep,
)
from iterlearn.errors import ConfigError
from iterlearn.lang import LanguageTable, indices_to_bits
from iterlearn.metrics import pair_stability

SMALL = ExperimentConfig(model="ailm", n=5, bottleneck_size=12, generations=4, replicates=3, epochs=5, r=4)


def compositional8():
    b = indices_to_bits(np.arange(256), 8)
    return LanguageTable.from_signals(b[:, [3, 1, 7, 0, 2, 6, 5, 4]] ^ np.array([1, 0, 1, 0, 0, 1, 1, 0], dtype=b.dtype))


def flat(records):
    out = []
    for r in records:
        m = r.metrics
        out.append((r.replicate, r.generation, m.x_raw, m.c_raw, m.s_raw, m.x, m.c, m.s,
                    *(tuple(v) if v is not None else None for v in (r.loss_dec, r.loss_enc, r.loss_auto))))
    return out


def test_config_defaults():
    cfg = ExperimentConfig(model="ailm", n=8)
    assert (cfg.eta, cfg.hidden, cfg.epochs, cfg.r, cfg.lam, cfg.cap) == (5.0, 8, 20, 20, 0.95, 500)
    assert cfg.auto_size == cfg.bottleneck_size
    assert ExperimentConfig(model="oilm").eta == 1.0
    assert ExperimentConfig(model="ailm", n=20, hidden=30).hidden == 30


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(auto_mode="shared", bottleneck_size=75, auto_size=80), "auto_size"),
        (dict(model="oilm", n=16, bottleneck_size=160), "n"),
        (dict(model="crowd"), "model"),
        (dict(lam=1.0), "lam"),
        (dict(n=3, bottleneck_size=9), "bottleneck_size"),
        (dict(auto_direction="sideways"), "auto_direction"),
        (dict(eta=0.0), "eta"),
    ],
)
def test_config_rejections_name_the_field(kw, field):
    with pytest.raises(ConfigError, match=f"^{field}:"):
        ExperimentConfig(**kw)


def test_large_obversion_needs_the_override():
    with pytest.raises(ConfigError, match=r"2\^\(2n\)"):
        ExperimentConfig(model="oilm", n=16, bottleneck_size=160)
    assert ExperimentConfig(model="oilm", n=16, bottleneck_size=160, allow_large_obversion=True).n == 16


def test_derive_seed_is_deterministic_and_separates_streams():
    assert derive_seed(7, 3, "init") == derive_seed(7, 3, "init")
    tags = {derive_seed(7, 3, t) for t in ("bottleneck", "init", "shuffle", "auto")}
    assert len(tags) == 4


def test_derive_seed_has_no_collisions_across_replicates():
    seeds = {derive_seed(1, k, "init") for k in range(1_000_000)}
    assert len(seeds) == 1_000_000


def test_streams_are_independent():
    a = stream(5, 0, "bottleneck").integers(0, 1 << 30, 10)
    noisy = stream(5, 0, "auto")
    noisy.integers(0, 10, 1000)
    assert np.array_equal(a, stream(5, 0, "bottleneck").integers(0, 1 << 30, 10))


def test_single_replicate_experiment_matches_run_replicate():
    cfg = SMALL.with_(replicates=1)
    assert flat(run_experiment(cfg)) == flat(run_replicate(cfg, 0).records)


def test_worker_count_does_not_change_results():
    assert flat(run_experiment(SMALL, workers=1)) == flat(run_experiment(SMALL, workers=3))


def test_cohort_matches_independent_replicates():
    records = []
    for g, (recs, _) in enumerate(iter_cohort(SMALL), 1):
        records.extend(recs)
        if g == SMALL.generations:
            break
    assert sorted(flat(records)) == flat(run_experiment(SMALL))


@pytest.mark.parametrize("model", ["oilm", "ailm", "oneway"])
def test_records_carry_the_right_losses(model):
    cfg = SMALL.with_(model=model, eta=None, replicates=1, generations=2)
    recs = run_replicate(cfg, 0).records
    assert [r.generation for r in recs] == [1, 2]
    r = recs[0]
    assert (r.loss_dec is not None) == (model != "oneway")
    assert (r.loss_enc is not None) == (model != "oilm")
    assert (r.loss_auto is not None) == (model == "ailm")
    assert len(r.loss_dec if r.loss_dec is not None else r.loss_enc) == cfg.epochs


@pytest.mark.parametrize("model", ["oilm", "ailm", "oneway"])
def test_stability_is_measured_against_the_previous_generation(model):
    cfg = SMALL.with_(model=model, eta=None)
    prev = None
    for g, (rec, pupil) in enumerate(iter_agents(cfg, 0), 1):
        if prev is not None:
            assert rec.metrics.s_raw == pair_stability(prev, pupil)
        prev = pupil
        if g == 4:
            break


def test_numeric_failure_aborts_with_a_diagnostic_record():
    cfg = SMALL.with_(eta=float("inf"), replicates=1)
    result = run_replicate(cfg, 0)
    assert result.error is not None
    assert result.records[-1].metrics is None
    assert result.records[-1].error == result.error


def test_injected_compositional_tutor_is_reproduced_at_once():
    cfg = ExperimentConfig(model="ailm", n=8, bottleneck_size=75, auto_mode="independent", auto_size=225, cap=5)
    for k in range(3):
        assert generations_to_threshold(cfg, k, initial_language=compositional8()) in (1, 2)


@pytest.mark.slow
def test_oneway_never_reaches_threshold():
    cfg = ExperimentConfig(model="oneway", n=8, bottleneck_size=50, replicates=3)
    assert run_until_egood(cfg) == [None, None, None]


@pytest.mark.slow
def test_ailm_reaches_threshold_quickly_with_a_good_bottleneck():
    cfg = ExperimentConfig(model="ailm", n=8, bottleneck_size=75, auto_mode="independent", auto_size=225,
                           replicates=5)
    results = run_until_egood(cfg)
    assert mean_generations(results, cfg.cap) < 50


def test_linear_fit_recovers_exact_line():
    ns = np.arange(4, 12)
    slope, intercept = linear_fit(ns, 10.5 * ns - 11.6)
    assert slope == pytest.approx(10.5)
    assert intercept == pytest.approx(-11.6)


def test_sweep_summary_best_neighbours_and_exclusions():
    pts = [
        SweepPoint(4, 10, [9, 11], 100),
        SweepPoint(4, 11, [5, 5], 100),
        SweepPoint(4, 12, [7, None], 100),
        SweepPoint(5, 20, [4, 4], 100),
        SweepPoint(5, 21, [4, 4], 100),
        SweepPoint(6, 30, [None, None], 100),
    ]
    summary = summarize_sweep(pts)
    assert summary.best == {4: 11, 5: 20}
    assert summary.best_mean[4] == 5.0
    assert summary.neighbour_mean[4] == pytest.approx((10 + 53.5) / 2)
    assert summary.excluded == [6]
    assert summary.slope == pytest.approx(9.0)


def test_mean_generations_counts_capped_runs_at_the_cap():
    assert mean_generations([2, None, 4], 30) == 12.0
