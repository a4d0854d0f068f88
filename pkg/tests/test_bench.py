import numpy as np
import pytest

from onmf.bench import (
    Dataset,
    ExperimentConfig,
    Summary,
    SyntheticSpec,
    generate,
    parse_init,
    run_experiment,
    run_once,
    summarize,
    weighted_average,
)
from onmf.io import RunReport


def test_generation_is_bitwise_reproducible():
    spec = SyntheticSpec(30, 90, 3, noise="poisson", seed=11)
    a, la, wa = generate(spec)
    b, lb, wb = generate(spec)
    assert a == b
    np.testing.assert_array_equal(la, lb)
    np.testing.assert_array_equal(wa, wb)


def test_round_robin_labels_and_centroid_scale():
    x, labels, w = generate(SyntheticSpec(20, 40, 4, law="disjoint"))
    np.testing.assert_array_equal(labels, np.arange(40) % 4)
    np.testing.assert_allclose(w.sum(axis=0), 20.0)
    assert np.count_nonzero(w, axis=1).max() == 1  # disjoint supports


def test_small_norm_shrinks_last_centroid():
    _, _, w = generate(SyntheticSpec(20, 40, 4, small_norm=0.05))
    assert w[:, -1].sum() == pytest.approx(20.0 * 0.05)


def test_poisson_mean_property():
    spec = dict(m=50, n=500, r=5, scale=(5, 15), seed=3)
    mean, _, _ = generate(SyntheticSpec(**spec))  # same stream, no noise
    noisy, _, _ = generate(SyntheticSpec(**spec, noise="poisson"))
    mu, obs = mean.col_sums(), noisy.col_sums()
    z = (obs - mu) / np.sqrt(mu)
    assert abs(z.sum() / np.sqrt(z.size)) < 4.0
    assert np.mean(np.abs(z) > 3) < 0.01


def test_gaussian_noise_clipped_at_zero():
    x, _, _ = generate(SyntheticSpec(20, 50, 2, noise="gaussian", sigma=5.0))
    assert x.min_value() >= 0


def test_spec_validation():
    for bad in (dict(n=2, r=3), dict(scale=(0, 1)), dict(noise="gaussian"), dict(small_norm=1.5)):
        with pytest.raises(ValueError):
            SyntheticSpec(**bad)


@pytest.mark.parametrize("div", ["fro", "kl"])
def test_noiseless_disjoint_recovers_exactly(div):
    x, labels, w = generate(SyntheticSpec(40, 400, 4, law="disjoint", seed=1))
    rep, _, _ = run_once(Dataset("exact", x, labels, w), ExperimentConfig(div), 0)
    assert rep.metric_value == 1.0
    assert rep.objective[-1] <= 1e-9 * np.sum(x.data**2)


def test_parse_init():
    assert parse_init("greedy") == ("greedy", None)
    assert parse_init("indices:1,4,2") == ("indices", [1, 4, 2])
    with pytest.raises(ValueError):
        parse_init("kmeans++")


def test_single_run_single_row():
    x, labels, w = generate(SyntheticSpec(10, 30, 2))
    reps = run_experiment([Dataset("d", x, labels, w)], [ExperimentConfig("kl")], repeats=1)
    assert len(reps) == 1 and reps[0].metric_name == "accuracy"


def test_mrsa_metric_without_labels():
    x, _, w = generate(SyntheticSpec(10, 30, 2, law="disjoint"))
    rep, _, _ = run_once(Dataset("hsi", x, w_true=w), ExperimentConfig("fro"), 0)
    assert rep.metric_name == "mrsa" and rep.metric_value == pytest.approx(0.0, abs=1e-6)


def test_weighted_average_arithmetic():
    rows = [
        Summary("a", "kl", 100, 2, 1, 0, "accuracy", 1.0, 1.0, 0.1, 3),
        Summary("b", "kl", 300, 2, 1, 0, "accuracy", 0.5, 0.5, 0.1, 3),
    ]
    assert weighted_average(rows, "kl") == pytest.approx(0.625)


def test_twenty_repeats_aggregate_is_mean():
    x, labels, w = generate(SyntheticSpec(10, 40, 2, noise="poisson"))
    reps = run_experiment([Dataset("d", x, labels, w)], [ExperimentConfig("fro")], repeats=20)
    assert [r.seed for r in reps] == list(range(20))
    (s,) = summarize(reps)
    assert s.runs == 20
    assert s.mean_time_s == pytest.approx(np.mean([r.time_s for r in reps]))
    assert s.mean_iterations == pytest.approx(np.mean([r.iterations for r in reps]))


def test_failures_do_not_abort_batch():
    def broken():
        raise OSError("missing file")

    broken.name = "broken"
    x, labels, w = generate(SyntheticSpec(10, 30, 2))
    bad_rank = Dataset("tiny", x, labels, w, rank=31)  # rank > n fails inside the run
    good = Dataset("ok", x, labels, w)
    reps = run_experiment([broken, bad_rank, good], [ExperimentConfig("kl")], repeats=2)
    assert [r.dataset for r in reps] == ["broken", "broken", "tiny", "tiny", "ok", "ok"]
    assert [r.failed for r in reps] == [True, True, True, True, False, False]
    summ = {s.dataset: s for s in summarize(reps)}
    assert summ["tiny"].failures == 2 and summ["ok"].failures == 0


def test_summary_reports_first_seed_and_mean():
    reps = [RunReport("d", "kl", 2, s, metric_name="accuracy", metric_value=v, n=10)
            for s, v in [(1, 0.5), (0, 1.0)]]
    (s,) = summarize(reps)
    assert s.metric_first == 1.0 and s.metric_mean == 0.75
