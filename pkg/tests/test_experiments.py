import math

import numpy as np
import pytest

from softcover._rng import letter_uniforms, mix64, trial_seed
from softcover.covering import induced_distribution, kl_exact, sample_codebook, tv_exact
from softcover.experiments import (
    TrialRecord,
    decay_sweep,
    failure_rate,
    mc_trials,
    message_distributions,
    summarize,
    sweep_parameters,
    tv_pairs,
    wiretap_codebook,
    wiretap_experiment,
)
from softcover.measures import binary_symmetric_pair, make_pair, mutual_information

BSC = binary_symmetric_pair(0.1)


def test_mix64_reference_value():
    assert mix64(0) == 0xE220A8397B1DCDAF


def test_trial_seed_schedule():
    assert trial_seed(7, 0) == mix64(mix64(7) ^ 0)
    assert trial_seed(7, 0) == 13309476754707697221
    seeds = {trial_seed(7, i) for i in range(1000)}
    assert len(seeds) == 1000


def test_letter_uniforms_range():
    u = letter_uniforms(3, np.arange(500), 9)
    assert u.shape == (500, 9)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02


def test_single_trial_matches_direct_analysis():
    eps, b1, b2 = sweep_parameters(BSC, 0.8)
    (rec,) = mc_trials(BSC, 6, 0.8, eps, b1, b2, 7, 1)
    cb = sample_codebook(BSC, 6, 0.8, trial_seed(7, 0))
    assert rec.seed == trial_seed(7, 0)
    assert rec.kl_bits == kl_exact(BSC, cb)
    assert rec.tv == tv_exact(BSC, cb)


def test_trial_records_are_consistent():
    eps, b1, b2 = sweep_parameters(BSC, 0.8)
    for rec in mc_trials(BSC, 5, 0.8, eps, b1, b2, 1, 20):
        assert rec.kl_bits <= rec.term_h + rec.term_1 + rec.term_2 + 1e-9
        assert 0.0 <= rec.mass_p2 <= 1.0
        assert 0.0 <= rec.tv <= 1.0


def test_independent_channel_gives_zero_kl():
    pair = make_pair([0.4, 0.6], [[0.3, 0.7], [0.3, 0.7]])
    for rec in mc_trials(pair, 4, 0.5, 0.1, 0.1, 0.05, 3, 10):
        assert rec.kl_bits == pytest.approx(0.0, abs=1e-12)
        assert rec.mass_p2 == 0.0


def test_pinned_regression_200_trials():
    eps, b1, b2 = sweep_parameters(BSC, 0.8)
    records = mc_trials(BSC, 6, 0.8, eps, b1, b2, 7, 200)
    kl = np.array([r.kl_bits for r in records])
    assert np.median(kl) == pytest.approx(0.4117854863242484, abs=1e-12)
    assert kl.mean() == pytest.approx(0.4157658035063012, abs=1e-12)
    assert records[0].kl_bits == pytest.approx(0.41872811182270425, abs=1e-12)


def test_mc_trials_rejects_zero_trials():
    with pytest.raises(ValueError):
        mc_trials(BSC, 4, 0.5, 0.1, 0.1, 0.1, 0, 0)


def test_worker_count_does_not_change_results():
    eps, b1, b2 = sweep_parameters(BSC, 0.8)
    serial = mc_trials(BSC, 5, 0.8, eps, b1, b2, 11, 8, workers=1)
    parallel = mc_trials(BSC, 5, 0.8, eps, b1, b2, 11, 8, workers=2)
    assert serial == parallel


def _record(kl):
    return TrialRecord(0, 1, 0.5, kl, 0.0, 0.0, True, 0.0, 0.0, 0.0)


def test_failure_rate():
    recs = [_record(x) for x in (0.1, 0.2, 0.3, 0.4)]
    assert failure_rate(recs, 0.25) == 0.5
    assert failure_rate(recs, 0.35) == 0.25
    # strictly greater: a record at the threshold does not fail
    assert failure_rate(recs, 0.4) == 0.0
    assert failure_rate(recs, 1.0) == 0.0
    with pytest.raises(ValueError):
        failure_rate([], 0.1)


def test_summarize_quantiles():
    cell = summarize([_record(x) for x in range(11)])
    assert cell.median_kl == 5.0
    assert cell.q90_kl == pytest.approx(9.0)
    assert cell.frac_in_s == 1.0


def test_sweep_cells_match_direct_trials():
    cells = decay_sweep(BSC, [0.8, 0.3], [3, 5], 6, 2)
    assert [(c.rate_R, c.n) for c in cells] == [(0.8, 3), (0.8, 5), (0.3, 3), (0.3, 5)]
    eps, b1, b2 = sweep_parameters(BSC, 0.3)
    direct = mc_trials(BSC, 5, 0.3, eps, b1, b2, 2, 6)
    assert cells[3].records == tuple(direct)


def test_sweep_parameters_below_rate():
    eps, b1, b2 = sweep_parameters(BSC, 0.3)
    assert eps == 0.1 and b2 == 0.0
    assert 0 < b1 <= 0.15


def test_tv_pairs():
    assert tv_pairs(1) == []
    assert tv_pairs(3) == [(0, 1), (0, 2), (1, 2)]
    assert len(tv_pairs(64)) == 64 * 63 // 2
    big = tv_pairs(70)
    assert len(big) == 64 * 63 // 2 + 6
    assert big[-1] == (0, 69)


def test_wiretap_partition_and_seed():
    cb, m_msg, m_rand = wiretap_codebook(BSC, 6, 0.2, 0.8, 0)
    assert (m_msg, m_rand) == (2, 28)
    assert cb.m_size == 56
    dists = message_distributions(BSC, cb, m_msg)
    assert dists.shape == (2, 64)
    assert np.allclose(dists.sum(axis=1), 1.0)
    # the mixture over messages is the law of the full codebook
    assert np.allclose(dists.mean(axis=0), induced_distribution(BSC, cb).mass)


def test_wiretap_report_invariants():
    rep = wiretap_experiment(BSC, 6, 0.2, 0.8, 0)
    assert rep.seed == 0 and rep.pairs_checked == 1
    assert rep.max_kl == max(rep.per_message_kl)
    assert rep.max_kl == pytest.approx(0.47370529958612173, abs=1e-12)
    assert rep.max_pairwise_tv == pytest.approx(0.47948, abs=1e-12)
    # triangle inequality through the target
    assert rep.max_pairwise_tv <= 2 * max(rep.per_message_tv) + 1e-12
    for kl, tv in zip(rep.per_message_kl, rep.per_message_tv):
        assert 2 * tv**2 / math.log(2) <= kl + 1e-12


def test_wiretap_single_message_is_covering():
    rep = wiretap_experiment(BSC, 6, 0.0, 0.8, 5)
    cb = sample_codebook(BSC, 6, 0.8, 5)
    assert rep.m_message == 1 and rep.pairs_checked == 0
    assert rep.max_pairwise_tv == 0.0
    assert rep.max_kl == kl_exact(BSC, cb)


def test_mutual_information_reference():
    assert mutual_information(BSC) == pytest.approx(0.531004, abs=1e-6)
