import math

import pytest
from scipy import integrate

from aia import validation
from aia.errors import DomainError, MissingPair
from aia.validation import SummaryStat, hypothesis_table, two_sample_ttest


def pooled_t_oracle(ma, sa, na, mb, sb, nb):
    df = na + nb - 2
    pooled = ((na - 1) * sa ** 2 + (nb - 1) * sb ** 2) / df
    t = (ma - mb) / math.sqrt(pooled * (1 / na + 1 / nb))
    c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)

    def pdf(u):
        return c * (1 + u * u / df) ** (-(df + 1) / 2)

    tail, _ = integrate.quad(pdf, abs(t), math.inf)
    return t, 2 * tail


def test_identical_stats_give_t0_p1():
    a = SummaryStat("a", 50.0, 2.0, 10)
    b = SummaryStat("b", 50.0, 2.0, 10)
    res = two_sample_ttest(a, b)
    assert res.t_statistic == 0.0
    assert res.p_value == 1.0
    assert not res.rejected


def test_table4_gender_pair_rejected():
    naive = SummaryStat("gender:naive", 49.03, 0.18, 20)
    dummy = SummaryStat("gender:dummy", 49.75, 0.55, 20)
    res = two_sample_ttest(naive, dummy, alpha=0.05)
    assert res.rejected


def test_p_matches_quadrature_oracle():
    cases = [
        (49.03, 0.18, 20, 49.75, 0.55, 20),
        (67.24, 13.4, 10, 51.62, 10.9, 10),
        (34.40, 8.20, 10, 31.20, 6.26, 10),
        (1.0, 0.5, 5, 1.2, 0.7, 8),
        (10.0, 3.0, 50, 9.0, 2.0, 30),
    ]
    for ma, sa, na, mb, sb, nb in cases:
        res = two_sample_ttest(SummaryStat("a", ma, sa, na),
                               SummaryStat("b", mb, sb, nb))
        t_exp, p_exp = pooled_t_oracle(ma, sa, na, mb, sb, nb)
        assert res.t_statistic == pytest.approx(t_exp, abs=1e-10)
        assert res.p_value == pytest.approx(p_exp, abs=1e-8)


def test_symmetry_negates_t_keeps_p():
    a = SummaryStat("a", 60.0, 5.0, 12)
    b = SummaryStat("b", 55.0, 4.0, 15)
    r1 = two_sample_ttest(a, b)
    r2 = two_sample_ttest(b, a)
    assert r2.t_statistic == pytest.approx(-r1.t_statistic, abs=1e-12)
    assert r2.p_value == pytest.approx(r1.p_value, abs=1e-12)


def test_scale_invariance():
    a = SummaryStat("a", 60.0, 5.0, 12)
    b = SummaryStat("b", 55.0, 4.0, 15)
    r1 = two_sample_ttest(a, b)
    r2 = two_sample_ttest(SummaryStat("a", 600.0, 50.0, 12),
                          SummaryStat("b", 550.0, 40.0, 15))
    assert r2.t_statistic == pytest.approx(r1.t_statistic, abs=1e-10)
    assert r2.p_value == pytest.approx(r1.p_value, abs=1e-10)


def test_p_decreases_as_mean_gap_grows():
    base = SummaryStat("b", 50.0, 3.0, 10)
    gaps = [0.5, 1.0, 2.0, 4.0, 8.0]
    ps = [two_sample_ttest(SummaryStat("a", 50.0 + g, 3.0, 10), base).p_value
          for g in gaps]
    assert ps == sorted(ps, reverse=True)
    assert all(p1 > p2 for p1, p2 in zip(ps, ps[1:]))


def test_degenerate_conventions():
    equal = two_sample_ttest(SummaryStat("a", 5.0, 0.0, 4),
                             SummaryStat("b", 5.0, 0.0, 4))
    assert equal.p_value == 1.0 and equal.flagged and not equal.rejected
    unequal = two_sample_ttest(SummaryStat("a", 5.0, 0.0, 4),
                               SummaryStat("b", 6.0, 0.0, 4))
    assert unequal.p_value == 0.0 and unequal.flagged and unequal.rejected


def test_summary_stat_validation():
    with pytest.raises(DomainError):
        SummaryStat("a", 1.0, 1.0, 1)
    with pytest.raises(DomainError):
        SummaryStat("a", 1.0, -0.5, 5)


def test_welch_flag_changes_df_not_conclusions_here():
    a = SummaryStat("a", 49.03, 0.18, 20)
    b = SummaryStat("b", 49.75, 0.55, 20)
    pooled = two_sample_ttest(a, b)
    welch = two_sample_ttest(a, b, welch=True)
    assert pooled.rejected and welch.rejected
    assert welch.p_value != pooled.p_value


def test_published_ledger_reproduces_reject_counts():
    ledger = hypothesis_table(alpha=0.05)
    counts = ledger.counts()
    assert counts["dummy_vs_best_model"] == (5, 9)
    assert counts["dummy_vs_naive"] == (4, 9)
    assert counts["dummy_vs_expert"] == (9, 9)
    assert counts["sophisticated_vs_indiscriminate"] == (7, 7)


def test_expert_family_rejections_are_emphatic():
    ledger = hypothesis_table(alpha=0.05)
    expert = next(f for f in ledger.families if f.name == "dummy_vs_expert")
    assert all(r.p_value < 0.00001 for r in expert.results)


def test_all_identical_synthetic_stats_reject_nothing():
    doc = validation.load_published_results()
    for attr_row in doc["simple"]["attributes"].values():
        for key, value in attr_row.items():
            if isinstance(value, list):
                attr_row[key] = [40.0, 5.0]
    for attr_row in doc["one_match"]["attributes"].values():
        for key in ("naive", "expert", "dummy"):
            attr_row[key] = [40.0, 5.0]
    for attr_row in doc["indiscriminate"]["attributes"].values():
        for key in ("sophisticated", "indiscriminate"):
            attr_row[key] = [40.0, 5.0]
    ledger = hypothesis_table(doc)
    assert all(f.rejected == 0 for f in ledger.families)


def test_missing_pair_raises():
    doc = validation.load_published_results()
    del doc["one_match"]["attributes"]["gender"]["naive"]
    with pytest.raises(MissingPair):
        hypothesis_table(doc)
