import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from oracles import hand_rank, t_two_sided_p_quad
from tumorkit import ArityError, CaseScores, DegenerateError, IncompleteError, paired_ttest, rank_sum
from tumorkit.stats import betainc, t_two_sided_p

A = [3.0, 1.0, 5.0, 2.0, 4.0]
B = [1.0, 2.0, 2.0, 2.0, 3.0]  # d = [2, -1, 3, 0, 1]


def test_ttest_hand_arithmetic():
    # mean 1, sample variance 10/4, se = sqrt(2.5 / 5) = sqrt(0.5)
    r = paired_ttest(A, B)
    assert abs(r.t - math.sqrt(2)) < 1e-9
    assert r.df == 4 and r.n == 5


def test_ttest_p_matches_quadrature_and_scipy():
    r = paired_ttest(A, B)
    assert abs(r.p_two_sided - t_two_sided_p_quad(r.t, 4)) < 1e-6
    assert r.p_two_sided == pytest.approx(sps.ttest_rel(A, B).pvalue, abs=1e-12)


def test_ttest_swap_negates_t():
    r, s = paired_ttest(A, B), paired_ttest(B, A)
    assert s.t == -r.t and s.p_two_sided == r.p_two_sided


def test_ttest_equal_samples():
    r = paired_ttest(A, A)
    assert (r.t, r.p_two_sided) == (0.0, 1.0)


def test_ttest_errors():
    with pytest.raises(DegenerateError):
        paired_ttest([2.0, 3.0], [1.0, 2.0])
    with pytest.raises(ArityError):
        paired_ttest([1.0], [2.0])
    with pytest.raises(ArityError):
        paired_ttest([1.0, 2.0], [1.0])


@settings(max_examples=40, deadline=None)
@given(st.floats(-30, 30), st.integers(1, 60))
def test_t_p_against_quadrature(t, df):
    assert abs(t_two_sided_p(t, df) - t_two_sided_p_quad(t, df)) < 1e-9


@pytest.mark.parametrize("t,df", [(1e-8, 1), (1e-6, 30), (3e-5, 2)])
def test_t_p_tiny_statistic_keeps_precision(t, df):
    assert abs(t_two_sided_p(t, df) - t_two_sided_p_quad(t, df)) < 1e-12
    assert t_two_sided_p(t, df) < 1.0


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (10.0, 0.5, 0.99), (1.0, 1.0, 0.42)])
def test_betainc_against_scipy(a, b, x):
    from scipy.special import betainc as ref

    assert betainc(a, b, x) == pytest.approx(ref(a, b, x), rel=1e-12, abs=1e-15)


def scores(rows):
    return [CaseScores(c, m, mse, psnr, ssim) for c, m, mse, psnr, ssim in rows]


# case1: B and C tie on every metric; case2: strict order B > C > A
FIXTURE = scores([
    ("c1", "A", 0.01, 20.0, 0.9), ("c1", "B", 0.02, 17.0, 0.8), ("c1", "C", 0.02, 17.0, 0.8),
    ("c2", "A", 0.03, 15.0, 0.7), ("c2", "B", 0.01, 20.0, 0.9), ("c2", "C", 0.02, 17.0, 0.8),
])


def test_rank_sum_hand_fixture():
    # A: 1+1+1 + 3+3+3 = 12; B: 2.5*3 + 1*3 = 10.5; C: 2.5*3 + 2*3 = 13.5
    out = rank_sum(FIXTURE)
    assert [(e.model_id, e.rank_sum, e.final_rank, e.tied) for e in out] == [
        ("B", 10.5, 1, False), ("A", 12.0, 2, False), ("C", 13.5, 3, False),
    ]


def test_rank_sum_against_hand_rank_oracle():
    totals = dict.fromkeys("ABC", 0.0)
    for case in ("c1", "c2"):
        row = {s.model_id: s for s in FIXTURE if s.case_id == case}
        for metric, hb in (("mse", False), ("psnr", True), ("ssim", True)):
            for m, r in hand_rank({m: getattr(s, metric) for m, s in row.items()}, hb).items():
                totals[m] += r
    assert {e.model_id: e.rank_sum for e in rank_sum(FIXTURE)} == totals


def test_rank_sum_tied_totals_flagged():
    out = rank_sum(scores([("c1", "X", 0.1, 10, 0.5), ("c1", "Y", 0.1, 10, 0.5)]))
    assert [(e.model_id, e.rank_sum, e.tied) for e in out] == [("X", 4.5, True), ("Y", 4.5, True)]


def test_rank_sum_single_model():
    out = rank_sum(scores([("c1", "M", 0.1, 10, 0.5), ("c2", "M", 0.2, 7, 0.4)]))
    assert [(e.model_id, e.rank_sum, e.final_rank) for e in out] == [("M", 6.0, 1)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_rank_sum_monotone_transform_invariant(seed):
    rng = np.random.default_rng(seed)
    rows = [(f"c{c}", f"m{m}", *rng.random(3)) for c in range(3) for m in range(3)]
    base = rank_sum(scores(rows))
    warped = rank_sum(scores([(c, m, mse**3, 2 * psnr + 1, math.exp(ss)) for c, m, mse, psnr, ss in rows]))
    assert [(e.model_id, e.rank_sum) for e in base] == [(e.model_id, e.rank_sum) for e in warped]


def test_rank_sum_dominant_model_wins():
    rows = []
    for c in range(4):
        rows += [(f"c{c}", "good", 0.01, 30, 0.95), (f"c{c}", "bad", 0.5, 5, 0.1)]
    out = rank_sum(scores(rows))
    assert out[0].model_id == "good" and out[0].rank_sum == 12 and out[1].rank_sum == 24


def test_rank_sum_errors():
    with pytest.raises(IncompleteError):
        rank_sum(scores([("c1", "A", 0.1, 1, 0.1), ("c1", "B", 0.1, 1, 0.1), ("c2", "A", 0.1, 1, 0.1)]))
    with pytest.raises(ValueError):
        rank_sum(scores([("c1", "A", 0.1, 1, 0.1), ("c1", "A", 0.2, 1, 0.1)]))
    assert rank_sum([]) == []


def test_rank_entry_dict():
    assert set(rank_sum(FIXTURE)[0].to_dict()) == {"model_id", "rank_sum", "final_rank", "tied"}
