"""Paired t-test and rank-sum aggregation of per-case inpainting scores."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ArityError, DegenerateError, IncompleteError

# metric name -> True when larger is better
METRICS = {"mse": False, "psnr": True, "ssim": True}


@dataclass(frozen=True)
class CaseScores:
    case_id: str
    model_id: str
    mse: float
    psnr: float
    ssim: float


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p_two_sided: float
    n: int


@dataclass(frozen=True)
class RankEntry:
    model_id: str
    rank_sum: float
    final_rank: int
    tied: bool

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "rank_sum": self.rank_sum,
            "final_rank": self.final_rank,
            "tied": self.tied,
        }


def _betacf(a: float, b: float, x: float, eps: float = 1e-16, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betainc(a: float, b: float, x: float, y: float) -> float:
    """I_x(a, b) with ``y = 1 - x`` supplied separately to keep precision near 1."""
    if x == 0.0 or y == 0.0:
        return 0.0 if x == 0.0 else 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(y)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return _betainc(a, b, x, 1.0 - x)


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if t == 0:
        return 1.0
    if math.isinf(t):
        return 0.0
    t2 = t * t
    # x = df / (df + t^2) rounds to 1 for tiny t, so pass 1 - x explicitly
    return min(1.0, _betainc(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2)))


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on ``a - b``."""
    if len(a) != len(b):
        raise ArityError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ArityError("paired t-test needs at least 2 pairs")
    d = [float(x) - float(y) for x, y in zip(a, b)]
    mean = math.fsum(d) / n
    var = math.fsum((v - mean) ** 2 for v in d) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, n - 1, 1.0, n)
        raise DegenerateError("differences are constant and nonzero; t is undefined")
    t = mean / math.sqrt(var / n)
    return TTestResult(t, n - 1, t_two_sided_p(t, n - 1), n)


def _ranks(values: dict[str, float], higher_better: bool) -> dict[str, float]:
    """1 = best; tied values share the mean of the ranks they span."""
    out = {}
    for model, v in values.items():
        better = sum(1 for w in values.values() if (w > v if higher_better else w < v))
        equal = sum(1 for w in values.values() if w == v)
        out[model] = better + (equal + 1) / 2.0
    return out


def rank_sum(scores: Iterable[CaseScores]) -> list[RankEntry]:
    """Equally weighted sum of per-case, per-metric ranks.

    Lowest rank sum wins.  Equal sums are ordered by ``model_id`` and
    flagged as tied.
    """
    table: dict[str, dict[str, CaseScores]] = defaultdict(dict)
    models: set[str] = set()
    for s in scores:
        if s.model_id in table[s.case_id]:
            raise ValueError(f"duplicate score for model {s.model_id!r}, case {s.case_id!r}")
        table[s.case_id][s.model_id] = s
        models.add(s.model_id)
    if not models:
        return []
    for case, row in table.items():
        missing = models - row.keys()
        if missing:
            raise IncompleteError(f"case {case!r} has no score for {sorted(missing)}")

    totals = dict.fromkeys(models, 0.0)
    for case in sorted(table):
        row = table[case]
        for metric, higher_better in METRICS.items():
            ranks = _ranks({m: getattr(row[m], metric) for m in models}, higher_better)
            for m, r in ranks.items():
                totals[m] += r

    ordered = sorted(models, key=lambda m: (totals[m], m))
    counts = defaultdict(int)
    for m in models:
        counts[totals[m]] += 1
    return [
        RankEntry(m, totals[m], i, counts[totals[m]] > 1)
        for i, m in enumerate(ordered, start=1)
    ]
