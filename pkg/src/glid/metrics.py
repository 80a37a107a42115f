"""Upstream evaluation: confusion accounting, macro metrics, paired t-tests.

Per-language precision/recall/F1 come from a confusion table with the 0/0
convention of 0.  Region evaluation runs the regional model and the
baseline over the same samples, scores both against the region's language
set (baseline predictions outside that set simply count as errors), and
attaches a t-test paired by language.  p-values use the regularized
incomplete beta form of the Student-t CDF rather than lookup tables.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .classifier import predict_batch
from .dataset import LabeledSample
from .geodb import GeoDatabase
from .router import BASELINE, ModelRegistry


class ConfusionTable:
    """Counts of (true label, predicted label) pairs."""

    def __init__(self):
        self.counts: Counter[tuple[str, str]] = Counter()

    def add(self, true: str, predicted: str, n: int = 1) -> None:
        self.counts[(true, predicted)] += n

    def update(self, pairs: Iterable[tuple[str, str]]) -> None:
        for true, predicted in pairs:
            self.counts[(true, predicted)] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def languages(self) -> set[str]:
        langs: set[str] = set()
        for true, predicted in self.counts:
            langs.add(true)
            langs.add(predicted)
        return langs


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    support: int


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def score(conf: ConfusionTable) -> dict[str, Scores]:
    """Per-language P/R/F over every label that occurs in the table."""
    if not conf.counts:
        raise ValueError("confusion table is empty")
    tp: Counter[str] = Counter()
    true_totals: Counter[str] = Counter()
    pred_totals: Counter[str] = Counter()
    for (true, predicted), n in conf.counts.items():
        true_totals[true] += n
        pred_totals[predicted] += n
        if true == predicted:
            tp[true] += n
    out: dict[str, Scores] = {}
    for lang in conf.languages():
        p = _safe_div(tp[lang], pred_totals[lang])
        r = _safe_div(tp[lang], true_totals[lang])
        f = _safe_div(2 * p * r, p + r)
        out[lang] = Scores(precision=p, recall=r, f1=f,
                           support=true_totals[lang])
    return out


@dataclass(frozen=True)
class MacroScores:
    precision: float
    recall: float
    f1: float


def macro_average(scores: Mapping[str, Scores], langs: Iterable[str]
                  ) -> MacroScores:
    """Unweighted mean of per-language metrics over ``langs``."""
    langs = sorted(set(langs))
    if not langs:
        raise ValueError("macro average over an empty language set")
    missing = [l for l in langs if l not in scores]
    if missing:
        raise KeyError(f"languages not scored: {', '.join(missing)}")
    n = len(langs)
    return MacroScores(
        precision=sum(scores[l].precision for l in langs) / n,
        recall=sum(scores[l].recall for l in langs) / n,
        f1=sum(scores[l].f1 for l in langs) / n,
    )


def filter_local_only(langs: Iterable[str], db: GeoDatabase) -> set[str]:
    """Drop the international languages, keeping only local ones."""
    return set(langs) - db.international


# --- Student-t via the regularized incomplete beta -----------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            break
    return h


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed(t: float, df: int) -> float:
    """P(|T| >= |t|) for T ~ Student-t with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    return _reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    tails: str
    degenerate: bool = False   # sd of differences was zero

    def significance(self) -> str:
        if self.p < 0.001:
            return "**"
        if self.p < 0.01:
            return "*"
        return ""


def paired_t_test(geo: Mapping[str, float], base: Mapping[str, float],
                  tails: str = "two") -> TTestResult:
    """t-test over per-language differences geo - base, paired by key.

    One-tailed tests the hypothesis mean(d) > 0.  Conventions: all-zero
    differences give t = 0, p = 1; a nonzero constant difference has no
    spread, so p underflows and is reported as 0 with ``degenerate`` set.
    """
    if tails not in ("one", "two"):
        raise ValueError(f"tails must be 'one' or 'two', got {tails!r}")
    if set(geo) != set(base):
        raise ValueError("paired t-test inputs must share the same languages")
    keys = sorted(geo)
    n = len(keys)
    if n < 2:
        raise ValueError(f"need at least 2 paired values, got {n}")
    d = [geo[k] - base[k] for k in keys]
    mean = sum(d) / n
    var = sum((x - mean) ** 2 for x in d) / (n - 1)
    df = n - 1
    sd = math.sqrt(var)
    if sd == 0.0 and mean == 0.0:
        return TTestResult(t=0.0, p=1.0, df=df, tails=tails)
    if sd * 1e12 <= abs(mean):
        # (numerically) constant nonzero difference: p underflows to 0
        t = math.inf if mean > 0 else -math.inf
        p = 0.0 if (tails == "two" or mean > 0) else 1.0
        return TTestResult(t=t, p=p, df=df, tails=tails, degenerate=True)
    t = mean / math.sqrt(var / n)
    p_two = student_t_two_tailed(t, df)
    if tails == "two":
        return TTestResult(t=t, p=p_two, df=df, tails=tails)
    p_one = p_two / 2.0 if t > 0 else 1.0 - p_two / 2.0
    return TTestResult(t=t, p=p_one, df=df, tails=tails)


def low_f_report(scores: Mapping[str, Scores], threshold: float
                 ) -> list[tuple[str, float]]:
    """Languages with f below ``threshold``, ascending by f."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    rows = [(lang, s.f1) for lang, s in scores.items() if s.f1 < threshold]
    rows.sort(key=lambda item: (item[1], item[0]))
    return rows


# --- region evaluation ----------------------------------------------------

@dataclass
class EvalReport:
    region: str
    n_langs: int
    n_samples: int
    geo_macro: MacroScores
    base_macro: MacroScores
    ttest: TTestResult | None
    geo_scores: dict[str, Scores] = field(repr=False, default_factory=dict)
    base_scores: dict[str, Scores] = field(repr=False, default_factory=dict)
    languages: list[str] = field(default_factory=list)
    local_only: bool = False


def evaluate_region(registry: ModelRegistry, region: str,
                    test_set: Iterable[LabeledSample],
                    tails: str = "two", local_only: bool = False,
                    renormalize_baseline: bool = False) -> EvalReport:
    """Score the regional model against the baseline on the same samples.

    Baseline predictions run over its full label head; anything it predicts
    outside the region's language set stays in the confusion table as an
    error (``renormalize_baseline`` instead restricts its softmax to the
    region set).  The macro average and the paired test cover the region
    languages observed in the test set, optionally local-only.
    """
    samples = list(test_set)
    if not samples:
        raise ValueError("empty test set")
    db = registry.geodb
    admissible = db.languages_for_region(region)
    bad = sorted({s.label for s in samples} - admissible)
    if bad:
        raise ValueError(f"test labels outside region {region}: "
                         f"{', '.join(bad)}")

    geo_model = registry.model_for(region)
    base_model = registry.model_for(BASELINE)
    texts = [s.text for s in samples]
    geo_preds = predict_batch(geo_model, texts, k=1)
    base_preds = predict_batch(
        base_model, texts, k=1,
        allowed_labels=set(admissible) if renormalize_baseline else None)

    geo_conf = ConfusionTable()
    base_conf = ConfusionTable()
    for s, gp, bp in zip(samples, geo_preds, base_preds):
        geo_conf.add(s.label, gp[0][0])
        base_conf.add(s.label, bp[0][0])
    geo_scores = score(geo_conf)
    base_scores = score(base_conf)

    langs = {s.label for s in samples}
    if local_only:
        langs = filter_local_only(langs, db)
        if not langs:
            raise ValueError(f"no local languages in the {region} test set")
    langs = sorted(langs)
    # scored dicts may lack a language the model never predicted and never
    # saw; give those explicit zero rows so macro sets always line up
    zero = Scores(0.0, 0.0, 0.0, 0)
    geo_full = {l: geo_scores.get(l, zero) for l in langs}
    base_full = {l: base_scores.get(l, zero) for l in langs}

    ttest = None
    if len(langs) >= 2:
        ttest = paired_t_test({l: geo_full[l].f1 for l in langs},
                              {l: base_full[l].f1 for l in langs},
                              tails=tails)
    return EvalReport(
        region=region,
        n_langs=len(langs),
        n_samples=len(samples),
        geo_macro=macro_average(geo_full, langs),
        base_macro=macro_average(base_full, langs),
        ttest=ttest,
        geo_scores=geo_full,
        base_scores=base_full,
        languages=langs,
        local_only=local_only,
    )


_SUMMARY_COLUMNS = ("region", "n_langs", "precision_geo", "precision_base",
                    "recall_geo", "recall_base", "f1_geo", "f1_base",
                    "test_samples", "t", "p", "sig")


def report_rows(reports: Iterable[EvalReport]) -> list[dict[str, str]]:
    rows = []
    for r in reports:
        sig = r.ttest.significance() if r.ttest else ""
        rows.append({
            "region": r.region,
            "n_langs": str(r.n_langs),
            "precision_geo": f"{r.geo_macro.precision:.4f}",
            "precision_base": f"{r.base_macro.precision:.4f}",
            "recall_geo": f"{r.geo_macro.recall:.4f}",
            "recall_base": f"{r.base_macro.recall:.4f}",
            "f1_geo": f"{r.geo_macro.f1:.4f}{sig}",
            "f1_base": f"{r.base_macro.f1:.4f}",
            "test_samples": str(r.n_samples),
            "t": f"{r.ttest.t:.4f}" if r.ttest else "-",
            "p": _format_p(r.ttest) if r.ttest else "-",
            "sig": sig,
        })
    return rows


def _format_p(ttest: TTestResult) -> str:
    if ttest.degenerate:
        return "<1e-12"
    return f"{ttest.p:.3g}"


def write_summary_tsv(reports: Iterable[EvalReport], path) -> None:
    rows = report_rows(reports)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write("\t".join(row[c] for c in _SUMMARY_COLUMNS) + "\n")


def format_summary_table(reports: Iterable[EvalReport]) -> str:
    """Fixed-width table; '*' marks p<0.01 and '**' p<0.001."""
    rows = report_rows(reports)
    headers = ("Region", "N. Langs", "P geo", "P base", "R geo", "R base",
               "F geo", "F base", "Test Samples", "t", "p")
    keys = _SUMMARY_COLUMNS[:11]
    widths = [max(len(h), max((len(r[k]) for r in rows), default=0))
              for h, k in zip(headers, keys)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(r[k].ljust(w)
                               for k, w in zip(keys, widths)).rstrip())
    return "\n".join(lines)


def write_per_language_tsv(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("language\tsupport\tprecision_geo\trecall_geo\tf1_geo"
                 "\tprecision_base\trecall_base\tf1_base\n")
        for lang in report.languages:
            g = report.geo_scores[lang]
            b = report.base_scores[lang]
            fh.write(f"{lang}\t{g.support}\t{g.precision:.4f}\t{g.recall:.4f}"
                     f"\t{g.f1:.4f}\t{b.precision:.4f}\t{b.recall:.4f}"
                     f"\t{b.f1:.4f}\n")
