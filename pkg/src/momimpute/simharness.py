"""Monte Carlo studies: sample, impute, pool, and summarise over replicates."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .datagen import apply_missingness, generate_sample, true_eta
from .errors import InsufficientRespondents, RankDeficient
from .imputer import fit_posterior, impute
from .pooling import PooledResult, pool
from .randcore import RngStream

__all__ = [
    "ReplicateRecord",
    "ReportRow",
    "StudyReport",
    "run_replicate",
    "run_study",
    "emit_report",
    "parse_report_csv",
    "records_to_csv",
    "METHODS",
]

log = logging.getLogger(__name__)

METHODS = ("rubin", "new")
MAX_RESAMPLES = 100

# stream layout under (replicate, attempt)
_SAMPLE, _RESPONSE, _IMPUTE = 0, 1, 2


@dataclass(frozen=True)
class ReplicateRecord:
    """Pooled results of one Monte Carlo replicate.

    ``pooled`` maps ``(estimand label, M)`` to a :class:`PooledResult`;
    ``resamples`` counts samples discarded because imputation failed.
    """

    index: int
    resamples: int
    pooled: dict


def replicate_stream(config: ScenarioConfig, index: int, attempt: int = 0) -> RngStream:
    return RngStream(config.root_seed, (index, attempt))


def draw_incomplete(config: ScenarioConfig, stream: RngStream):
    sample = generate_sample(config.model, config.n, stream.child(_SAMPLE))
    return apply_missingness(sample, config.mechanism, stream.child(_RESPONSE))


def run_replicate(config: ScenarioConfig, replicate_index: int) -> ReplicateRecord:
    """One sample -> max(M) over-imputations -> pooled results per estimand and M.

    Smaller M values pool the leading imputations of the same set.  A sample
    whose respondents cannot support the posterior is redrawn from the next
    attempt sub-stream.
    """
    for attempt in range(MAX_RESAMPLES):
        stream = replicate_stream(config, replicate_index, attempt)
        data = draw_incomplete(config, stream)
        try:
            post = fit_posterior(data)
        except (RankDeficient, InsufficientRespondents) as exc:
            log.debug("replicate %d attempt %d resampled: %s", replicate_index, attempt, exc)
            continue
        imps = impute(data, config.M, stream.child(_IMPUTE), post=post)
        pooled = {}
        for est in config.estimands:
            for M in config.imputations:
                pooled[(est.label, M)] = pool(
                    est, imps.y_completed[:M], imps.y_over[:M], data.r
                )
        return ReplicateRecord(replicate_index, attempt, pooled)
    raise RuntimeError(f"replicate {replicate_index}: no usable sample in {MAX_RESAMPLES} attempts")


@dataclass
class ReportRow:
    estimand: str
    M: int
    method: str
    relative_bias_pct: float
    mc_variance: float
    mean_variance: float
    mean_width: dict
    coverage: dict
    negativity_count: int
    replicates: int
    true_eta: float
    mean_estimate: float


@dataclass
class StudyReport:
    name: str
    levels: tuple
    rows: list
    resamples: int = 0
    records: list = field(default_factory=list, repr=False, compare=False)

    def row(self, estimand: str, M: int, method: str) -> ReportRow:
        for r in self.rows:
            if r.estimand == estimand and r.M == M and r.method == method:
                return r
        raise KeyError((estimand, M, method))


def _summarise(config: ScenarioConfig, records) -> StudyReport:
    rows = []
    for est in config.estimands:
        truth = true_eta(config.model, est)
        for M in config.imputations:
            res = [rec.pooled[(est.label, M)] for rec in records]
            etas = np.array([p.eta_mi for p in res])
            mc_var = float(np.var(etas, ddof=1))
            for method in METHODS:
                v = np.array([p.v_rubin if method == "rubin" else p.v_new for p in res])
                widths, cover = {}, {}
                for lv in config.levels:
                    cis = [p.interval(method, lv) for p in res]
                    widths[lv] = float(np.mean([ci.width for ci in cis]))
                    cover[lv] = float(np.mean([ci.covers(truth) for ci in cis]))
                neg = sum(p.negative for p in res) if method == "new" else 0
                rows.append(ReportRow(
                    estimand=est.label, M=M, method=method,
                    relative_bias_pct=100.0 * (float(v.mean()) - mc_var) / mc_var,
                    mc_variance=mc_var, mean_variance=float(v.mean()),
                    mean_width=widths, coverage=cover, negativity_count=int(neg),
                    replicates=len(res), true_eta=truth, mean_estimate=float(etas.mean()),
                ))
    return StudyReport(
        name=config.name, levels=tuple(config.levels), rows=rows,
        resamples=sum(r.resamples for r in records), records=list(records),
    )


def run_study(config: ScenarioConfig, workers: int | None = None) -> StudyReport:
    """Run every replicate and aggregate.

    Replicates are independent tasks keyed by index, so the report is the
    same for any ``workers`` count.
    """
    workers = config.workers if workers is None else workers
    indices = range(config.replicates)
    if workers <= 1:
        records = [run_replicate(config, i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool_:
            records = list(pool_.map(lambda i: run_replicate(config, i), indices))
    return _summarise(config, records)


# -- serialisation -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _level_tag(lv: float) -> str:
    return f"{lv * 100:g}"


def _csv_header(levels):
    cols = ["estimand", "M", "method", "relative_bias_pct", "mc_variance", "mean_variance"]
    for lv in levels:
        cols += [f"mean_width_{_level_tag(lv)}", f"coverage_{_level_tag(lv)}"]
    cols += ["negativity_count", "replicates", "true_eta", "mean_estimate"]
    return cols


def emit_report(report: StudyReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        return _emit_csv(report)
    if fmt == "markdown":
        return _emit_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _emit_csv(report: StudyReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_csv_header(report.levels))
    for r in report.rows:
        line = [r.estimand, r.M, r.method, _fmt(r.relative_bias_pct), _fmt(r.mc_variance),
                _fmt(r.mean_variance)]
        for lv in report.levels:
            line += [_fmt(r.mean_width[lv]), _fmt(r.coverage[lv])]
        line += [r.negativity_count, r.replicates, _fmt(r.true_eta), _fmt(r.mean_estimate)]
        w.writerow(line)
    return buf.getvalue()


def parse_report_csv(text: str, name: str = "scenario") -> StudyReport:
    reader = csv.DictReader(io.StringIO(text))
    tags = [c[len("coverage_"):] for c in reader.fieldnames if c.startswith("coverage_")]
    levels = tuple(float(t) / 100.0 for t in tags)
    rows = []
    for d in reader:
        rows.append(ReportRow(
            estimand=d["estimand"], M=int(d["M"]), method=d["method"],
            relative_bias_pct=float(d["relative_bias_pct"]),
            mc_variance=float(d["mc_variance"]), mean_variance=float(d["mean_variance"]),
            mean_width={lv: float(d[f"mean_width_{t}"]) for lv, t in zip(levels, tags)},
            coverage={lv: float(d[f"coverage_{t}"]) for lv, t in zip(levels, tags)},
            negativity_count=int(d["negativity_count"]), replicates=int(d["replicates"]),
            true_eta=float(d["true_eta"]), mean_estimate=float(d["mean_estimate"]),
        ))
    return StudyReport(name=name, levels=levels, rows=rows)


def _emit_markdown(report: StudyReport) -> str:
    head = ["Estimand", "M", "Relative bias (%) Rubin", "Relative bias (%) New"]
    for lv in report.levels:
        head += [f"Mean width {_level_tag(lv)}% Rubin", f"Mean width {_level_tag(lv)}% New"]
    for lv in report.levels:
        head += [f"Coverage {_level_tag(lv)}% Rubin", f"Coverage {_level_tag(lv)}% New"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]

    keys = []
    for r in report.rows:
        if (r.estimand, r.M) not in keys:
            keys.append((r.estimand, r.M))
    for est, M in keys:
        rub = report.row(est, M, "rubin")
        new = report.row(est, M, "new")
        cells = [est, str(M), f"{rub.relative_bias_pct:.1f}", f"{new.relative_bias_pct:.2f}"]
        for lv in report.levels:
            cells += [f"{rub.mean_width[lv]:.3f}", f"{new.mean_width[lv]:.3f}"]
        for lv in report.levels:
            cells += [f"{rub.coverage[lv]:.3f}", f"{new.coverage[lv]:.3f}"]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def records_to_csv(records, fields=("eta_mi", "v_rubin", "v_new", "w_m", "b_m", "c_m",
                                    "d_mn", "d_mr", "df_rubin", "r")) -> str:
    """Flat per-replicate dump: one line per (replicate, estimand, M)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replicate", "resamples", "estimand", "M", *fields])
    for rec in records:
        for (label, M), p in rec.pooled.items():
            w.writerow([rec.index, rec.resamples, label, M,
                        *(_fmt(getattr(p, f)) for f in fields)])
    return buf.getvalue()
