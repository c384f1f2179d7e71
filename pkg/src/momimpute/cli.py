"""Command-line interface.

    momimpute run-study --config sim2_mcar.toml --seed 42 --out report.csv
    momimpute bias --config sim1_i.toml
    momimpute dump-imputations --config sim2_mcar.toml --out datasets/
    momimpute pool datasets/ --estimand threshold:1
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

from .biastheory import theoretical_bias
from .config import builtin_config, load_config
from .datasets import dump_imputations, load_imputations
from .errors import ConfigError, MIError, SchemaError
from .estimators import Estimand
from .imputer import impute
from .pooling import PooledResult, pool
from .randcore import RngStream
from .simharness import (
    _IMPUTE,
    draw_incomplete,
    emit_report,
    parse_report_csv,
    records_to_csv,
    replicate_stream,
    run_study,
)

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("momimpute")


def _load(args):
    if args.config is None:
        raise ConfigError("--config", "a --config file (or builtin:<name>) is required")
    if args.config.startswith("builtin:"):
        cfg = builtin_config(args.config.split(":", 1)[1])
    else:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError("--config", f"config file not found: {path}")
        cfg = load_config(path)
    return cfg.with_overrides(
        seed=args.seed,
        replicates=getattr(args, "replicates", None),
        imputations=getattr(args, "imputations", None),
        workers=getattr(args, "workers", None),
    )


def _write(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _table(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _markdown(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    lines = ["| " + " | ".join(keys) + " |", "|" + "---|" * len(keys)]
    for r in rows:
        lines.append("| " + " | ".join(
            f"{v:.6g}" if isinstance(v, float) else str(v) for v in r.values()) + " |")
    return "\n".join(lines) + "\n"


def cmd_run_study(args) -> int:
    cfg = _load(args)
    report = run_study(cfg)
    _write(emit_report(report, args.format), args.out)
    if args.records:
        Path(args.records).write_text(records_to_csv(report.records))
    if args.out not in (None, "-"):
        print(emit_report(report, "markdown"), end="")
    if report.resamples:
        print(f"note: {report.resamples} sample(s) redrawn after imputation failures",
              file=sys.stderr)
    return 0


def cmd_bias(args) -> int:
    cfg = _load(args)
    stream = RngStream(cfg.root_seed).descend(2**31 - 1)
    rows = []
    empirical = None
    if args.report:
        empirical = parse_report_csv(Path(args.report).read_text())
    for est in cfg.estimands:
        row = theoretical_bias(cfg.model, cfg.mechanism, est, cfg.n, args.draws, stream)
        if empirical is not None:
            cands = [r for r in empirical.rows if r.estimand == est.label and r.method == "rubin"]
            if cands:
                er = max(cands, key=lambda r: r.M)
                row["empirical_bias"] = er.mean_variance - er.mc_variance
                row["empirical_relative_bias_pct"] = er.relative_bias_pct
        rows.append(row)
    _write(_markdown(rows) if args.format == "markdown" else _table(rows), args.out)
    return 0


def cmd_dump(args) -> int:
    cfg = _load(args)
    stream = replicate_stream(cfg, args.replicate)
    data = draw_incomplete(cfg, stream)
    imps = impute(data, cfg.M, stream.child(_IMPUTE))
    out = Path(args.out or "imputations")
    files = dump_imputations(imps, out)
    print(f"wrote {len(files)} files to {out} (n={data.n}, r={data.r}, M={imps.M})")
    return 0


def cmd_pool(args) -> int:
    try:
        estimand = Estimand.parse(args.estimand)
    except ValueError as exc:
        raise ConfigError("--estimand", str(exc)) from None
    y_completed, y_over, r = load_imputations(args.paths)
    res = pool(estimand, y_completed, y_over, r)
    rec = {"estimand": estimand.label, **res.as_record()}
    for lv in args.level:
        for method in ("rubin", "new"):
            ci = res.interval(method, lv)
            tag = f"{lv * 100:g}"
            rec[f"{method}_lower_{tag}"] = ci.lower
            rec[f"{method}_upper_{tag}"] = ci.upper
    rows = [{k: (int(v) if isinstance(v, bool) else v) for k, v in rec.items()}]
    _write(_markdown(rows) if args.format == "markdown" else _table(rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momimpute",
        description="Multiple imputation variance estimation for method-of-moments estimators.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="scenario TOML file, or builtin:<name>")
            p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "markdown"), default="csv")

    p = sub.add_parser("run-study", help="run a Monte Carlo study")
    common(p)
    p.add_argument("--replicates", type=int)
    p.add_argument("--imputations", type=int, nargs="+", metavar="M")
    p.add_argument("--workers", type=int, help="parallel worker threads")
    p.add_argument("--records", help="also write per-replicate pooled results here")
    p.set_defaults(func=cmd_run_study)

    p = sub.add_parser("bias", help="theoretical bias of Rubin's variance estimator")
    common(p)
    p.add_argument("--draws", type=int, default=2_000_000,
                   help="Monte Carlo draws for the moment oracle")
    p.add_argument("--report", help="run-study CSV to show empirical bias alongside")
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("dump-imputations", help="write original + M over-imputed datasets")
    common(p)
    p.add_argument("--imputations", type=int, nargs="+", metavar="M")
    p.add_argument("--replicate", type=int, default=0, help="which Monte Carlo sample to dump")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("pool", help="pool completed datasets without the imputation model")
    common(p, config=False)
    p.add_argument("paths", nargs="+", help="imputation CSV files or a directory of them")
    p.add_argument("--estimand", default="mean", help="mean or threshold:<q>")
    p.add_argument("--level", type=float, nargs="+", default=[0.90, 0.95])
    p.set_defaults(func=cmd_pool)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, MIError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
