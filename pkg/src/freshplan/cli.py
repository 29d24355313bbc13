"""Command-line pipeline: synth, forecast, intervals, rank, optimize, evaluate.

Every stage reads/writes CSV artifacts under the output directory and is
deterministic given the top-level seed.  Exit codes: 0 success, 1 input error,
2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import demand as demand_mod
from . import forecaster, gaopt, intervals as intervals_mod, mcdm, pipeline
from .config import RunConfig, RunManifest, derive_seed, load_config
from .errors import InputError, InvariantError
from .forecaster import ModelConfig
from .solarterms import TermBoundaryTable, encode_date_range

log = logging.getLogger("freshplan")

FORECAST_HEADER = ["product_id", "date", "predicted_cost"]
INTERVALS_HEADER = ["product_id", "level", "mean", "std", "lower", "upper"]
INTERVALS_DAILY_HEADER = ["product_id", "level", "day_offset", "mean", "std", "lower", "upper"]
DEMAND_HEADER = ["product_id", "intercept", "slope", "r_squared", "anomalous_slope"]
RANKING_HEADER = ["rank", "product_id", "score", "d_plus", "d_minus"]
PLAN_HEADER = ["product_id", "price", "allocation", "expected_sales", "expected_profit"]
GA_TRACE_HEADER = ["generation", "max", "min", "avg"]


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path, header: list[str]) -> list[dict[str, str]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != header:
                raise InputError(f"{path}: expected header {','.join(header)}, "
                                 f"got {reader.fieldnames}")
            return list(reader)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _boundary_table(config: RunConfig) -> TermBoundaryTable:
    if config.paths.boundaries:
        return TermBoundaryTable.from_csv(config.paths.boundaries)
    return TermBoundaryTable()


# -- stages -------------------------------------------------------------------


def cmd_synth(config: RunConfig, out_dir: Path, manifest: RunManifest) -> None:
    started = manifest.start_stage("synth")
    table = _boundary_table(config)
    costs, sales, prices = pipeline.generate_synthetic(
        config.synth.products, config.synth.days, derive_seed(config.seed, "synth"), table)
    costs_path = out_dir / config.paths.costs
    sales_path = out_dir / config.paths.sales
    pipeline.write_costs(str(costs_path), costs)
    pipeline.write_sales(str(sales_path), sales, prices)
    manifest.end_stage("synth", started, [str(costs_path), str(sales_path)],
                       products=len(costs))
    log.info("synth: %d products x %d days", config.synth.products, config.synth.days)


def _train_deploy_model(frame: pipeline.SeriesFrame, table: TermBoundaryTable,
                        config: RunConfig, seed: int) -> tuple[forecaster.ForecasterModel,
                                                               forecaster.TrainReport]:
    normalizer = pipeline.fit_normalizer(frame.values)
    windows = pipeline.make_windows(frame, table, config.window.input_days,
                                    config.window.horizon_days, normalizer)
    model_cfg = ModelConfig(channels=config.tcn.channels, kernel_size=config.tcn.kernel,
                            dilations=list(config.tcn.dilations))
    model = forecaster.ForecasterModel.create(normalizer, frame.product_id, seed, model_cfg)
    batch_size = config.train.batch_size if config.train.batch_size > 0 else None
    report = forecaster.train(model, windows, epochs=config.train.epochs,
                              lr=config.train.lr, seed=derive_seed(seed, "order"),
                              batch_size=batch_size)
    return model, report


def cmd_forecast(config: RunConfig, out_dir: Path, manifest: RunManifest) -> None:
    started = manifest.start_stage("forecast")
    table = _boundary_table(config)
    costs_path = out_dir / config.paths.costs
    frames = pipeline.load_costs(str(costs_path))
    manifest.note_input("costs", costs_path)

    need = config.window.input_days + config.window.horizon_days
    rows, curve_rows, skipped = [], [], 0
    for pid in sorted(frames):
        frame = frames[pid]
        if len(frame) < need:
            log.warning("forecast: skipping %s (%d days < %d)", pid, len(frame), need)
            skipped += 1
            continue
        model, report = _train_deploy_model(frame, table, config,
                                            derive_seed(config.seed, "forecast", pid))
        history = frame.values[-config.window.input_days:]
        first_day = frame.dates[-1] + dt.timedelta(days=1)
        terms = encode_date_range(first_day, config.window.horizon_days, table)
        predicted = forecaster.predict(model, history, terms, config.window.input_days)
        for i, value in enumerate(predicted):
            day = first_day + dt.timedelta(days=i)
            rows.append([pid, day.isoformat(), _fmt(value)])
        for epoch, loss in enumerate(report.loss_curve):
            curve_rows.append([pid, str(epoch), _fmt(loss)])

    forecast_path = out_dir / config.paths.forecast
    _write_csv(forecast_path, FORECAST_HEADER, rows)
    curves_path = out_dir / "loss_curves.csv"
    _write_csv(curves_path, ["product_id", "epoch", "loss"], curve_rows)
    manifest.end_stage("forecast", started, [str(forecast_path), str(curves_path)],
                       skipped=skipped, forecast_rows=len(rows))
    log.info("forecast: %d rows, %d products skipped", len(rows), skipped)


def cmd_intervals(config: RunConfig, out_dir: Path, manifest: RunManifest) -> None:
    started = manifest.start_stage("intervals")
    table = _boundary_table(config)
    sales_path = out_dir / config.paths.sales
    qty_frames, _ = pipeline.load_sales(str(sales_path))
    manifest.note_input("sales", sales_path)

    base_cfg = ModelConfig(channels=config.bootstrap.channels, kernel_size=config.tcn.kernel,
                           dilations=list(config.bootstrap.dilations))
    rows, daily_rows, skipped = [], [], 0
    z = intervals_mod.z_for_level(config.bootstrap.level)
    min_len = config.window.input_days + config.window.horizon_days
    for pid in sorted(qty_frames):
        frame = qty_frames[pid]
        if len(frame) < min_len:
            log.warning("intervals: skipping %s (%d days < %d)", pid, len(frame), min_len)
            skipped += 1
            continue
        ensemble = intervals_mod.bootstrap_train(
            frame,
            replicas=config.bootstrap.replicas,
            min_fraction=config.bootstrap.min_fraction,
            seed=derive_seed(config.seed, "intervals", pid),
            table=table,
            config=base_cfg,
            epochs=config.bootstrap.epochs,
            lr=config.bootstrap.lr,
            input_days=config.window.input_days,
        )
        history = frame.values[-config.window.input_days:]
        first_day = frame.dates[-1] + dt.timedelta(days=1)
        terms = encode_date_range(first_day, config.window.horizon_days, table)
        interval = intervals_mod.predict_interval(ensemble, history, terms,
                                                  level=config.bootstrap.level)
        rows.append([pid, _fmt(interval.level), _fmt(interval.mean), _fmt(interval.std),
                     _fmt(interval.lower), _fmt(interval.upper)])
        for day in range(ensemble.daily.shape[1]):
            day_mean = float(ensemble.daily[:, day].mean())
            day_std = float(ensemble.daily[:, day].std())
            daily_rows.append([pid, _fmt(interval.level), str(day),
                               _fmt(day_mean), _fmt(day_std),
                               _fmt(max(0.0, day_mean - z * day_std)),
                               _fmt(day_mean + z * day_std)])

    intervals_path = out_dir / config.paths.intervals
    _write_csv(intervals_path, INTERVALS_HEADER, rows)
    daily_path = out_dir / config.paths.intervals_daily
    _write_csv(daily_path, INTERVALS_DAILY_HEADER, daily_rows)
    manifest.end_stage("intervals", started, [str(intervals_path), str(daily_path)],
                       skipped=skipped)
    log.info("intervals: %d products, %d skipped", len(rows), skipped)


def _build_criteria(qty: dict[str, pipeline.SeriesFrame],
                    price: dict[str, pipeline.SeriesFrame],
                    costs: dict[str, pipeline.SeriesFrame]) -> mcdm.CriteriaMatrix:
    """Total realized profit and total sales volume per product, joined by date."""
    ids = sorted(set(qty) & set(costs))
    if len(ids) < 2:
        raise InputError("ranking needs at least 2 products present in sales and costs")
    x = np.zeros((len(ids), 2))
    for row, pid in enumerate(ids):
        cost_by_date = dict(zip(costs[pid].dates, costs[pid].values))
        profit = 0.0
        volume = 0.0
        for day, q, p in zip(qty[pid].dates, qty[pid].values, price[pid].values):
            volume += q
            if day in cost_by_date:
                profit += q * (p - cost_by_date[day])
        x[row] = (profit, volume)
    return mcdm.CriteriaMatrix(ids, list(mcdm.DEFAULT_CRITERIA), x)


def cmd_rank(config: RunConfig, out_dir: Path, manifest: RunManifest) -> None:
    started = manifest.start_stage("rank")
    sales_path = out_dir / config.paths.sales
    costs_path = out_dir / config.paths.costs
    qty_frames, price_frames = pipeline.load_sales(str(sales_path))
    cost_frames = pipeline.load_costs(str(costs_path))
    matrix = _build_criteria(qty_frames, price_frames, cost_frames)
    weights, result = mcdm.rank_products(matrix)

    score_by_id = dict(zip(result.product_ids, result.scores))
    d_plus_by_id = dict(zip(result.product_ids, result.d_plus))
    d_minus_by_id = dict(zip(result.product_ids, result.d_minus))
    rows = [[str(rank), pid, _fmt(score_by_id[pid]), _fmt(d_plus_by_id[pid]),
             _fmt(d_minus_by_id[pid])]
            for rank, pid in enumerate(result.ranking, start=1)]
    ranking_path = out_dir / config.paths.ranking
    _write_csv(ranking_path, RANKING_HEADER, rows)

    k = min(config.topsis.top_k, len(result.ranking))
    manifest.end_stage("rank", started, [str(ranking_path)],
                       entropy_weights=[round(v, 6) for v in weights.w],
                       selected=mcdm.select_top(result, k))
    log.info("rank: %d products, weights=%s", len(rows),
             ", ".join(f"{name}={w:.4f}" for name, w in zip(matrix.criteria, weights.w)))


def cmd_optimize(config: RunConfig, out_dir: Path, manifest: RunManifest,
                 baseline: str | None = None) -> None:
    started = manifest.start_stage("optimize")
    ranking_rows = _read_csv(out_dir / config.paths.ranking, RANKING_HEADER)
    forecast_rows = _read_csv(out_dir / config.paths.forecast, FORECAST_HEADER)
    interval_rows = _read_csv(out_dir / config.paths.intervals, INTERVALS_HEADER)
    qty_frames, price_frames = pipeline.load_sales(str(out_dir / config.paths.sales))

    unit_costs: dict[str, list[float]] = {}
    for row in forecast_rows:
        unit_costs.setdefault(row["product_id"], []).append(float(row["predicted_cost"]))
    intervals_by_id = {
        row["product_id"]: intervals_mod.SalesInterval(
            product_id=row["product_id"], mean=float(row["mean"]), std=float(row["std"]),
            lower=float(row["lower"]), upper=float(row["upper"]), level=float(row["level"]))
        for row in interval_rows
    }

    ranked_ids = [row["product_id"] for row in ranking_rows]
    selected = ranked_ids[:min(config.topsis.top_k, len(ranked_ids))]

    contexts, demand_rows = [], []
    for pid in selected:
        if pid not in unit_costs or pid not in intervals_by_id or pid not in qty_frames:
            log.warning("optimize: skipping %s (missing forecast, interval, or sales)", pid)
            continue
        curve = demand_mod.fit_demand(price_frames[pid].values, qty_frames[pid].values, pid)
        demand_rows.append([pid, _fmt(curve.intercept), _fmt(curve.slope),
                            _fmt(curve.r_squared), "true" if curve.anomalous_slope else "false"])
        contexts.append(gaopt.ProductContext(
            product_id=pid,
            unit_cost=float(np.mean(unit_costs[pid])),
            demand=curve,
            interval=intervals_by_id[pid],
        ))
    if not contexts:
        raise InputError("optimize: no usable products after joining artifacts")

    demand_path = out_dir / config.paths.demand
    _write_csv(demand_path, DEMAND_HEADER, demand_rows)

    ga_config = gaopt.GaConfig(
        pop=config.ga.pop,
        gens=config.ga.gens,
        tournament=config.ga.tournament,
        elitism=config.ga.elitism,
        crossover_rate=config.ga.crossover_rate,
        mutation=gaopt.MutationConfig(prob=config.ga.mutation_prob,
                                      sigma_fraction=config.ga.sigma_fraction,
                                      decay=config.ga.sigma_decay),
        seed=derive_seed(config.seed, "optimize"),
    )
    result = gaopt.evolve(contexts, ga_config)

    plan_rows = [[r["product_id"], _fmt(r["price"]), _fmt(r["allocation"]),
                  _fmt(r["expected_sales"]), _fmt(r["expected_profit"])]
                 for r in gaopt.decode_plan(result.best, contexts)]
    plan_path = out_dir / config.paths.plan
    _write_csv(plan_path, PLAN_HEADER, plan_rows)

    trace_rows = [[str(s.generation), _fmt(s.max_fitness), _fmt(s.min_fitness),
                   _fmt(s.avg_fitness)] for s in result.trace]
    trace_path = out_dir / config.paths.ga_trace
    _write_csv(trace_path, GA_TRACE_HEADER, trace_rows)

    extra = {"best_profit": round(result.best_fitness, 6),
             "evaluations": result.evaluations, "products": len(contexts)}
    if baseline == "random":
        _, random_best = gaopt.random_search(
            contexts, result.evaluations, seed=derive_seed(config.seed, "optimize", "baseline"))
        extra["random_search_profit"] = round(random_best, 6)
        log.info("optimize: GA profit %.3f vs random-search %.3f",
                 result.best_fitness, random_best)
    manifest.end_stage("optimize", started,
                       [str(demand_path), str(plan_path), str(trace_path)], **extra)
    log.info("optimize: best weekly profit %.3f over %d products",
             result.best_fitness, len(contexts))


def cmd_evaluate(pred_path: Path, truth_path: Path) -> forecaster.MetricsReport:
    """Join predictions with realized costs on (product_id, date) and score them."""
    pred_rows = _read_csv(pred_path, FORECAST_HEADER)
    truth = pipeline.load_costs(str(truth_path))
    y, y_hat = [], []
    for row in pred_rows:
        pid = row["product_id"]
        if pid not in truth:
            continue
        frame = truth[pid]
        day = dt.date.fromisoformat(row["date"])
        if frame.dates[0] <= day <= frame.dates[-1]:
            y.append(frame.values[(day - frame.dates[0]).days])
            y_hat.append(float(row["predicted_cost"]))
    if not y:
        raise InputError("no overlapping (product_id, date) pairs between predictions and truth")
    report = forecaster.evaluate(y, y_hat)
    print(f"n={len(y)} MSE={report.mse:.6f} MAE={report.mae:.6f} RMSE={report.rmse:.6f}")
    return report


# -- entry point ---------------------------------------------------------------


STAGES = {
    "synth": cmd_synth,
    "forecast": cmd_forecast,
    "intervals": cmd_intervals,
    "rank": cmd_rank,
}

RUN_ALL_ORDER = ["synth", "forecast", "intervals", "rank", "optimize"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="freshplan",
        description="Cost forecasting and price/allocation planning for fresh produce",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="override the top-level seed")
    parser.add_argument("--out", default=".", help="directory for all artifacts")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "forecast", "intervals", "rank"):
        sub.add_parser(name)
    optimize = sub.add_parser("optimize")
    optimize.add_argument("--baseline", choices=["random"],
                          help="also run an equal-budget baseline for comparison")
    evaluate = sub.add_parser("evaluate")
    evaluate.add_argument("--pred", required=True, help="predictions CSV (forecast schema)")
    evaluate.add_argument("--truth", required=True, help="realized costs CSV (costs schema)")
    run_all = sub.add_parser("run-all")
    run_all.add_argument("--baseline", choices=["random"])
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config, args.set)
    if args.seed is not None:
        config.seed = args.seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.command == "evaluate":
        cmd_evaluate(Path(args.pred), Path(args.truth))
        return 0

    manifest = RunManifest(config, out_dir)
    if args.command == "run-all":
        for name in RUN_ALL_ORDER:
            if name == "optimize":
                cmd_optimize(config, out_dir, manifest, baseline=args.baseline)
            else:
                STAGES[name](config, out_dir, manifest)
    elif args.command == "optimize":
        cmd_optimize(config, out_dir, manifest, baseline=args.baseline)
    else:
        STAGES[args.command](config, out_dir, manifest)
    manifest.write()
    return 0


def main() -> None:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        sys.exit(run())
    except InputError as exc:
        log.error("%s", exc)
        sys.exit(1)
    except InvariantError as exc:
        log.error("internal invariant violated: %s", exc)
        sys.exit(2)


if __name__ == "__main__":
    main()
