"""Command-line front end.

Commands: gen, train, eval, compare, calibrate, plot-state, report.
Every command resolves its configuration, derives all randomness from one
root seed and writes a ``<out>.run.json`` manifest, so reruns with the same
arguments produce byte-identical outputs.  Hard errors exit nonzero;
per-item failures inside sweeps and evaluations are recorded in the reports
and do not abort the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import classical, evalkit, hmm, mle, simgen, svg
from . import modelio
from . import tensornet as tn

# table-style defaults for the two reference estimators: a 2-layer GRU of
# width 20 trained on low-noise lines, and the tuned crossover
BASELINE_RNN_SPEC = tn.RnnSpec(cell="gru", n_layers=2, hidden_dim=20, dropout=0.2)
BASELINE_TRAIN_CONFIG = simgen.NoisyLineConfig(gamma=1.4, sigma_max=0.07)
BASELINE_LR = 0.005
BASELINE_EPOCHS = 200

LOSS_COLUMNS = ["series", "dynamic", "estimator", "net", "optimizer",
                "train_dynamic", "loss", "status"]


class CliError(RuntimeError):
    pass


def _write_run_manifest(out_path, command: str, config: dict) -> None:
    doc = {"command": command, "config": config}
    manifest = Path(str(out_path) + ".run.json")
    manifest.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
                        encoding="utf-8")


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    configs = None
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        entries = doc if isinstance(doc, list) else [doc]
        configs = {}
        for entry in entries:
            cfg = simgen.config_from_dict(entry)
            configs[entry["dynamic"]] = cfg
        if args.dynamic == "mixed" and len(configs) == 1:
            args.dynamic = next(iter(configs))
    try:
        ds = simgen.make_dataset(args.role, seed=args.seed, dynamic=args.dynamic,
                                 count=args.count, configs=configs,
                                 noise_scale=args.noise_scale)
    except simgen.ConfigError as exc:
        raise CliError(str(exc)) from exc
    simgen.save_dataset(ds, args.out)
    resolved = {
        "role": args.role, "dynamic": args.dynamic, "count": len(ds),
        "seed": args.seed, "noise_scale": args.noise_scale,
        "configs": {tag: simgen.config_to_dict(c)
                    for tag, c in
                    ((configs or simgen.default_configs(args.role))).items()},
    }
    _write_run_manifest(args.out, "gen", resolved)
    print(f"wrote {len(ds)} series to {args.out}")
    for tag in sorted(ds.composition):
        print(f"  {tag}: {ds.composition[tag]}")
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _train_rnn_entry(entry: dict, out_path: Path):
    """Train one triplet; returns (meta, log) and writes the model file."""
    if "dataset" in entry and entry["dataset"]:
        ds = simgen.load_dataset(entry["dataset"], role="train")
        dynamic = entry.get("dynamic", "file")
    else:
        dynamic = entry.get("dynamic", "noisy_line")
        configs = None
        if dynamic == "noisy_line" and entry.get("baseline_config", True):
            configs = {"noisy_line": BASELINE_TRAIN_CONFIG}
        ds = simgen.make_dataset("train", seed=int(entry.get("data_seed", 0)),
                                 dynamic=dynamic,
                                 count=int(entry.get("count", 200)),
                                 configs=configs)
    spec = tn.RnnSpec(cell=entry.get("cell", "gru"),
                      n_layers=int(entry.get("layers", 2)),
                      hidden_dim=int(entry.get("hidden", 20)),
                      dropout=float(entry.get("dropout", 0.2)))
    opts = tn.TrainOpts(optimizer=entry.get("optimizer", "adam"),
                        lr=float(entry.get("lr", BASELINE_LR)),
                        epochs=int(entry.get("epochs", BASELINE_EPOCHS)),
                        seed=int(entry.get("seed", 0)))
    params, log = tn.train(spec, ds, opts)
    meta = {
        "estimator": entry.get("name", "rnn"),
        "net": spec.cell, "optimizer": opts.optimizer,
        "train_dynamic": dynamic, "lr": opts.lr, "epochs": opts.epochs,
        "seed": opts.seed, "train_scale": tn.training_scale(ds),
    }
    tn.save_model(out_path, spec, params, meta=meta)
    return meta, log


def cmd_train(args) -> int:
    if args.sweep:
        manifest = json.loads(Path(args.sweep).read_text(encoding="utf-8"))
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, entry in enumerate(manifest):
            name = entry.get("name", f"triplet{i:03d}")
            entry = dict(entry, name=name)
            model_path = out_dir / f"{name}.json"
            try:
                meta, log = _train_rnn_entry(entry, model_path)
                rows.append({"name": name, "cell": entry.get("cell", "gru"),
                             "optimizer": entry.get("optimizer", "adam"),
                             "dynamic": entry.get("dynamic", "noisy_line"),
                             "status": "converged",
                             "final_loss": repr(log[-1]["loss"]) if log else "",
                             "model": str(model_path)})
            except tn.TrainingFailure as exc:
                rows.append({"name": name, "cell": entry.get("cell", "gru"),
                             "optimizer": entry.get("optimizer", "adam"),
                             "dynamic": entry.get("dynamic", "noisy_line"),
                             "status": "failed", "final_loss": "", "model": ""})
                print(f"triplet {name} failed: {exc}", file=sys.stderr)
        log_path = out_dir / "sweep_log.csv"
        _write_csv(log_path, ["name", "cell", "optimizer", "dynamic", "status",
                              "final_loss", "model"], rows)
        _write_run_manifest(out_dir / "sweep", "train-sweep",
                            {"manifest": manifest, "out": str(out_dir)})
        print(f"sweep finished: {sum(r['status'] == 'converged' for r in rows)}"
              f"/{len(rows)} converged; log at {log_path}")
        return 0

    if not args.dataset:
        raise CliError("--dataset is required unless --sweep is given")
    if args.kind == "hmm":
        ds = simgen.load_dataset(args.dataset, role="train")
        try:
            model, history = hmm.hmm_fit(ds, seed=args.seed)
        except hmm.HmmInputError as exc:
            raise CliError(str(exc)) from exc
        hmm.save_hmm(args.out, model, meta={
            "estimator": "hmm", "train_dynamic": args.dynamic or "file",
            "seed": args.seed})
        if args.log:
            _write_csv(args.log, ["iteration", "loglik"],
                       [{"iteration": i, "loglik": repr(v)}
                        for i, v in enumerate(history)])
        _write_run_manifest(args.out, "train", {"kind": "hmm",
                                                "dataset": args.dataset,
                                                "seed": args.seed})
        print(f"fit hmm in {len(history)} iterations; model at {args.out}")
        return 0

    if args.kind == "convex":
        ds = simgen.load_dataset(args.dataset, role="train")
        opts = classical.ConvexTrainOpts(hidden_dim=args.hidden or 5,
                                         lr=args.lr, epochs=args.epochs,
                                         seed=args.seed)
        try:
            params, log = classical.convex_train(ds, opts)
        except classical.ConvexTrainingFailure as exc:
            raise CliError(f"training failed: {exc}") from exc
        classical.save_convex(args.out, params, meta={
            "estimator": "convex", "net": "convex",
            "train_dynamic": args.dynamic or "file", "seed": args.seed})
        if args.log:
            _write_csv(args.log, ["epoch", "loss"],
                       [{"epoch": r["epoch"], "loss": repr(r["loss"])} for r in log])
        _write_run_manifest(args.out, "train", {"kind": "convex",
                                                "dataset": args.dataset,
                                                "opts": vars(opts) | {}})
        print(f"trained convex net; model at {args.out}")
        return 0

    entry = {
        "name": "rnn", "dataset": args.dataset, "cell": args.cell,
        "layers": args.layers, "hidden": args.hidden or 20,
        "dropout": args.dropout, "optimizer": args.optimizer, "lr": args.lr,
        "epochs": args.epochs, "seed": args.seed,
        "dynamic": args.dynamic or "file",
    }
    try:
        meta, log = _train_rnn_entry(entry, Path(args.out))
    except tn.TrainingFailure as exc:
        raise CliError(f"training failed: {exc}") from exc
    if args.log:
        _write_csv(args.log, ["epoch", "loss"],
                   [{"epoch": r["epoch"], "loss": repr(r["loss"])} for r in log])
    _write_run_manifest(args.out, "train", {"entry": entry})
    final = log[-1]["loss"] if log else float("nan")
    print(f"trained {meta['net']} ({meta['optimizer']}); final epoch loss "
          f"{final:.4f}; model at {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _builtin_estimator(name: str, seed: int):
    if name == "ma":
        return {"estimator": "ma"}, lambda s, i: classical.ma_classify(
            classical.DEFAULT_MA, s)
    if name == "dummy":
        return {"estimator": "dummy"}, lambda s, i: classical.dummy_classify(
            s, simgen.child_seed(seed, i))
    if name == "nle":
        return {"estimator": "nle"}, lambda s, i: mle.mle_classify(s, "nle")
    if name == "oue":
        return {"estimator": "oue"}, lambda s, i: mle.mle_classify(s, "oue")
    raise CliError(f"unknown estimator {name!r} "
                   f"(builtins: ma, dummy, nle, oue; others need model files)")


def _model_estimator(path: str):
    doc = modelio.load_container(path)
    kind = doc["kind"]
    meta = dict(doc.get("meta", {}))
    meta.setdefault("estimator", Path(path).stem)
    if kind == "rnn":
        spec, params, _ = tn.load_model(path)
        return meta, lambda s, i: tn.classify_series(params, spec, s.y)[0]
    if kind == "convex":
        params = classical.load_convex(path)
        return meta, lambda s, i: classical.convex_forward(params, s)[0]
    if kind == "hmm":
        model = hmm.load_hmm(path)
        return meta, lambda s, i: hmm.hmm_classify(model, s)[0]
    if kind == "ma":
        cfg = classical.load_ma(path)
        return meta, lambda s, i: classical.ma_classify(cfg, s)
    raise CliError(f"cannot evaluate model kind {kind!r}")


def evaluate_estimators(estimators, dataset) -> list[dict]:
    """Run every named estimator over every series; soft-fail per series."""
    rows = []
    for name, (meta, predict) in estimators.items():
        for i, s in enumerate(dataset):
            row = {"series": i, "dynamic": s.dynamic, "estimator": name,
                   "net": meta.get("net", ""),
                   "optimizer": meta.get("optimizer", ""),
                   "train_dynamic": meta.get("train_dynamic", "")}
            try:
                labels = predict(s, i)
                row["loss"] = repr(evalkit.series_loss(labels, s.labels))
                row["status"] = "ok"
            except (ValueError, mle.EstimationError, hmm.HmmInputError) as exc:
                row["loss"] = ""
                row["status"] = f"error: {exc}"
            rows.append(row)
    return rows


def cmd_eval(args) -> int:
    try:
        dataset = simgen.load_dataset(args.dataset, role="validation")
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    estimators: dict[str, tuple[dict, object]] = {}
    for name in args.estimators or []:
        meta, fn = _builtin_estimator(name, args.seed)
        estimators[name] = (meta, fn)
    for path in args.models or []:
        try:
            meta, fn = _model_estimator(path)
        except modelio.ModelFormatError as exc:
            raise CliError(str(exc)) from exc
        estimators[meta["estimator"]] = (meta, fn)
    if not estimators:
        raise CliError("nothing to evaluate: pass --estimators and/or --models")

    rows = evaluate_estimators(estimators, dataset)
    losses_path = f"{args.out}_losses.csv"
    _write_csv(losses_path, LOSS_COLUMNS, rows)

    summaries = {}
    for name in estimators:
        ok = [(r["series"], r["dynamic"], float(r["loss"]))
              for r in rows if r["estimator"] == name and r["status"] == "ok"]
        if ok:
            summaries[name] = evalkit.summarize(ok).table_rows()
    summary_path = f"{args.out}_summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summaries, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    _write_run_manifest(args.out, "eval", {
        "dataset": args.dataset, "estimators": sorted(estimators),
        "models": list(args.models or []), "seed": args.seed,
    })

    names = sorted(summaries)
    dynamics = sorted({row["dynamic"] for s in summaries.values() for row in s})
    print(f"{'dynamic':<16}" + "".join(f"{n:>12}" for n in names))
    for dyn in dynamics:
        cells = []
        for n in names:
            med = next((r["median"] for r in summaries[n] if r["dynamic"] == dyn),
                       float("nan"))
            cells.append(f"{med:>12.3f}")
        print(f"{dyn:<16}" + "".join(cells))
    errors = sum(r["status"] != "ok" for r in rows)
    if errors:
        print(f"{errors} series/estimator pairs failed softly (see {losses_path})")
    print(f"per-series losses at {losses_path}; summary at {summary_path}")
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _read_loss_rows(paths, labels=None) -> list[dict]:
    rows = []
    for k, path in enumerate(paths):
        source = labels[k] if labels and k < len(labels) else Path(path).stem
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                if rec.get("status", "ok") != "ok" or rec.get("loss", "") == "":
                    continue
                rec = dict(rec)
                rec["source"] = source
                rows.append(rec)
    if not rows:
        raise CliError("no usable loss rows in the given files")
    return rows


def cmd_compare(args) -> int:
    rows = _read_loss_rows(args.losses, labels=args.labels)
    by = args.by
    if by is None:
        by = "estimator" if len({r.get("estimator") for r in rows}) > 1 else "source"
    groups: dict[str, list[float]] = {}
    for r in rows:
        groups.setdefault(str(r.get(by, "")), []).append(float(r["loss"]))
    if len(groups) < 1:
        raise CliError(f"no groups found for column {by!r}")
    for name, values in groups.items():
        if len(values) < 2:
            raise CliError(f"group {name!r} has fewer than 2 observations")

    names = sorted(groups)
    boot_rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            res = evalkit.bootstrap_median_diff(
                groups[names[i]], groups[names[j]], level=args.level,
                n_resamples=args.resamples,
                seed=simgen.child_seed(args.seed, i, j))
            boot_rows.append({
                "pair": f"{names[i]} - {names[j]}",
                "median_diff": repr(res.point_diff),
                "ci_low": repr(res.ci_low), "ci_high": repr(res.ci_high),
                "level": res.level, "n_resamples": res.n_resamples,
            })
    boot_path = f"{args.out}_bootstrap.csv"
    _write_csv(boot_path, ["pair", "median_diff", "ci_low", "ci_high",
                           "level", "n_resamples"], boot_rows)

    reserved = {"loss", "series", "status", "source"}
    features = args.features
    if features is None:
        features = [c for c in rows[0]
                    if c not in reserved and len({r.get(c, "") for r in rows}) > 1]
    ols_path = f"{args.out}_ols.csv"
    if features:
        ols_input = [{"loss": float(r["loss"]),
                      **{f: r.get(f, "") for f in features}} for r in rows]
        try:
            fit = evalkit.ols_fit(ols_input)
        except (ValueError, evalkit.RankDeficientError) as exc:
            raise CliError(f"ols failed: {exc}") from exc
        _write_csv(ols_path,
                   ["name", "coefficient", "std_err", "t_stat", "p_value",
                    "ci_low", "ci_high"],
                   [{k: (repr(v) if isinstance(v, float) else v)
                     for k, v in row.items()} for row in fit.table_rows()])
    else:
        fit = None

    box_path = f"{args.out}_box_{by}.svg"
    overall = float(np.median([float(r["loss"]) for r in rows]))
    svg.boxplot_svg(box_path, [(n, groups[n]) for n in names],
                    title=f"loss by {by}", overall_median=overall)
    _write_run_manifest(args.out, "compare", {
        "losses": list(args.losses), "by": by, "features": features,
        "level": args.level, "resamples": args.resamples, "seed": args.seed,
    })
    print(f"bootstrap at {boot_path}" +
          (f"; ols at {ols_path}" if fit else "") + f"; box plot at {box_path}")
    for r in boot_rows:
        print(f"  {r['pair']}: diff={float(r['median_diff']):+.3f} "
              f"ci=[{float(r['ci_low']):+.3f}, {float(r['ci_high']):+.3f}]")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _read_price_csv(path) -> np.ndarray:
    prices = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or (lineno == 1 and rec[-1].strip().lower()
                           in {"price", "close", "value", "y"}):
                continue
            if len(rec) < 2:
                raise CliError(f"{path}:{lineno}: expected 2 columns, got {len(rec)}")
            try:
                prices.append(float(rec[-1]))
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: non-numeric price "
                               f"{rec[-1]!r}") from exc
    if len(prices) < 2:
        raise CliError(f"{path}: not enough price rows")
    arr = np.asarray(prices)
    if np.any(arr <= 0):
        raise CliError(f"{path}: prices must be strictly positive")
    return arr


def cmd_calibrate(args) -> int:
    prices = _read_price_csv(args.csv)
    returns = np.diff(np.log(prices))
    try:
        result = evalkit.calibrate(args.dynamic, returns, n_draws=args.n_draws,
                                   n_candidates=args.n_candidates, seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    doc = simgen.config_to_dict(result.config)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    _write_run_manifest(args.out, "calibrate", {
        "csv": args.csv, "dynamic": args.dynamic, "n_draws": args.n_draws,
        "n_candidates": args.n_candidates, "seed": args.seed,
        "distance": result.distance,
    })
    print(f"best {args.dynamic} config (distance {result.distance:.6g}) "
          f"written to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# plot-state
# ---------------------------------------------------------------------------

def _hidden_trajectory(path, series) -> np.ndarray:
    doc = modelio.load_container(path)
    if doc["kind"] == "rnn":
        spec, params, _ = tn.load_model(path)
        if spec.hidden_dim < 2:
            raise CliError("hidden dimension must be >= 2 for a 2-D projection")
        inputs, _ = tn.series_to_inputs(series.y)
        _, cache = tn.forward(params, spec, inputs)
        return cache["top"]
    if doc["kind"] == "convex":
        params = classical.load_convex(path)
        if params.hidden_dim < 2:
            raise CliError("hidden dimension must be >= 2 for a 2-D projection")
        _, states = classical.convex_forward(params, series)
        return states
    raise CliError(f"cannot plot hidden state of model kind {doc['kind']!r}")


def cmd_plot_state(args) -> int:
    cfg = simgen.NoisyLineConfig(gamma=1.0, n_slopes=1, sigma_max=1e-3,
                                 n_segments_range=(1, 1),
                                 segment_len_range=(160, 160))
    trios = []
    want = {1: None, 0: None, -1: None}
    seed = args.seed
    while any(v is None for v in want.values()) and seed < args.seed + 500:
        s = simgen.generate_noisy_line(cfg, seed)
        slope_sign = int(np.sign(s.gen_params["slopes"][0]))
        if want[slope_sign] is None:
            want[slope_sign] = s
        seed += 1
    if any(v is None for v in want.values()):
        raise CliError("could not draw up/flat/down sample series")

    states = {lab: _hidden_trajectory(args.model, s) for lab, s in want.items()}
    stacked = np.concatenate(list(states.values()))
    centered = stacked - stacked.mean(axis=0)
    cov = centered.T @ centered / len(centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    proj = eigvecs[:, np.argsort(eigvals)[::-1][:2]]

    groups = []
    colors = {1: (0, 150, 0), 0: (40, 80, 200), -1: (200, 30, 30)}
    names = {1: "up", 0: "flat", -1: "down"}
    for lab in (1, 0, -1):
        pts = (states[lab] - stacked.mean(axis=0)) @ proj
        groups.append((names[lab], pts, colors[lab]))
    svg.scatter_svg(args.out, groups, title="hidden state, top-2 components")
    _write_run_manifest(args.out, "plot-state",
                        {"model": args.model, "seed": args.seed})
    print(f"state plot at {args.out}")
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def cmd_report(args) -> int:
    rows = _read_loss_rows([args.losses])
    per_estimator: dict[str, list] = {}
    for r in rows:
        per_estimator.setdefault(r.get("estimator", "all"), []).append(
            (int(r.get("series", 0)), r.get("dynamic", "unknown"),
             float(r["loss"])))
    out_rows = []
    for name in sorted(per_estimator):
        rep = evalkit.summarize(per_estimator[name])
        for row in rep.table_rows():
            out_rows.append({"estimator": name, **{
                k: (repr(v) if isinstance(v, float) else v)
                for k, v in row.items()}})
    _write_csv(f"{args.out}_report.csv",
               ["estimator", "dynamic", "count", "median", "q1", "q3", "iqr"],
               out_rows)
    for row in out_rows:
        print(f"{row['estimator']:<12} {row['dynamic']:<16} "
              f"median={float(row['median']):.3f} iqr={float(row['iqr']):.3f}")
    print(f"report at {args.out}_report.csv")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trendlab",
        description="simulate labeled trending series and benchmark classifiers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a labeled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--role", default="validation", choices=simgen.ROLES)
    p.add_argument("--dynamic", default="mixed",
                   choices=("mixed",) + simgen.DYNAMICS)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON config document")
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier (or a sweep)")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="rnn", choices=("rnn", "convex", "hmm"))
    p.add_argument("--cell", default="gru", choices=("vanilla", "gru", "lstm"))
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--optimizer", default="adam", choices=("adam", "rmsprop"))
    p.add_argument("--lr", type=float, default=BASELINE_LR)
    p.add_argument("--epochs", type=int, default=BASELINE_EPOCHS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dynamic", default=None)
    p.add_argument("--log", default=None, help="training log CSV path")
    p.add_argument("--sweep", default=None, help="sweep manifest JSON")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate estimators on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--models", nargs="*", default=[])
    p.add_argument("--estimators", nargs="*", default=[],
                   help="builtin estimators: ma dummy nle oue")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="bootstrap + OLS over loss files")
    p.add_argument("losses", nargs="+")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--by", default=None, help="grouping column")
    p.add_argument("--labels", nargs="*", default=None,
                   help="source labels, one per loss file")
    p.add_argument("--features", nargs="*", default=None)
    p.add_argument("--level", type=float, default=0.99)
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit a dynamic's config to a price CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--dynamic", required=True, choices=simgen.DYNAMICS)
    p.add_argument("--out", required=True)
    p.add_argument("--n-draws", type=int, default=4)
    p.add_argument("--n-candidates", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("plot-state", help="2-D projection of hidden states")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plot_state)

    p = sub.add_parser("report", help="summarize a per-series loss CSV")
    p.add_argument("--losses", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
