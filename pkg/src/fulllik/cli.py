"""Command-line entry point: ``fulllik {fit,bench-reg,outliers,recalibrate,plot}``.

Every command writes ``manifest.json`` next to its outputs.  The manifest
holds the command and its fully resolved configuration; passing it back via
``--config`` reproduces the outputs byte for byte.  Wall-clock timings go to
stderr (and ``timing.json`` with ``--timing``), never into the reports.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import data as dio
from . import experiments as ex
from . import metrics
from . import outliers as od
from . import priors
from . import recalibrate as rc
from . import svg
from . import transforms as tf
from .conditioning import DataProvider, ParamRequest, provider_init
from .errors import DivergedError, ParseError, SchemaError
from .families import SLOTS, LikelihoodSpec
from .fitting import SCHEMA_VERSION, FitConfig, fit
from .models import linear, mlp, model_forward, penultimate

# options that only steer where things go, never what is computed
NON_CONFIG = {"out", "config", "timing", "threads", "func", "command"}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ output

def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


class Outputs:
    def __init__(self, out):
        self.out = out
        self.written = []
        os.makedirs(out, exist_ok=True)

    def write(self, name, text):
        svg.write(os.path.join(self.out, name), text)
        self.written.append(name)

    def manifest(self, command, config):
        m = {"command": command, "config": config, "seed": config.get("seed"),
             "artifacts": sorted(self.written + ["manifest.json"]), "version": __version__,
             "schema_version": SCHEMA_VERSION}
        svg.write(os.path.join(self.out, "manifest.json"), dump_json(m))


def resolved_config(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in NON_CONFIG}


# ------------------------------------------------------------------- fit

PRIORS = {"d-lasso": ("laplace", "dynamic"), "m-lasso": ("laplace", "multi"),
          "d-ridge": ("normal", "dynamic"), "m-ridge": ("normal", "multi")}


def _parse_fixed(items, family):
    fixed = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fix expects slot=value, got {item!r}")
        if key not in SLOTS[family]:
            raise UsageError(f"{family} has no slot {key!r}; slots: {SLOTS[family]}")
        fixed[key] = float(value)
    return fixed


def _fit_config(args):
    return FitConfig(optimizer=args.optimizer, lr=args.lr, steps=args.steps,
                     batch_size=args.batch_size, clip_norm=None if args.clip_norm <= 0 else args.clip_norm,
                     likelihood_lr_mult=args.likelihood_lr_mult, weight_decay=args.weight_decay,
                     likelihood_weight_decay=args.likelihood_weight_decay,
                     head_input=args.head_input, seed=args.seed)


def _subset_nll(model, lik, provider, ds, rows):
    """Mean NLL of ``rows`` of ``ds`` using their own data parameters."""
    pred, _ = model_forward(model, ds.features[rows])
    params = provider.get(ParamRequest(indices=rows, training=True))
    y = ds.targets[rows]
    nll, _, _ = lik.evaluate(pred, y, params)
    out = {"nll": float(nll.mean())}
    if lik.family == "softmax":
        out["accuracy"] = float(np.mean(pred.argmax(axis=1) == y))
    else:
        out["mse"] = metrics.mse(pred, np.asarray(y, float).reshape(pred.shape))
    return out


def cmd_fit(args, outs):
    kind = "class" if args.likelihood == "softmax" else "real"
    ds = dio.from_source(args.data, args.seed, target=args.target, kind=kind, label=args.label)
    if ds.targets is None:
        raise UsageError("fit needs targets; pass --target for CSV input")
    if args.likelihood == "softmax" and ds.target_kind != "class":
        raise UsageError("softmax needs class targets")
    if args.provider == "data" and args.test_fraction > 0 and not args.transductive:
        raise UsageError("data parameters are undefined on a held-out split; "
                         "use --test-fraction 0 or --transductive")
    if args.standardize:
        ds = dio.standardize(ds)
    test_rows = None
    if args.test_fraction > 0:
        train, test = dio.split(ds, args.test_fraction, args.seed)
        if args.transductive:
            # fit on every row, report the held-out rows with their own data parameters
            n_test = test.n
            perm = dio.stream(args.seed, "split").permutation(ds.n)
            test_rows = np.sort(perm[:n_test])
            train, test = ds, None
    else:
        train, test = ds, None

    fixed = _parse_fixed(args.fix, args.likelihood)
    if args.freeze_sigma is not None:
        slot = "b" if args.likelihood == "laplace" else "sigma"
        if slot not in SLOTS[args.likelihood]:
            raise UsageError(f"--freeze-sigma does not apply to {args.likelihood}")
        fixed[slot] = args.freeze_sigma
    lik = LikelihoodSpec(args.likelihood, fixed=fixed, per_output=args.per_output)

    n_out = int(ds.targets.max()) + 1 if args.likelihood == "softmax" else 1
    if args.model == "linear":
        model = linear(ds.d, n_out, seed=args.seed)
    else:
        model = mlp(ds.d, tuple(args.hidden), n_out, seed=args.seed)

    provider = None
    dim = lik.provider_dim(n_out)
    if dim:
        transforms = lik.transforms(n_out)
        init = lik.init_values(n_out)
        if args.provider == "none":
            raise UsageError("free likelihood slots need a provider (or --fix them)")
        if args.provider == "predicted":
            n_feat = {"x": ds.d, "xy": ds.d + 1, "hidden": model.layers[-1][0]}.get(args.head_input)
            if n_feat is None:
                raise UsageError("--head-input aux is not available from the CLI")
            provider = provider_init("predicted", dim, transforms, init, n_features=n_feat,
                                     hidden=tuple(args.provider_hidden), isolated=args.isolated,
                                     seed=args.seed)
        else:
            provider = provider_init(args.provider, dim, transforms, init, n=train.n,
                                     tied=args.tied)
    prior = None
    if args.prior != "none":
        family, gran = PRIORS[args.prior]
        prior = priors.make_prior(family, gran, model, init_scale=1.0)

    cfg = _fit_config(args)
    rep = fit(model, lik, provider, train, cfg, prior=prior, test=test)
    report = rep.to_dict()
    if test_rows is not None:
        report["test"] = _subset_nll(model, lik, provider, train, test_rows)
        report["test"]["transductive"] = True
    report["data"] = {"source": args.data, "n_train": train.n,
                      "n_test": 0 if test is None and test_rows is None else
                      (len(test_rows) if test_rows is not None else test.n)}
    report["model"] = model.describe()
    if isinstance(provider, DataProvider):
        report["likelihood"]["data_params_summary"] = rep.extras.get("likelihood_params")
    outs.write("report.json", dump_json(report))
    outs.write("loss_curve.csv", csv_text(["step", "loss"], enumerate(rep.trajectory)))
    return rep.wall_time


# -------------------------------------------------------------- bench-reg

def cmd_bench_reg(args, outs):
    cfg = FitConfig(lr=args.lr, steps=args.steps, clip_norm=None, seed=args.seed)
    lams = np.logspace(math.log10(args.lambda_min), math.log10(args.lambda_max), args.grid)
    r = ex.bench_reg(args.seed, n=args.n, d=args.d, sparsity=args.sparsity, noise=args.noise,
                     lams=lams, cfg=cfg, threads=args.threads)
    grid_rows = [(0.0, r["ols"], r["ols"])] + list(zip(r["lambda"], r["ridge"], r["lasso"]))
    outs.write("grid.csv", csv_text(["lambda", "ridge_error", "lasso_error"], grid_rows))
    dyn = r["dynamic"]
    outs.write("dynamic.csv", csv_text(
        ["method", "error", "sigma", "lambda_eff", "lambda_implied"],
        [(m["method"], m["error"], m["sigma"], m.get("lambda_eff"), m.get("lambda_implied")) for m in dyn]))
    lasso_min = min(r["lasso"])
    summary = {m["method"]: {"error": m["error"], "ratio_to_grid_lasso_min": m["error"] / lasso_min}
               for m in dyn}
    # adaptive methods sit at their implied strength; M-LASSO has none, so it is a level line
    points = [(m["method"], m["lambda_implied"], m["error"]) for m in dyn if "lambda_implied" in m]
    m_lasso = next(m["error"] for m in dyn if m["method"] == "M-LASSO")
    outs.write("bench_reg.svg", svg.line_chart(
        [("Ridge grid", lams, r["ridge"]), ("LASSO grid", lams, r["lasso"])],
        title="Recovery error vs regularization strength", xlabel="lambda",
        ylabel="||w - w*||^2", logx=True, logy=True, points=points, hline=("M-LASSO", m_lasso)))
    report = {"schema_version": SCHEMA_VERSION, "seed": args.seed, "grid_lasso_min": lasso_min,
              "grid_ridge_min": min(r["ridge"]), "ols": r["ols"], "dynamic": dyn, "summary": summary}
    if args.sweep_sparsity:
        sp = ex.bench_reg_sparsity(args.seed, sparsities=tuple(args.sparsities), n=args.n, d=args.d,
                                   noise=args.noise, lams=lams, cfg=cfg, threads=args.threads)
        cols = ["sparsity", "grid_lasso_min", "grid_ridge_min", "D-Ridge", "D-LASSO", "M-LASSO"]
        outs.write("sparsity.csv", csv_text(cols, [[row[c] for c in cols] for row in sp]))
        xs = [row["sparsity"] for row in sp]
        outs.write("sparsity.svg", svg.line_chart(
            [(c, xs, [row[c] for row in sp]) for c in cols[1:]],
            title="Recovery error vs true sparsity", xlabel="fraction of nonzero weights",
            ylabel="||w - w*||^2", logy=True))
        report["sparsity_sweep"] = sp
    outs.write("report.json", dump_json(report))


# --------------------------------------------------------------- outliers

def cmd_outliers(args, outs):
    ds = dio.from_source(args.data, args.seed, label=args.label)
    if args.standardize:
        ds = dio.standardize(ds)
    kinds = args.detectors
    cfg = FitConfig(lr=args.lr, steps=args.steps, clip_norm=None if args.clip_norm <= 0 else args.clip_norm,
                    likelihood_lr_mult=args.likelihood_lr_mult, seed=args.seed)
    scores = {}
    meta = {}
    for kind in kinds:
        spec = od.DetectorSpec(kind, args.code, cfg, depth=args.depth, per_feature=args.per_feature)
        sc = od.detect(spec, ds)
        scores[kind] = sc.scores
        meta[kind] = {k: v for k, v in sc.meta.items() if k != "detector"}
    rows = [[int(i)] + [scores[k][j] for k in kinds] for j, i in enumerate(ds.index)]
    outs.write("scores.csv", csv_text(["row"] + list(kinds), rows))
    report = {"schema_version": SCHEMA_VERSION, "seed": args.seed, "n": ds.n, "d": ds.d,
              "detectors": meta}
    labels = ds.labels
    if labels is not None and 0 < labels.sum() < len(labels):
        auc = {k: od.evaluate_auc(scores[k], labels) for k in kinds}
        report["auc"] = auc
        report["aupr"] = {k: metrics.aupr(scores[k], labels) for k in kinds}
        report["delta"] = {f"{b}_s-{b}_baseline": auc[f"{b}_s"] - auc[f"{b}_baseline"]
                           for b in ("pca", "ae") if f"{b}_s" in auc and f"{b}_baseline" in auc}
        curves = []
        for k in kinds:
            fpr, tpr = metrics.roc_curve(scores[k], labels)
            curves.append((k, fpr, tpr))
        outs.write("roc.svg", svg.line_chart(curves, title="ROC", xlabel="false positive rate",
                                             ylabel="true positive rate"))
    outs.write("report.json", dump_json(report))


# ------------------------------------------------------------- recalibrate

def _load_calibration_csv(path, task):
    """Columns ``logit_*`` (or ``mean`` / ``sigma``), optional ``feat_*``, and ``target``."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=0, column=None) from None
        body = []
        for r, row in enumerate(reader, start=2):
            try:
                body.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"unparseable cell in {path}", row=r, column=None) from None
    a = np.array(body, dtype=float).reshape(len(body), len(header))
    col = {h: j for j, h in enumerate(header)}
    if "target" not in col:
        raise SchemaError(f"{path} has no 'target' column")
    feats = [j for h, j in col.items() if h.startswith("feat_")]
    f = a[:, feats] if feats else None
    if task == "classification":
        logits = [j for h, j in col.items() if h.startswith("logit_")]
        if not logits:
            raise SchemaError(f"{path} has no logit_* columns")
        return rc.CalibrationInput(a[:, logits], a[:, col["target"]].astype(int), features=f)
    if "mean" not in col:
        raise SchemaError(f"{path} has no 'mean' column")
    s = a[:, col["sigma"]] if "sigma" in col else None
    return rc.CalibrationInput(a[:, col["mean"]], a[:, col["target"]], features=f, sigma=s,
                               task="regression")


def _train_base(args):
    task = args.task
    kind = "class" if task == "classification" else "real"
    ds = dio.from_source(args.data, args.seed, target=args.target, kind=kind)
    if ds.targets is None:
        raise UsageError("recalibrate needs targets; pass --target for CSV input")
    n_train, n_val = args.n_train, args.n_val
    if n_train + n_val >= ds.n:
        raise UsageError(f"need more than n_train + n_val = {n_train + n_val} rows, have {ds.n}")
    order = dio.stream(args.seed, "recalibrate", "split").permutation(ds.n)
    tr = ds.rows(np.sort(order[:n_train])).reindexed()
    va = ds.rows(np.sort(order[n_train:n_train + n_val]))
    te = ds.rows(np.sort(order[n_train + n_val:]))
    base_cfg = FitConfig(lr=args.base_lr, steps=args.base_steps, seed=args.seed)
    if task == "classification":
        k = int(ds.targets.max()) + 1
        model = mlp(ds.d, (args.width,), k, seed=args.seed)
        fit(model, LikelihoodSpec("softmax", fixed={"tau": 1.0}), None, tr, base_cfg)
        sigma = None
    else:
        model = mlp(ds.d, (args.width,), 1, seed=args.seed)
        provider = provider_init("global", 1, tf.SIGMA, 1.0)
        fit(model, LikelihoodSpec("normal"), provider, tr, base_cfg)
        sigma = float(provider.constrained()[0])

    def inputs(split, tag):
        z, cache = model_forward(model, split.features)
        out = z if task == "classification" else z[:, 0]
        return rc.CalibrationInput(out, split.targets, features=penultimate(cache), task=task,
                                   sigma=sigma, split=tag)

    return inputs(va, "validation"), inputs(te, "test")


def cmd_recalibrate(args, outs):
    if args.val_csv or args.test_csv:
        if not (args.val_csv and args.test_csv):
            raise UsageError("--val-csv and --test-csv go together")
        val = _load_calibration_csv(args.val_csv, args.task)
        test = _load_calibration_csv(args.test_csv, args.task)
    else:
        val, test = _train_base(args)
    cfg = FitConfig(lr=args.lr, steps=args.steps, clip_norm=None if args.clip_norm <= 0 else args.clip_norm,
                    likelihood_weight_decay=args.likelihood_weight_decay, seed=args.seed)
    kinds = tuple(args.methods) if args.methods else None
    rows, fitted = rc.compare_methods(val, test, kinds=kinds, cfg=cfg, bins=args.bins,
                                      levels=args.levels, shift=args.shift)
    metric = "ece" if val.task == "classification" else "cal"
    extra = sorted({k for r in rows for k in r} - {"method", metric})
    outs.write("table.csv", csv_text(["method", metric] + extra,
                                     [[r["method"], r[metric]] + [r.get(k) for k in extra] for r in rows]))
    report = {"schema_version": SCHEMA_VERSION, "seed": args.seed, "task": val.task,
              "metric": metric, "table": rows, "n_val": val.n, "n_test": test.n}
    if val.task == "classification":
        report["test_accuracy"] = float(np.mean(test.outputs.argmax(axis=1) == test.targets))
        count, acc, conf = metrics.reliability_bins(rc.uncalibrated(test), test.targets, args.bins)
        curves = [("perfect", [0, 1], [0, 1]), ("Uncalibrated", conf[count > 0], acc[count > 0])]
        for kind, rec in fitted.items():
            c, a, cf = metrics.reliability_bins(rc.apply_recalibrator(rec, test), test.targets, args.bins)
            curves.append((rc.SHORT[kind], cf[c > 0], a[c > 0]))
        outs.write("reliability.svg", svg.line_chart(curves, title="Reliability (test)",
                                                     xlabel="confidence", ylabel="accuracy"))
    outs.write("table.json", dump_json(rows))
    outs.write("report.json", dump_json(report))


# -------------------------------------------------------------------- plot

def _read_series_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ParseError(f"{path} is empty; a header row is required", row=0, column=None)
    header, body = rows[0], rows[1:]
    cols = {h: [] for h in header}
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} cells", row=r, column=None)
        for h, v in zip(header, row):
            try:
                cols[h].append(float(v) if v != "" else float("nan"))
            except ValueError:
                cols[h].append(None)
    return header, cols


def cmd_plot(args, outs):
    if not args.inputs:
        raise UsageError("plot needs at least one CSV input")
    for path in args.inputs:
        header, cols = _read_series_csv(path)
        x = args.x or header[0]
        if x not in cols:
            raise SchemaError(f"{path} has no column {x!r}")
        ys = args.y or [h for h in header if h != x and all(v is not None for v in cols[h])]
        for y in ys:
            if y not in cols:
                raise SchemaError(f"{path} has no column {y!r}")
            if any(v is None for v in cols[y]) or any(v is None for v in cols[x]):
                raise ParseError(f"{path}: non-numeric cell in column {y!r}", row=None, column=y)
        series = [(y, cols[x], cols[y]) for y in ys]
        name = os.path.splitext(os.path.basename(path))[0] + ".svg"
        outs.write(name, svg.line_chart(series, title=args.title or name[:-4], xlabel=x,
                                        ylabel=", ".join(ys), logx=args.logx, logy=args.logy))


# ------------------------------------------------------------------ parser

def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--threads", type=int, default=1, help="concurrent independent fits")
    p.add_argument("--config", help="replay a manifest.json (its configuration overrides flags)")
    p.add_argument("--timing", action="store_true", help="also write timing.json (not reproducible)")


def build_parser():
    ap = argparse.ArgumentParser(prog="fulllik", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model with learned likelihood parameters")
    _common(p)
    p.add_argument("--data", default="gen:sparse_linear")
    p.add_argument("--target", help="target column for CSV input")
    p.add_argument("--label", help="outlier-label column for CSV input")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--test-fraction", type=float, default=0.0)
    p.add_argument("--transductive", action="store_true")
    p.add_argument("--model", choices=("linear", "mlp"), default="linear")
    p.add_argument("--hidden", type=int, nargs="+", default=[32])
    p.add_argument("--likelihood", choices=tuple(SLOTS), default="normal")
    p.add_argument("--fix", nargs="*", metavar="SLOT=VALUE", help="freeze likelihood slots")
    p.add_argument("--freeze-sigma", type=float, help="shorthand for --fix sigma=VALUE")
    p.add_argument("--per-output", action="store_true")
    p.add_argument("--provider", choices=("global", "data", "predicted", "none"), default="global")
    p.add_argument("--provider-hidden", type=int, nargs="*", default=[])
    p.add_argument("--head-input", choices=("x", "xy", "hidden"), default="x")
    p.add_argument("--isolated", action="store_true")
    p.add_argument("--tied", action="store_true")
    p.add_argument("--prior", choices=("none",) + tuple(PRIORS), default="none")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--clip-norm", type=float, default=1.0, help="<= 0 disables clipping")
    p.add_argument("--likelihood-lr-mult", type=float, default=1.0)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--likelihood-weight-decay", type=float, default=0.0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench-reg", help="grid vs adaptive regularization on sparse linear data")
    _common(p)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--sparsity", type=float, default=0.1, help="fraction of nonzero true weights")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=25)
    p.add_argument("--lambda-min", type=float, default=1e-2)
    p.add_argument("--lambda-max", type=float, default=1e3)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--sweep-sparsity", action="store_true")
    p.add_argument("--sparsities", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0])
    p.set_defaults(func=cmd_bench_reg)

    p = sub.add_parser("outliers", help="scale-as-score outlier detection")
    _common(p)
    p.add_argument("--data", default="gen:contaminated_gaussian")
    p.add_argument("--label", help="binary outlier-label column for CSV input")
    p.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("--detectors", nargs="+", choices=od.KINDS, default=list(od.KINDS))
    p.add_argument("--code", type=int, default=2)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--per-feature", action="store_true")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--steps", type=int, default=1500)
    p.add_argument("--clip-norm", type=float, default=0.0, help="<= 0 disables clipping")
    p.add_argument("--likelihood-lr-mult", type=float, default=1.0)
    p.set_defaults(func=cmd_outliers)

    p = sub.add_parser("recalibrate", help="compare post-hoc recalibration methods")
    _common(p)
    p.add_argument("--task", choices=("classification", "regression"), default="classification")
    p.add_argument("--data", default="gen:blobs?n=2600")
    p.add_argument("--target", help="target column for CSV input")
    p.add_argument("--val-csv", help="precomputed validation outputs (logit_*/mean, feat_*, target)")
    p.add_argument("--test-csv", help="precomputed test outputs")
    p.add_argument("--n-train", type=int, default=300)
    p.add_argument("--n-val", type=int, default=300)
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--base-lr", type=float, default=0.01)
    p.add_argument("--base-steps", type=int, default=1000)
    p.add_argument("--methods", nargs="*", choices=rc.CLASSIFIER_KINDS)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--clip-norm", type=float, default=1.0)
    p.add_argument("--likelihood-weight-decay", type=float, default=1e-2)
    p.add_argument("--shift", type=float, default=rc.HEAD_SHIFT, help="softplus offset of the heads")
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--levels", type=int, default=10)
    p.set_defaults(func=cmd_recalibrate)

    p = sub.add_parser("plot", help="render CSV series as SVG")
    _common(p)
    # optional here so a manifest can supply them; checked in cmd_plot
    p.add_argument("inputs", nargs="*")
    p.add_argument("--x")
    p.add_argument("--y", nargs="*")
    p.add_argument("--title")
    p.add_argument("--logx", action="store_true")
    p.add_argument("--logy", action="store_true")
    p.set_defaults(func=cmd_plot)
    return ap


def _apply_manifest(ap, args):
    with open(args.config, encoding="utf-8") as f:
        m = json.load(f)
    if m.get("command") != args.command:
        ap.error(f"manifest is for {m.get('command')!r}, not {args.command!r}")
    for k, v in m.get("config", {}).items():
        setattr(args, k, v)
    return args


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        args = _apply_manifest(ap, args)
    config = resolved_config(args)
    outs = Outputs(args.out)
    start = time.perf_counter()
    try:
        args.func(args, outs)
    except UsageError as exc:
        ap.error(str(exc))
    except (ParseError, SchemaError, DivergedError, FileNotFoundError, ValueError) as exc:
        print(f"fulllik {args.command}: error: {exc}", file=sys.stderr)
        return 1
    outs.manifest(args.command, config)
    wall = time.perf_counter() - start
    print(f"fulllik {args.command}: wrote {len(outs.written) + 1} files to {args.out} "
          f"in {wall:.1f}s", file=sys.stderr)
    if args.timing:
        svg.write(os.path.join(args.out, "timing.json"), dump_json({"wall_time": wall}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
