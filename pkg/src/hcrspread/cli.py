"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import plotdata
from .baselines import ami, hlr
from .basis import enumerate_basis
from .config import Config
from .errors import ConfigError, HcrError
from .evaluation import EvalReport, cross_validate, make_folds
from .grouping import ScoreParams, build_tree, cut_tree
from .ingest import ingest
from .model import (
    calibrate_many,
    density_modes,
    expectations_and_variances,
    fit,
    load_model,
    predict_coefficients,
    save_model,
)
from .normalize import denormalize_density, normalize
from .pipeline import normalize_dataset, read_edfs, run_pipeline, write_edfs
from .selection import selective_removal, sweep_moments

log = logging.getLogger("hcrspread")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


def _config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--input", help="delimited input file with a header row")
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--entity-column")
    g.add_argument("--spread-column")
    g.add_argument("--ask-column")
    g.add_argument("--bid-column")
    g.add_argument("--features", help="comma-separated feature columns, '(H-L)/P' allowed")
    g.add_argument("--basis-x", help='context basis, e.g. "B((4,4,4),5,3)"')
    g.add_argument("--basis-y", help='target basis, e.g. "B((8),8,1)"')
    g.add_argument("--folds", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--resolution", type=int)
    g.add_argument("--normalization", choices=["global", "train-only"])
    g.add_argument("--min-rows", type=int)
    g.add_argument("--allow-small", action="store_true", default=None)
    g.add_argument("--workers", type=int)


def _load_config(args) -> Config:
    overrides = {
        k: getattr(args, k, None)
        for k in ("input", "output", "entity_column", "spread_column", "ask_column", "bid_column",
                  "basis_x", "basis_y", "folds", "seed", "threshold", "resolution",
                  "normalization", "min_rows", "allow_small", "workers")
    }
    if getattr(args, "features", None):
        overrides["features"] = [f.strip() for f in args.features.split(",")]
    for k in ("sweep_moments", "prune", "group", "group_cv"):
        if getattr(args, k, None):
            overrides[k] = getattr(args, k)
    if args.config:
        return Config.load(args.config, **overrides)
    return Config.from_dict({k: v for k, v in overrides.items() if v is not None})


def _entity_dir(config: Config, entity: str) -> Path:
    d = Path(config.output) / entity
    d.mkdir(parents=True, exist_ok=True)
    return d


def _normalized(config: Config):
    for entity, ds in ingest(config.input, config).items():
        yield entity, ds, normalize_dataset(ds)


def cmd_run(args) -> int:
    config = _load_config(args)
    result = run_pipeline(config)
    for e, r in result.entities.items():
        if r.status == 0:
            print(f"{e}\tll={r.report.log_likelihood:.2f}\texp_ll={r.report.exp_ll:.2f}")
        else:
            print(f"{e}\tFAILED ({r.status}): {r.error}")
    return result.exit_code


def cmd_normalize(args) -> int:
    config = _load_config(args)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "normalized.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "line", *config.features, "spread"])
        for entity, ds, (xn, yn, edfs, edf_y) in _normalized(config):
            write_edfs(_entity_dir(config, entity) / "edf.json", ds.feature_names, edfs, edf_y)
            for line, row, y in zip(ds.lines, xn, yn):
                w.writerow([entity, int(line), *[repr(float(v)) for v in row], repr(float(y))])
    return 0


def cmd_fit(args) -> int:
    config = _load_config(args)
    bx, by = enumerate_basis(config.spec_x), enumerate_basis(config.spec_y)
    for entity, ds, (xn, yn, edfs, edf_y) in _normalized(config):
        d = _entity_dir(config, entity)
        model = fit(bx, by, xn, yn, variable_names=(*ds.feature_names, "spread"))
        save_model(model, d / "model.json")
        write_edfs(d / "edf.json", ds.feature_names, edfs, edf_y)
        print(f"{entity}\t|B_X|={len(bx)}\t|B_Y|={len(by)}\t-> {d / 'model.json'}")
    return 0


def cmd_predict(args) -> int:
    config = _load_config(args)
    model = load_model(args.model)
    feat_edfs, target_edf = read_edfs(args.edf)
    datasets = ingest(config.input, config, require_target=False)
    out = Path(args.predictions)
    out.parent.mkdir(parents=True, exist_ok=True)
    orders = [m[0] for m in model.basis_y.members]
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["entity", "line", "expectation", "variance", "modes"]
        if target_edf is not None:
            header.append("spread_expectation")
        if args.lattice:
            header += [f"cell{i + 1}" for i in range(config.resolution)]
        w.writerow(header)
        for entity, ds in datasets.items():
            xn = np.column_stack([normalize(feat_edfs[n], ds.features[:, i])
                                  for i, n in enumerate(ds.feature_names)])
            lattices, _ = calibrate_many(predict_coefficients(model, xn), orders,
                                         config.resolution, config.threshold)
            mean, var = expectations_and_variances(lattices)
            for i in range(len(ds)):
                modes = ";".join(f"{p:.3f}" for p, _ in density_modes(lattices[i]))
                row = [entity, int(ds.lines[i]), repr(float(mean[i])), repr(float(var[i])), modes]
                if target_edf is not None:
                    values, probs = denormalize_density(target_edf, lattices[i])
                    row.append(repr(float(values @ probs)))
                if args.lattice:
                    row += [repr(float(v)) for v in lattices[i]]
                w.writerow(row)
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    bx, by = enumerate_basis(config.spec_x), enumerate_basis(config.spec_y)
    for entity, ds in ingest(config.input, config).items():
        folds = make_folds(len(ds), config.folds, config.seed)
        if config.normalization == "global":
            xn, yn, _, _ = normalize_dataset(ds)
            report = cross_validate(xn, yn, bx, by, folds, resolution=config.resolution,
                                    threshold=config.threshold)
        else:
            report = cross_validate(ds.features, ds.target, bx, by, folds,
                                    resolution=config.resolution, threshold=config.threshold,
                                    refit_edf=True)
        d = _entity_dir(config, entity)
        report.write_csv(d / "report.csv")
        report.write_summary(d / "summary.json")
        print(f"{entity}\tll={report.log_likelihood:.2f}\texp_ll={report.exp_ll:.2f}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    bx = enumerate_basis(config.spec_x)
    for entity, ds, (xn, yn, _, _) in _normalized(config):
        folds = make_folds(len(ds), config.folds, config.seed)
        sweep = sweep_moments(xn, yn, bx, args.max_moments, folds,
                              prefix_sizes="all" if args.prefixes else None,
                              resolution=config.resolution, threshold=config.threshold)
        sweep.write_csv(_entity_dir(config, entity) / "sweep.csv")
        desc, q, k, ll = sweep.best()
        print(f"{entity}\tbest: {desc} moments={q} features={k} ll={ll:.2f}")
    return 0


def cmd_prune(args) -> int:
    config = _load_config(args)
    bx, by = enumerate_basis(config.spec_x), enumerate_basis(config.spec_y)
    for entity, ds, (xn, yn, _, _) in _normalized(config):
        folds = make_folds(len(ds), config.folds, config.seed)
        result = selective_removal(xn, yn, bx, by, folds, min_improvement=args.min_improvement,
                                   resolution=config.resolution, threshold=config.threshold)
        result.write_csv(_entity_dir(config, entity) / "removal.csv")
        print(f"{entity}\t{len(bx)} -> {len(result.basis)} features\t"
              f"ll {result.trace[0][1]:.2f} -> {result.trace[-1][1]:.2f}")
    return 0


def cmd_group(args) -> int:
    config = _load_config(args)
    datasets = {e: nd[:2] for e, _, nd in _normalized(config)}
    params = ScoreParams(cv=args.cv, k=config.folds, seed=config.seed,
                         resolution=config.resolution, threshold=config.threshold)
    tree = build_tree(datasets, enumerate_basis(config.spec_x), enumerate_basis(config.spec_y), params)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    tree.write_json(out / "group_tree.json")
    tree.write_levels_csv(out / "group_levels.csv")
    if args.cut:
        clusters = cut_tree(tree, args.cut, datasets)
        doc = []
        for i, c in enumerate(clusters):
            path = out / f"cluster{i + 1}_model.json"
            save_model(c.model, path)
            doc.append({"members": list(c.members), "model": path.name, "entity_log_likelihood": c.entity_ll})
            print(f"cluster {i + 1}: {', '.join(c.members)}")
        (out / "clusters.json").write_text(json.dumps(doc, indent=1) + "\n")
    return 0


def cmd_baseline(args) -> int:
    config = _load_config(args)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "baselines.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entity", "line", "spread", "ami", "hlr", "spread_q", "ami_q", "hlr_q"])
        for entity, ds in ingest(config.input, config).items():
            e = ds.extra
            a, h = ami(e["R"], e["P"], e["V"]), hlr(e["H"], e["L"])
            tables = plotdata.comparison_scatter(ds.target, {"ami": a, "hlr": h})[1]
            n = len(ds)
            for i in range(n):
                w.writerow([entity, int(ds.lines[i]), repr(float(ds.target[i])), repr(float(a[i])),
                            repr(float(h[i])), repr(tables[i][2]), repr(tables[i][3]),
                            repr(tables[n + i][3])])
    return 0


def _read_columns(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [r[k] for r in rows] for k in (rows[0] if rows else {})}


def cmd_plotdata(args) -> int:
    kind = args.kind

    def need(name):
        value = getattr(args, name)
        if not value or not Path(value).exists():
            raise ConfigError(f"plot kind {kind} needs an existing --{name.replace('_', '-')}")
        return value

    if kind == "sorted-densities":
        inputs = (EvalReport.read_csv(need("report")),)
    elif kind == "ll-table":
        index = json.loads(Path(need("summary")).read_text())["entities"]
        inputs = ({e: {args.model_name: s} for e, s in index.items() if "log_likelihood" in s},)
    elif kind == "beta-heatmap":
        inputs = (load_model(need("model")),)
    elif kind == "group-tree":
        inputs = (json.loads(Path(need("tree")).read_text())["tree"],)
    else:
        cols = _read_columns(need("predictions"))
        names = [c for c in ("hcr_expectation", "ami", "hlr") if c in cols]
        inputs = (np.array(cols["spread"], dtype=float),
                  {c: np.array(cols[c], dtype=float) for c in names})
    header, rows = plotdata.emit_plot_data(kind, *inputs, path=args.out)
    print(f"{kind}: {len(rows)} rows -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hcrspread", description="Conditional density prediction with moment regression.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("run", help="full pipeline over every entity")
    _config_args(s)
    s.add_argument("--sweep-moments", type=int)
    s.add_argument("--prune", action="store_true")
    s.add_argument("--group", action="store_true")
    s.add_argument("--group-cv", action="store_true")
    s.set_defaults(func=cmd_run)

    for name, func, text in [
        ("normalize", cmd_normalize, "write EDF quantiles of features and target"),
        ("fit", cmd_fit, "fit one model per entity on all its data"),
        ("evaluate", cmd_evaluate, "k-fold cross-validated log-likelihood"),
        ("baseline", cmd_baseline, "AMI and HLR point predictors with normalized versions"),
    ]:
        s = sub.add_parser(name, help=text)
        _config_args(s)
        s.set_defaults(func=func)

    s = sub.add_parser("predict", help="predicted densities for new rows")
    _config_args(s)
    s.add_argument("--model", required=True)
    s.add_argument("--edf", required=True, help="edf.json written by fit/run")
    s.add_argument("--predictions", required=True, help="output CSV")
    s.add_argument("--lattice", action="store_true", help="also write every lattice cell")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("sweep", help="log-likelihood over predicted-moment counts")
    _config_args(s)
    s.add_argument("--max-moments", type=int, default=10)
    s.add_argument("--prefixes", action="store_true", help="also sweep prefixes of the context basis")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("prune", help="greedy selective removal of context moments")
    _config_args(s)
    s.add_argument("--min-improvement", type=float, default=0.0)
    s.set_defaults(func=cmd_prune)

    s = sub.add_parser("group", help="hierarchical grouping of entities into common models")
    _config_args(s)
    s.add_argument("--cv", action="store_true", help="score common models with cross-validation")
    s.add_argument("--cut", type=int, help="also fit models for this many clusters")
    s.set_defaults(func=cmd_group)

    s = sub.add_parser("plotdata", help="emit CSV tables for plotting")
    s.add_argument("kind", choices=plotdata.KINDS)
    s.add_argument("--out", required=True)
    s.add_argument("--report")
    s.add_argument("--summary")
    s.add_argument("--model-name", default="model")
    s.add_argument("--model")
    s.add_argument("--tree")
    s.add_argument("--predictions")
    s.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HcrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
