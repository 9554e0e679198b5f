"""Command-line pipeline driver.

Workspace layout is fixed (corpora/, features/, models/, reports/,
plots/) so commands compose without path plumbing.  Every artifact gets
a sidecar ``<name>.meta.json`` recording the command, configuration and
seed that produced it; no artifact contains wall-clock state, so
identical invocations produce identical bytes.

Exit codes: 0 ok, 2 missing input, 3 validation failure, 4 computation
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import aggregate as agg
from . import boundary as bnd
from . import corpus as cstore
from . import crosseval as xev
from . import ffn as ffn_mod
from . import selection as sel
from . import svm as svm_mod
from . import synth as synth_mod
from . import tsne as tsne_mod

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_VALIDATION = 3
EXIT_COMPUTATION = 4


class CliError(Exception):
    def __init__(self, message: str, category: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def _missing(path) -> CliError:
    return CliError(f"missing input: {path}", "missing-input", EXIT_MISSING_INPUT)


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise _missing(path)
    return path


def _write_meta(out_path: Path, command: str, params: dict) -> None:
    meta = {
        "command": command,
        "params": params,
        "version": __version__,
    }
    Path(str(out_path) + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, default=str) + "\n")


def load_model(path):
    doc = json.loads(Path(path).read_text())
    kind = doc.get("kind")
    if kind == "svm":
        return svm_mod.load_svm(path)
    if kind == "ffn":
        return ffn_mod.load_ffn(path)
    raise CliError(f"{path}: unknown model kind {kind!r}", "validation-failure",
                   EXIT_VALIDATION)


def cmd_validate(args) -> int:
    manifest = cstore.load_manifest(_require(args.manifest))
    report = cstore.validate_corpus(manifest)
    print(f"corpus {report.corpus_id}: {report.n_checked} utterances, "
          f"{report.n_failed} failed")
    for utt, err in report.failures.items():
        print(f"  {utt}: {err}")
    if not report.ok:
        raise CliError(f"corpus {report.corpus_id} failed validation",
                       "validation-failure", EXIT_VALIDATION)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_doc = json.loads(_require(args.spec).read_text())
    if args.seed is not None:
        spec_doc["seed"] = args.seed
    spec = synth_mod.SynthSpec(**spec_doc)
    out_dir = Path(args.workspace) / "corpora"
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.shift:
        manifest = synth_mod.gen_shifted_variant(
            spec, out_dir, shift=args.shift, magnitude=args.magnitude,
            corpus_id=args.corpus_id)
    else:
        manifest = synth_mod.gen_corpus(spec, out_dir,
                                        corpus_id=args.corpus_id or "synth")
    path = out_dir / f"{manifest.corpus_id}.json"
    _write_meta(path, "synth", {"spec": spec_doc, "shift": args.shift,
                                "magnitude": args.magnitude})
    print(f"wrote {path} ({len(manifest.utterances)} utterances)")
    return EXIT_OK


def cmd_aggregate(args) -> int:
    manifest = cstore.load_manifest(_require(args.manifest))
    group = agg.LayerGroup.from_label(args.group)
    fm = agg.build_dataset(manifest, group, level=args.level)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    agg.save_features(fm, out)
    _write_meta(out, "aggregate", {"manifest": str(args.manifest),
                                   "group": args.group, "level": args.level})
    print(f"wrote {out} ({len(fm)} rows, group {group.label}, {fm.level} level)")
    return EXIT_OK


def cmd_train(args) -> int:
    fm = agg.load_features(_require(args.features))
    train, test = sel.split_train_test(fm, ratio=0.8, seed=args.seed)
    spec = sel.GridSpec(estimator=args.estimator)
    cv = sel.grid_search_cv(train, spec, k=5, seed=args.seed)
    model = sel.fit_best(train, cv, seed=args.seed)
    accuracy = sel.evaluate(args.estimator, model, test)
    correct = int(round(accuracy * len(test)))
    p_value = sel.significance_test(correct, len(test))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.estimator == "svm":
        svm_mod.save_svm(model, out)
    else:
        ffn_mod.save_ffn(model, out)

    reports = out.parent.parent / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    stem = out.stem
    cv_path = reports / f"cv-{stem}.csv"
    with open(cv_path, "w") as fh:
        fh.write("config,fold_accuracies,mean,std\n")
        for ci, config in enumerate(cv.configs):
            folds = ";".join(f"{a:.4f}" for a in cv.fold_accuracies[ci])
            fh.write(f"\"{json.dumps(config, sort_keys=True)}\",{folds},"
                     f"{cv.mean_accuracy[ci]:.4f},{cv.std_accuracy[ci]:.4f}\n")
    summary = {
        "estimator": args.estimator,
        "group": fm.group.label,
        "level": fm.level,
        "source_corpus": fm.source_corpus,
        "seed": args.seed,
        "best_config": cv.best_config,
        "cv_mean_accuracy": float(cv.mean_accuracy[cv.best_index]),
        "n_train": len(train),
        "n_test": len(test),
        "test_accuracy": accuracy,
        "significance": {"test": "one-sided exact binomial vs 0.5",
                         "correct": correct, "n": len(test),
                         "p_value": p_value},
        "model_path": str(out),
    }
    (reports / f"summary-{stem}.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n")
    _write_meta(out, "train", {"features": str(args.features),
                               "estimator": args.estimator, "seed": args.seed})
    print(f"wrote {out}: test accuracy {accuracy:.4f} (p={p_value:.3g}), "
          f"best {cv.best_config}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(_require(args.model))
    fm = agg.load_features(_require(args.features))
    accuracy = sel.evaluate(model.kind, model, fm)
    print(f"accuracy {accuracy:.4f} on {len(fm)} rows")
    return EXIT_OK


def _parse_mapping(items, what):
    out = {}
    for item in items:
        if "=" not in item:
            raise CliError(f"bad {what} argument {item!r}, expected key=path",
                           "validation-failure", EXIT_VALIDATION)
        key, path = item.split("=", 1)
        out[key] = _require(path)
    return out


def cmd_crosseval(args) -> int:
    model_map = _parse_mapping(args.models, "model")          # "1-3"=path
    feature_map = _parse_mapping(args.corpora, "corpus")      # "name:1-3"=path
    models = {agg.LayerGroup.from_label(label): load_model(path)
              for label, path in model_map.items()}
    corpora: dict[str, dict] = {}
    for key, path in feature_map.items():
        if ":" not in key:
            raise CliError(f"bad corpus key {key!r}, expected name:group=path",
                           "validation-failure", EXIT_VALIDATION)
        name, group_label = key.rsplit(":", 1)
        corpora.setdefault(name, {})[agg.LayerGroup.from_label(group_label)] = \
            agg.load_features(path)
    matrix = xev.eval_matrix(models, corpora)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    xev.save_matrix(matrix, out)
    _write_meta(out, "crosseval", {"models": {k: str(v) for k, v in model_map.items()},
                                   "corpora": {k: str(v) for k, v in feature_map.items()}})
    for row in matrix.as_rows():
        print(",".join(row))
    return EXIT_OK


def cmd_boundary(args) -> int:
    model = load_model(_require(args.model))
    fm = agg.load_features(_require(args.features))
    X_pos = fm.X[fm.y == 1]
    X_neg = fm.X[fm.y == 0]
    cloud = bnd.generate_keypoints(model, X_pos, X_neg, n_pairs=args.pairs,
                                   tol=args.tol, seed=args.seed)
    if len(cloud) >= 2:
        cloud = bnd.refine_keypoints(model, cloud, n_lines=args.lines,
                                     n_sphere_samples=args.sphere,
                                     tol=args.tol, seed=args.seed + 1)
    elif len(cloud) == 0:
        print("warning: no boundary crossings found", file=sys.stderr)
    cloud = bnd.attach_support_vectors(cloud, model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bnd.save_cloud(cloud, out)
    _write_meta(out, "boundary", {"model": str(args.model),
                                  "features": str(args.features),
                                  "tol": args.tol, "pairs": args.pairs,
                                  "lines": args.lines, "sphere": args.sphere,
                                  "seed": args.seed})
    print(f"wrote {out} ({len(cloud)} boundary points)")
    return EXIT_OK


def cmd_project(args) -> int:
    fm = agg.load_features(_require(args.features))
    cloud = bnd.load_cloud(_require(args.cloud))
    if args.model:
        cloud = bnd.attach_support_vectors(cloud, load_model(_require(args.model)))
    Y, tags, ids = bnd.project_boundary(fm, cloud, perplexity=args.perplexity,
                                        seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tsne_mod.save_projection(ids, Y, tags, out)
    _write_meta(out, "project", {"features": str(args.features),
                                 "cloud": str(args.cloud),
                                 "perplexity": args.perplexity,
                                 "seed": args.seed})
    print(f"wrote {out} ({len(ids)} projected points)")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = Path(args.workspace) / "reports"
    if not reports.is_dir():
        raise _missing(reports)
    summaries = sorted(reports.glob("summary-*.json"))
    if not summaries:
        raise _missing(reports / "summary-*.json")
    table: dict[str, dict[str, float]] = {}
    for spath in summaries:
        doc = json.loads(spath.read_text())
        est = doc["estimator"].upper().replace("SVM", "SVC")
        table.setdefault(est, {})[doc["group"]] = doc["test_accuracy"]
    groups = [g.label for g in agg.LayerGroup]
    out = reports / "accuracy_table.csv"
    with open(out, "w") as fh:
        fh.write("classifier," + ",".join(groups) + "\n")
        for est in sorted(table):
            cells = [f"{100 * table[est][g]:.1f}" if g in table[est] else ""
                     for g in groups]
            fh.write(est + "," + ",".join(cells) + "\n")
    _write_meta(out, "report", {"workspace": str(args.workspace),
                                "n_summaries": len(summaries)})
    print(out.read_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embprobe",
        description="layer-wise embedding aggregation, pathology "
                    "classification and boundary mapping")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus manifest and its files")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--workspace", required=True)
    p.add_argument("--corpus-id", default=None)
    p.add_argument("--shift", choices=synth_mod.SHIFT_KINDS, default=None)
    p.add_argument("--magnitude", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("aggregate", help="build a feature matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--group", required=True,
                   choices=[g.label for g in agg.LayerGroup])
    p.add_argument("--level", default="speaker",
                   choices=["speaker", "utterance"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("train", help="80/20 split, 5-fold grid CV, refit, test")
    p.add_argument("--features", required=True)
    p.add_argument("--estimator", required=True, choices=["svm", "ffn"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a model on a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crosseval", help="corpus x layer-group percent-pathologic matrix")
    p.add_argument("--models", nargs="+", required=True,
                   metavar="GROUP=MODEL")
    p.add_argument("--corpora", nargs="+", required=True,
                   metavar="NAME:GROUP=FEATURES")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_crosseval)

    p = sub.add_parser("boundary", help="sample the p=0.5 surface of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--tol", type=float, default=bnd.DEFAULT_TOL)
    p.add_argument("--pairs", type=int, default=bnd.DEFAULT_N_PAIRS)
    p.add_argument("--lines", type=int, default=bnd.DEFAULT_N_LINES)
    p.add_argument("--sphere", type=int, default=bnd.DEFAULT_N_SPHERE)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("project", help="joint 2-D t-SNE of data + boundary + SVs")
    p.add_argument("--features", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--model", default=None,
                   help="SVM model whose support vectors join the projection")
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("report", help="combine training summaries into a table")
    p.add_argument("--workspace", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error-category: {exc.category}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (cstore.CorpusError, ValueError) as exc:
        print("error-category: validation-failure", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (svm_mod.TrainingError, FloatingPointError, ArithmeticError) as exc:
        print("error-category: computation-failure", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    except FileNotFoundError as exc:
        print("error-category: missing-input", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT


if __name__ == "__main__":
    sys.exit(main())
