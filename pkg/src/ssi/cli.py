"""``ssi`` command line: gen, train, eval, xval, plot.

Exit codes: 0 success, 1 usage/config error, 2 data or I/O error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as cfgmod
from . import modelio, synth
from .classify import TrainingError
from .config import ConfigError
from .dataset import DatasetError, load_csv, save_csv
from .ensemble import fit
from .evaluation import GlobalBaseline, MetricsReport, cross_validate, evaluate_subjects
from .modelio import FORMAT_VERSION, ModelFormatError
from .plot import render_svg

log = logging.getLogger("ssi")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag spellings that differ from the config key
FLAG_ALIASES = {
    "subgroups": ["--subgroups"],
    "min_positives": ["--min-positives"],
    "neg_tolerance": ["--neg-tolerance"],
    "min_sensitivity": ["--min-sensitivity"],
    "kmax": ["--kmax"],
    "feature_select": ["--feature-select"],
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat 'key = value' config file")
    g = p.add_argument_group("configuration (defaults < --config file < flags)")
    for key in cfgmod.SCHEMA:
        flags = FLAG_ALIASES.get(key, ["--" + key.replace("_", "-")])
        g.add_argument(*flags, dest=key, metavar="V", default=None)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = _Parser(prog="ssi", description="Exclusive-cluster ensembles for partially separable data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic dataset and its ground truth")
    p.add_argument("-o", "--out", required=True, help="output prefix; writes <out>.csv and <out>.truth.csv")
    _add_config_flags(p)

    p = sub.add_parser("train", parents=[common], help="fit an ensemble")
    p.add_argument("data")
    p.add_argument("-o", "--out", required=True, help="model file")
    p.add_argument("--trace", help="trace log (default: <out>.trace.log)")
    _add_config_flags(p)

    p = sub.add_parser("eval", parents=[common], help="subject-level metrics")
    p.add_argument("data")
    p.add_argument("--model", help="model file (required unless --baseline global)")
    p.add_argument("--train", dest="train_data", help="training CSV for --baseline global")
    p.add_argument("-o", "--out", help="also append the CSV row to this file")
    _add_config_flags(p)

    p = sub.add_parser("xval", parents=[common], help="subject-level stratified cross-validation")
    p.add_argument("data")
    p.add_argument("-o", "--out", help="write per-fold CSV rows here")
    _add_config_flags(p)

    p = sub.add_parser("plot", parents=[common], help="SVG scatter of a 2-D dataset")
    p.add_argument("data")
    p.add_argument("--model")
    p.add_argument("-o", "--out", required=True)
    _add_config_flags(p)
    return parser


def _resolve(args) -> dict:
    overrides = {k: getattr(args, k) for k in cfgmod.SCHEMA if getattr(args, k, None) is not None}
    return cfgmod.resolve(args.config, overrides)


def _echo_lines(cfg: dict, prefix: str = "# ") -> list[str]:
    return [f"{prefix}format_version={FORMAT_VERSION}", f"{prefix}config={json.dumps(cfgmod.echo(cfg), sort_keys=True)}"]


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from None


def _out_prefix(out: str) -> str:
    return out[:-4] if out.endswith(".csv") else out


def cmd_gen(args, cfg) -> int:
    data, truth = synth.generate(cfgmod.synth_config(cfg))
    prefix = _out_prefix(args.out)
    try:
        Path(prefix).parent.mkdir(parents=True, exist_ok=True)
        save_csv(data, prefix + ".csv")
        synth.save_truth(truth, prefix + ".truth.csv")
    except OSError as exc:
        raise OSError(f"cannot write {prefix}.csv: {exc.strerror}") from None
    # the CSV grammar has no comment lines, so the echo goes to a sidecar
    _write(prefix + ".config", "\n".join(_echo_lines(cfg)) + "\n")
    print(f"{prefix}.csv\t{len(data)} instances")
    print(f"{prefix}.truth.csv\t{len(data)} rows")
    print(f"{prefix}.config")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    data = load_csv(args.data)
    model, trace = fit(data, cfgmod.ssi_config(cfg))
    if trace.replay_remaining() != trace.remaining_positives:
        raise AssertionError("trace replay does not reproduce the remaining positives")
    modelio.save(model, args.out, cfgmod.echo(cfg))
    trace_path = args.trace or str(args.out) + ".trace.log"
    _write(trace_path, "\n".join(_echo_lines(cfg) + trace.to_lines()) + "\n")
    for w in trace.warnings:
        log.warning(w)
    if not model.detectors:
        log.warning("no detectors accepted")
    rounds = sum(1 for e in trace.events if e.decision == "removed")
    log.info("%d detector(s) accepted; %d exclusive cluster(s) processed; %d positives remain",
             len(model.detectors), rounds, len(trace.remaining_positives))
    print(f"detectors\t{len(model.detectors)}")
    print(f"model\t{args.out}")
    print(f"trace\t{trace_path}")
    return EXIT_OK


def _check_dim(expected: int, data, what: str) -> None:
    if data.dim != expected:
        raise DatasetError(f"dimension mismatch: {what} expects {expected} features, data has {data.dim}")


def _emit_report(rep: MetricsReport, cfg: dict, out: str | None) -> None:
    print(rep.to_text())
    for line in _echo_lines(cfg, prefix=""):
        print(line.replace("=", " = ", 1))
    if out:
        path = Path(out)
        echo = _echo_lines(cfg)
        try:
            prior = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
            last_config = next((ln for ln in reversed(prior) if ln.startswith("# config=")), None)
            with open(path, "a", encoding="utf-8") as fh:
                if not prior:
                    fh.write("\n".join(echo) + "\n" + MetricsReport.CSV_HEADER + "\n")
                elif last_config != echo[1]:
                    # rows below this line were produced under a different configuration
                    fh.write(echo[1] + "\n")
                fh.write(rep.to_csv_row() + "\n")
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc.strerror}") from None


def cmd_eval(args, cfg) -> int:
    data = load_csv(args.data)
    pooling = cfg["pooling"]
    if cfg["baseline"] == "global":
        if not args.train_data:
            raise UsageError("--baseline global needs --train <csv> to fit the global classifier")
        train = load_csv(args.train_data)
        _check_dim(train.dim, data, "the training data")
        base = GlobalBaseline.fit(train, cfgmod.classifier_spec(cfg, baseline=True), cfg["standardize"])
        flags = base.flags(data.X)
        method = f"global-{cfg['baseline_classifier']}"
    else:
        if not args.model:
            raise UsageError("eval needs --model (or --baseline global)")
        model = modelio.load(args.model)
        _check_dim(model.dim, data, "the model")
        flags = model.flags(data.X)
        method = "ssi"
    rep = evaluate_subjects(data, flags, pooling, method)
    if rep.oracle:
        log.warning("best-chance pooling is an oracle baseline: its threshold was chosen on the evaluation labels")
    _emit_report(rep, cfg, args.out)
    return EXIT_OK


def cmd_xval(args, cfg) -> int:
    data = load_csv(args.data)
    fit_predict = None
    method = "ssi"
    if cfg["baseline"] == "global":
        spec = cfgmod.classifier_spec(cfg, baseline=True)

        def baseline_flags(train, test):
            return GlobalBaseline.fit(train, spec, cfg["standardize"]).flags(test.X)

        fit_predict = baseline_flags
        method = f"global-{cfg['baseline_classifier']}"
    try:
        result = cross_validate(
            data,
            cfgmod.ssi_config(cfg),
            folds=cfg["folds"],
            seed=cfg["seed"],
            pooling=cfg["pooling"],
            method=method,
            threads=cfg["threads"],
            fit_predict=fit_predict,
        )
    except ValueError as exc:
        if "subjects for" in str(exc):
            raise DatasetError(str(exc)) from None
        raise
    rows = [MetricsReport.CSV_HEADER + ",fold"]
    for k, rep in enumerate(result.folds):
        rows.append(f"{rep.to_csv_row()},{k}")
    print("\n".join(rows))
    for key in ("sensitivity", "specificity", "accuracy"):
        print(f"mean_{key} = {result.mean[key]!r}")
        print(f"std_{key} = {result.std[key]!r}")
    for line in _echo_lines(cfg, prefix=""):
        print(line.replace("=", " = ", 1))
    if args.out:
        _write(args.out, "\n".join(_echo_lines(cfg) + rows) + "\n")
    return EXIT_OK


def cmd_plot(args, cfg) -> int:
    data = load_csv(args.data)
    if data.dim != 2:
        raise UsageError(f"plot needs 2-D data, {args.data} has dimension {data.dim}")
    model = None
    if args.model:
        model = modelio.load(args.model)
        _check_dim(model.dim, data, "the model")
    comment = f"format_version={FORMAT_VERSION} config={json.dumps(cfgmod.echo(cfg), sort_keys=True)}"
    _write(args.out, render_svg(data, model, comment))
    print(args.out)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "xval": cmd_xval, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, UsageError, TrainingError) as exc:
        parser.print_usage(sys.stderr)
        print(f"ssi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"ssi: error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (DatasetError, ModelFormatError, OSError) as exc:
        print(f"ssi: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as exc:
        print(f"ssi: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
