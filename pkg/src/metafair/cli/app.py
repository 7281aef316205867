"""Application entry point - the metafair command."""

import argparse
import asyncio
import hashlib
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from metafair import __version__
from metafair.cli.plot import plot_scatter
from metafair.config import MISSING_WORD_POLICIES, Config
from metafair.debias.base import DEBIAS_METHODS, DebiasConfig
from metafair.debias.dictdebias import load_corpus
from metafair.debias.registry import debias
from metafair.errors import InvalidArgument, IoError, MetaFairError, UsageError
from metafair.evaluation.sembias import load_sembias, sembias
from metafair.evaluation.similarity import load_similarity, similarity_benchmark
from metafair.evaluation.wat import load_wat_graph, wat_propagate, wat_score
from metafair.evaluation.weat import weat_battery
from metafair.lexicon import load_lexicon, load_weat_queries
from metafair.meta.base import ACTIVATIONS, GLE_SOLVERS, META_METHODS, MetaConfig
from metafair.meta.registry import fit_meta
from metafair.numerics.optim import OptimizerConfig
from metafair.pipeline.report import REPORT_FORMATS, read_report, report_emit
from metafair.pipeline.runner import load_sources_async, run_pipeline
from metafair.pipeline.spec import PipelineSpec
from metafair.security.paths import OutputGuard
from metafair.store.embedding import align
from metafair.store.textio import load_text, save_text

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def build_fingerprint() -> str:
    """Hash of the installed package sources."""
    root = Path(__file__).resolve().parent.parent
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        digest.update(str(path.relative_to(root)).encode("utf-8"))
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12]


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest=argparse.SUPPRESS, default=argparse.SUPPRESS, **kw):
        super().__init__(option_strings, dest=dest, default=default, nargs=0, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        print(f"metafair {__version__} ({build_fingerprint()})")
        parser.exit(0)


def _optimizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=None, help="training epochs")
    p.add_argument("--lr", type=float, default=None, help="learning rate")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--optimizer", choices=("sgd", "adagrad"), default=None)


def _optimizer(args, seed: int) -> OptimizerConfig:
    overrides = {
        "epochs": args.epochs,
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "method": args.optimizer,
    }
    return OptimizerConfig(seed=seed, **{k: v for k, v in overrides.items() if v is not None})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metafair",
        description="Meta-embeddings, debiasing and gender-bias evaluation for word vectors.",
    )
    parser.add_argument("--version", action=_VersionAction, help="print version and exit")
    parser.add_argument("--seed", type=int, default=None, help="random seed for every stage")
    parser.add_argument("--log-level", choices=LOG_LEVELS, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="re-write an embedding file (gzip by extension)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precision", type=int, default=None, help="significant digits")

    p = sub.add_parser("meta", help="learn a meta-embedding from several sources")
    p.add_argument("--method", choices=META_METHODS, required=True)
    p.add_argument("--sources", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=None, help="meta dimensionality")
    p.add_argument("--neighbors", type=int, default=5, help="LLE neighbours per source")
    p.add_argument("--weights", type=float, nargs="+", default=None, help="GLE source weights")
    p.add_argument("--lambdas", type=float, nargs="+", default=None, help="AEME weights")
    p.add_argument("--solver", choices=GLE_SOLVERS, default="als")
    p.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    p.add_argument("--calibrate", default=None, help="similarity file for GLE weights")
    p.add_argument("--precision", type=int, default=None)
    _optimizer_flags(p)

    p = sub.add_parser("debias", help="debias one embedding")
    p.add_argument("--method", choices=DEBIAS_METHODS, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=1, help="HARD subspace rank")
    p.add_argument("--m", type=int, default=35, help="INLP iterations")
    p.add_argument("--min-accuracy", type=float, default=0.0, help="INLP accuracy floor")
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--beta", type=float, default=0.4)
    p.add_argument("--gamma", type=float, default=0.4)
    p.add_argument("--glosses", default=None, help="DICT gloss TSV")
    p.add_argument("--unigrams", default=None, help="DICT unigram probabilities JSON")
    p.add_argument("--activation", choices=ACTIVATIONS, default="tanh")
    p.add_argument("--projection", action="store_true", help="DICT: plain projection")
    p.add_argument("--on-degenerate", choices=("report", "raise"), default="report")
    p.add_argument("--precision", type=int, default=None)
    _optimizer_flags(p)

    p = sub.add_parser("eval-bias", help="WEAT, WAT or SemBias on one embedding")
    p.add_argument("--metric", choices=("weat", "wat", "sembias"), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--data", required=True, help="queries / edge list / SemBias file")
    p.add_argument("--seeds", default=None, help="WAT seed pairs JSON")
    p.add_argument("--permutations", type=int, default=None)
    p.add_argument("--missing", choices=MISSING_WORD_POLICIES, default=None)
    p.add_argument("--direction", nargs=2, default=("he", "she"), metavar=("MASC", "FEM"))
    p.add_argument("--subset-only", action="store_true", help="SemBias subset instances")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")

    p = sub.add_parser("eval-sim", help="word-similarity benchmarks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("pipeline", help="run a regime from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True, help="report path")
    p.add_argument("--format", choices=REPORT_FORMATS, default=None)
    p.add_argument("--embedding-out", default=None, help="also save the final embedding")
    p.add_argument("--precision", type=int, default=None)

    p = sub.add_parser("plot", help="scatter one report metric against another")
    p.add_argument("--x-report", required=True)
    p.add_argument("--x-metric", required=True)
    p.add_argument("--y-report", required=True)
    p.add_argument("--y-metric", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--annotation", default="lower x is better")
    return parser


def _emit_json(payload, out: str | None, guard: OutputGuard) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    guard.check(out)
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"Cannot write {out}: {e}") from e


def cmd_convert(args, config: Config, guard: OutputGuard) -> None:
    embedding = load_text(args.input)
    save_text(embedding, args.out, args.precision or config.float_precision, guard)


def cmd_meta(args, config: Config, guard: OutputGuard) -> None:
    calibration = load_similarity(args.calibrate) if args.calibrate else None
    cfg = MetaConfig(
        method=args.method,
        meta_dim=args.dim,
        source_weights=tuple(args.weights) if args.weights else None,
        neighbors_per_source=args.neighbors,
        lambdas=tuple(args.lambdas) if args.lambdas else None,
        optimizer=_optimizer(args, config.seed),
        similarity_calibration=calibration,
        gle_solver=args.solver,
        activation=args.activation,
    )
    sources = asyncio.run(load_sources_async(args.sources))
    meta = fit_meta(align(sources), cfg)
    save_text(meta, args.out, args.precision or config.float_precision, guard)


def cmd_debias(args, config: Config, guard: OutputGuard) -> None:
    cfg = DebiasConfig(
        method=args.method,
        k=args.k,
        m=args.m,
        alpha=args.alpha,
        beta=args.beta,
        gamma=args.gamma,
        optimizer=_optimizer(args, config.seed),
        true_rejection=not args.projection,
        activation=args.activation,
        on_degenerate=args.on_degenerate,
        min_accuracy=args.min_accuracy,
    )
    lexicon = load_lexicon(args.lexicon) if args.lexicon else None
    if cfg.method in ("hard", "inlp") and lexicon is None:
        raise InvalidArgument(f"--lexicon is required for {cfg.method}")
    corpus = load_corpus(args.glosses, args.unigrams) if args.glosses else None
    embedding = load_text(args.input)
    out = debias(embedding, lexicon, cfg, corpus)
    save_text(out, args.out, args.precision or config.float_precision, guard)


def cmd_eval_bias(args, config: Config, guard: OutputGuard) -> None:
    embedding = load_text(args.input)
    permutations = args.permutations or config.permutations
    missing = args.missing or config.missing_words
    if args.metric == "weat":
        battery = weat_battery(
            embedding,
            load_weat_queries(args.data),
            permutations,
            config.seed,
            config.exact_permutation_limit,
            missing,
        )
        payload = {
            "metric": "weat",
            "mean_abs_effect": battery.mean_abs_effect,
            "results": [r.to_dict() for r in battery.results],
        }
    elif args.metric == "wat":
        if not args.seeds:
            raise InvalidArgument("--seeds is required for wat")
        graph = load_wat_graph(args.data, args.seeds)
        props = wat_propagate(graph, config.wat_alpha, config.wat_tol, config.wat_max_iters)
        result = wat_score(embedding, graph, props)
        payload = {
            "metric": "wat",
            "correlation": result.correlation,
            "n_scored": result.n_scored,
            "n_skipped": result.n_skipped,
        }
    else:
        result = sembias(
            embedding, load_sembias(args.data), tuple(args.direction), args.subset_only
        )
        payload = {"metric": "sembias", "score": result.score, **result.to_dict()}
    _emit_json(payload, args.out, guard)


def cmd_eval_sim(args, config: Config, guard: OutputGuard) -> None:
    embedding = load_text(args.input)
    results = [similarity_benchmark(embedding, load_similarity(p)).to_dict() for p in args.data]
    _emit_json({"metric": "similarity", "results": results}, args.out, guard)


def cmd_pipeline(args, config: Config, guard: OutputGuard) -> None:
    spec = PipelineSpec.from_json(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    embedding, report = run_pipeline(spec, config=config)
    precision = args.precision or config.float_precision
    report_emit(report, args.out, args.format, precision, guard)
    if args.embedding_out:
        save_text(embedding, args.embedding_out, precision, guard)


def cmd_plot(args, config: Config, guard: OutputGuard) -> None:
    plot_scatter(
        read_report(args.x_report),
        args.x_metric,
        read_report(args.y_report),
        args.y_metric,
        args.out,
        guard,
        args.annotation or None,
    )


COMMANDS = {
    "convert": cmd_convert,
    "meta": cmd_meta,
    "debias": cmd_debias,
    "eval-bias": cmd_eval_bias,
    "eval-sim": cmd_eval_sim,
    "pipeline": cmd_pipeline,
    "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    """Parse argv, run one subcommand and return the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = Config.from_env()
    except UsageError as e:
        logger.error(f"Configuration error: {e}")
        return e.exit_code
    if args.seed is not None:
        config.seed = args.seed
    if args.log_level is not None:
        config.log_level = args.log_level

    # Setup logging
    logging.basicConfig(
        level=getattr(logging, config.log_level, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stderr,
    )

    errors = config.validate()
    if errors:
        for error in errors:
            logger.error(f"Configuration error: {error}")
        logger.error("Please check your environment or .env file.")
        return 2

    guard = OutputGuard(
        p for p in (getattr(args, "out", None), getattr(args, "embedding_out", None)) if p
    )
    try:
        COMMANDS[args.command](args, config, guard)
    except MetaFairError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
