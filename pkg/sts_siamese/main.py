"""
Command-line entry point: train, evaluate, score and analyse Siamese
CNN+LSTM similarity models.

Run as `python -m sts_siamese.main <command> ...`. Defaults for every flag
come from the STS_* environment variables (see config.py).
"""
import argparse
import os
import sys
from typing import List, Optional, Sequence

import pandas as pd

from sts_siamese.analysis import (
    BASELINE_WINDOW,
    DEFAULT_WINDOWS,
    AblationSettings,
    DistanceMatrix,
    ablate,
    context_matrix,
    score_pairs,
    scored_frame,
    word_matrix,
)
from sts_siamese.config import Config, load_config
from sts_siamese.corpus import DEFAULT_FIRSTN, load_pairs, load_sick, partition
from sts_siamese.embeddings import EmbeddingTable, OovPolicy, load_embeddings, save_text
from sts_siamese.errors import DataFormatError, NumericError, ShapeMismatchError, UsageError
from sts_siamese.evaluation import (
    CalibrationModel,
    evaluate,
    fit_calibration,
    load_calibration,
    raw_scores,
    save_calibration,
)
from sts_siamese.model import SiameseModel, load_checkpoint, save_checkpoint
from sts_siamese.training import train, write_epoch_log
from sts_siamese.types import DatasetSplit, TrainConfig


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SUBSETS = ("train", "validation", "test")


def _status(message: str) -> None:
    # stdout is reserved for tables a command emits
    print(message, file=sys.stderr)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so bad flags map to exit code 1."""

    def error(self, message: str):
        raise UsageError(message)


def _odd_window(value: str) -> int:
    window = int(value)
    if window < 1 or window % 2 == 0:
        raise argparse.ArgumentTypeError(f"window must be odd and positive, got {window}")
    return window


def _ablation_window(value: str) -> int:
    if int(value) == BASELINE_WINDOW:
        return BASELINE_WINDOW
    return _odd_window(value)


def _window_list(value: str) -> List[int]:
    try:
        return [_ablation_window(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated odd integers or 0, got {value!r}")


def _add_data_flags(parser: argparse.ArgumentParser, config: Config) -> None:
    parser.add_argument('--data', default=config.DATA_PATH or None, help='SICK-style TSV file')
    parser.add_argument('--split', choices=('file', 'firstn'), default=config.SPLIT_STRATEGY,
                        help='partition by the file\'s split column or by the first 4927/2000/3000 rows')


def _add_embedding_flags(parser: argparse.ArgumentParser, config: Config) -> None:
    parser.add_argument('--embeddings', default=config.EMBEDDINGS_PATH or None, help='word2vec text or binary file')
    parser.add_argument('--embeddings-format', choices=('auto', 'text', 'binary'), default=config.EMBEDDINGS_FORMAT)


def _add_training_flags(parser: argparse.ArgumentParser, config: Config) -> None:
    parser.add_argument('--filters', type=int, default=config.FILTERS, help='filter bank size; 0 trains without one')
    parser.add_argument('--hidden', type=int, default=config.HIDDEN)
    parser.add_argument('--epochs', type=int, default=config.EPOCHS)
    parser.add_argument('--seed', type=int, default=config.SEED)
    parser.add_argument('--batch-size', type=int, default=config.BATCH_SIZE)
    parser.add_argument('--lr-scale', type=float, default=config.LR_SCALE)
    parser.add_argument('--patience', type=int, default=config.PATIENCE)
    parser.add_argument('--workers', type=int, default=config.WORKERS)
    parser.add_argument('--clip-norm', type=float, default=config.CLIP_NORM,
                        help='rescale each batch gradient to at most this global L2 norm; 0 disables')
    parser.add_argument('--train-embeddings', action='store_true', help='fine-tune a private copy of the embeddings')
    parser.add_argument('--deterministic', action='store_true',
                        help='fixed-order gradient summation when --workers > 1')


def build_parser(config: Config) -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='sts_siamese', description='Siamese CNN+LSTM semantic textual similarity')
    commands = parser.add_subparsers(dest='command', parser_class=_ArgumentParser)
    commands.required = True

    p = commands.add_parser('train', help='train a model and write a checkpoint')
    _add_data_flags(p, config)
    _add_embedding_flags(p, config)
    _add_training_flags(p, config)
    p.add_argument('--window', type=_odd_window, default=config.WINDOW)
    p.add_argument('--out', default='model.csim', help='checkpoint path')
    p.add_argument('--log', help='epoch log CSV path')

    p = commands.add_parser('evaluate', help='score a split and report pearson, spearman and mse')
    _add_data_flags(p, config)
    _add_embedding_flags(p, config)
    p.add_argument('--model', required=True)
    p.add_argument('--subset', choices=SUBSETS, default='test', help='which partition to evaluate')
    p.add_argument('--calibration', help='calibration file; fitted on the validation split when omitted')
    p.add_argument('--bandwidth', type=float, default=config.BANDWIDTH)
    p.add_argument('--report', help='metric,value CSV; per-pair scores go next to it as <name>.pairs.csv')

    p = commands.add_parser('calibrate', help='fit the score calibration on the validation split')
    _add_data_flags(p, config)
    _add_embedding_flags(p, config)
    p.add_argument('--model', required=True)
    p.add_argument('--bandwidth', type=float, default=config.BANDWIDTH)
    p.add_argument('--out', default='calibration.npz')

    p = commands.add_parser('predict', help='score a file of sentence pairs')
    _add_embedding_flags(p, config)
    p.add_argument('--model', required=True)
    p.add_argument('--pairs', required=True, help='two tab-separated sentence columns, optional gold column')
    p.add_argument('--calibration')
    p.add_argument('--baseline-model', help='second checkpoint scored on the same pairs, side by side')
    p.add_argument('--baseline-calibration')
    p.add_argument('--format', choices=('csv', 'text'), default='text')
    p.add_argument('--out', help='write the table here instead of stdout')

    p = commands.add_parser('analyze-words', help='cosine distances between the word embeddings of two sentences')
    _add_embedding_flags(p, config)
    p.add_argument('sentence_a')
    p.add_argument('sentence_b')
    p.add_argument('--format', choices=('csv', 'text'), default='text')
    p.add_argument('--out')
    p.add_argument('--top', type=int, default=4, help='nearest B tokens listed per A token in text output')

    p = commands.add_parser('analyze-contexts', help='cosine distances between the local contexts of two sentences')
    _add_embedding_flags(p, config)
    p.add_argument('--model', required=True)
    p.add_argument('--window', type=_odd_window, help='expected window of the checkpoint')
    p.add_argument('sentence_a')
    p.add_argument('sentence_b')
    p.add_argument('--format', choices=('csv', 'text'), default='text')
    p.add_argument('--out')
    p.add_argument('--top', type=int, default=4, help='nearest B tokens listed per A token in text output')

    p = commands.add_parser('ablate', help='train one model per window length and tabulate test metrics')
    _add_data_flags(p, config)
    _add_embedding_flags(p, config)
    _add_training_flags(p, config)
    p.add_argument('--windows', type=_window_list, default=list(DEFAULT_WINDOWS),
                   help='comma-separated odd windows; 0 adds the run without a filter bank')
    p.add_argument('--bandwidth', type=float, default=config.BANDWIDTH)
    p.add_argument('--out', default='ablation.csv')

    return parser


def _require(value: Optional[str], flag: str) -> str:
    if not value:
        raise UsageError(f"{flag} is required (or set it in the environment)")
    return value


def _load_table(args, config: Config) -> EmbeddingTable:
    path = _require(args.embeddings, '--embeddings')
    policy = OovPolicy(kind=config.OOV_POLICY, seed=config.OOV_SEED)
    table = load_embeddings(path, args.embeddings_format, policy)
    _status(f"✅ Loaded {len(table):,} embeddings of width {table.dim} from {path}")
    return table


def _load_dataset(args) -> DatasetSplit:
    path = _require(args.data, '--data')
    records = load_sick(path)
    dataset = partition(records, args.split, DEFAULT_FIRSTN)
    train_n, val_n, test_n = dataset.sizes()
    _status(f"✅ Loaded {len(records):,} pairs ({args.split} split: {train_n}/{val_n}/{test_n}, "
            f"{len(dataset.unused)} unused)")
    return dataset


def _load_model(args, table: Optional[EmbeddingTable], path: Optional[str] = None) -> SiameseModel:
    path = path or args.model
    model = load_checkpoint(path)
    hp = model.hyper
    _status(f"✅ Loaded model k={hp.k} d={hp.d} l={hp.l} H={hp.H} from {path}")
    if table is not None:
        if table.dim != hp.k:
            raise UsageError(f"checkpoint expects {hp.k}-d embeddings, {table.identifier} has {table.dim}")
        if model.embedding_id != table.identifier:
            _status(f"⚠️  Checkpoint was trained with {model.embedding_id!r}, using {table.identifier!r}")
    return model


def _train_config(args, config: Config) -> TrainConfig:
    if args.clip_norm < 0:
        raise UsageError(f"--clip-norm must be non-negative, got {args.clip_norm}")
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr_scale=args.lr_scale,
        rho=config.RHO,
        epsilon=config.EPSILON,
        shuffle_seed=args.seed,
        patience=args.patience,
        train_embeddings=args.train_embeddings,
        workers=args.workers,
        deterministic=args.deterministic or args.workers == 1,
        clip_norm=args.clip_norm if args.clip_norm > 0 else None,
    )


def _render_matrix(matrix: DistanceMatrix, args) -> str:
    text = matrix.render(args.format)
    if args.format == 'text' and args.top > 0:
        text = f"{text}\n\n{matrix.render_nearest(args.top)}"
    return text


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, 'w', encoding='utf-8') as fh:
            fh.write(text if text.endswith('\n') else text + '\n')
        _status(f"✅ Wrote {out}")
    else:
        sys.stdout.write(text if text.endswith('\n') else text + '\n')


def cmd_train(args, config: Config) -> int:
    table = _load_table(args, config)
    dataset = _load_dataset(args)
    model = SiameseModel.initialize(
        k=table.dim,
        d=args.filters,
        l=args.window,
        H=args.hidden,
        seed=args.seed,
        embedding_id=table.identifier,
        init_stddev=config.INIT_STDDEV,
        forget_bias=config.FORGET_BIAS,
    )
    result = train(model, dataset, table, _train_config(args, config), verbose=True)

    save_checkpoint(result.model, args.out)
    _status(f"✅ Saved checkpoint to {args.out}")
    if args.log:
        write_epoch_log(result.log, args.log)
        _status(f"✅ Wrote epoch log to {args.log}")
    if result.table is not None:
        tuned_path = f"{os.path.splitext(args.out)[0]}.embeddings.txt"
        save_text(result.table, tuned_path)
        _status(f"✅ Saved tuned embeddings to {tuned_path}")
    return EXIT_OK


def _calibration_for(args, model: SiameseModel, dataset: DatasetSplit, table: EmbeddingTable) -> Optional[CalibrationModel]:
    if getattr(args, 'calibration', None):
        _status(f"✅ Loaded calibration from {args.calibration}")
        return load_calibration(args.calibration)
    if len(dataset.validation) < 5:
        _status("⚠️  Validation split too small to calibrate, using 1 + 4 * raw")
        return None
    return fit_calibration(raw_scores(model, dataset.validation, table),
                           [p.gold for p in dataset.validation], args.bandwidth)


def cmd_evaluate(args, config: Config) -> int:
    table = _load_table(args, config)
    dataset = _load_dataset(args)
    model = _load_model(args, table)
    pairs = getattr(dataset, args.subset)
    if not pairs:
        raise UsageError(f"the {args.subset} split is empty")

    calibration = _calibration_for(args, model, dataset, table)
    report = evaluate(model, pairs, table, calibration)
    _status(f"📊 {args.subset}: n={report.n} pearson={report.pearson:.4f} "
            f"spearman={report.spearman:.4f} mse={report.mse:.4f}")

    if args.report:
        metrics = pd.DataFrame(
            [("pearson", report.pearson), ("spearman", report.spearman), ("mse", report.mse), ("n", report.n)],
            columns=["metric", "value"],
        )
        metrics.to_csv(args.report, index=False, float_format="%.17g")
        pairs_path = f"{os.path.splitext(args.report)[0]}.pairs.csv"
        per_pair = pd.DataFrame(
            [(p.id, p.raw, p.calibrated, p.gold) for p in report.predictions],
            columns=["id", "raw", "calibrated", "gold"],
        )
        per_pair.to_csv(pairs_path, index=False, float_format="%.17g")
        _status(f"✅ Wrote {args.report} and {pairs_path}")
    return EXIT_OK


def cmd_calibrate(args, config: Config) -> int:
    table = _load_table(args, config)
    dataset = _load_dataset(args)
    model = _load_model(args, table)
    if not dataset.validation:
        raise UsageError("the validation split is empty")
    calibration = fit_calibration(raw_scores(model, dataset.validation, table),
                                  [p.gold for p in dataset.validation], args.bandwidth)
    save_calibration(calibration, args.out)
    _status(f"✅ Calibration on {calibration.raw.size} pairs (bandwidth {args.bandwidth}) saved to {args.out}")
    return EXIT_OK


def cmd_predict(args, config: Config) -> int:
    pairs = load_pairs(args.pairs)
    table = _load_table(args, config)
    model = _load_model(args, table)
    calibration = load_calibration(args.calibration) if args.calibration else None
    if calibration is None:
        _status("⚠️  No calibration given, using 1 + 4 * raw")

    scored = score_pairs(model, calibration, pairs, table)
    baseline = None
    if args.baseline_model:
        baseline_model = _load_model(args, table, args.baseline_model)
        baseline_calibration = load_calibration(args.baseline_calibration) if args.baseline_calibration else None
        baseline = score_pairs(baseline_model, baseline_calibration, pairs, table)
    elif args.baseline_calibration:
        raise UsageError("--baseline-calibration needs --baseline-model")

    frame = scored_frame(scored, baseline)
    if args.format == 'csv':
        text = frame.to_csv(index=False, float_format="%.17g")
    elif frame.empty:
        text = "(no pairs)"
    else:
        text = frame.to_string(index=False, float_format=lambda v: f"{v:.2f}")
    _emit(text, args.out)
    return EXIT_OK


def cmd_analyze_words(args, config: Config) -> int:
    table = _load_table(args, config)
    matrix = word_matrix(args.sentence_a, args.sentence_b, table)
    if matrix.marked:
        _status(f"⚠️  {matrix.marked} cells undefined (zero-norm embeddings)")
    _emit(_render_matrix(matrix, args), args.out)
    return EXIT_OK


def cmd_analyze_contexts(args, config: Config) -> int:
    table = _load_table(args, config)
    model = _load_model(args, table)
    matrix = context_matrix(args.sentence_a, args.sentence_b, model, table, window=args.window)
    if matrix.marked:
        _status(f"⚠️  {matrix.marked} cells undefined (zero local context)")
    _emit(_render_matrix(matrix, args), args.out)
    return EXIT_OK


def cmd_ablate(args, config: Config) -> int:
    table = _load_table(args, config)
    dataset = _load_dataset(args)
    settings = AblationSettings(
        filters=args.filters,
        hidden=args.hidden,
        seed=args.seed,
        train_config=_train_config(args, config),
        bandwidth=args.bandwidth,
        init_stddev=config.INIT_STDDEV,
        forget_bias=config.FORGET_BIAS,
    )
    _status(f"🚀 Ablation over windows {args.windows}"
            + (" (0 = no filter bank)" if BASELINE_WINDOW in args.windows else ""))
    frame = ablate(args.windows, dataset, table, settings, workers=args.workers, verbose=args.workers == 1)
    frame.to_csv(args.out, index=False, float_format="%.17g")
    failed = int((frame["status"] != "ok").sum())
    if failed:
        _status(f"⚠️  {failed} of {len(frame)} runs failed")
    _status(f"✅ Wrote {args.out}")
    return EXIT_OK


COMMANDS = {
    'train': cmd_train,
    'evaluate': cmd_evaluate,
    'calibrate': cmd_calibrate,
    'predict': cmd_predict,
    'analyze-words': cmd_analyze_words,
    'analyze-contexts': cmd_analyze_contexts,
    'ablate': cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one command and return its exit code.

    Returns:
        0 on success, 1 on a usage error, 2 on a data error, 3 on a numeric
        failure.
    """
    try:
        config = load_config()
        args = build_parser(config).parse_args(argv)
        return COMMANDS[args.command](args, config)
    except (UsageError, ShapeMismatchError) as e:
        _status(f"❌ {e}")
        return EXIT_USAGE
    except (DataFormatError, OSError, UnicodeDecodeError) as e:
        _status(f"❌ {e}")
        return EXIT_DATA
    except NumericError as e:
        _status(f"❌ Numeric failure: {e}")
        return EXIT_NUMERIC
    except ValueError as e:
        # configuration and argument range checks
        _status(f"❌ {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
