"""Command-line entry point: ``lgrln synth|train|eval|summarize|gradcheck``."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

from lgrln.config.config import TrainConfig, default_config, load_config, parse_config
from lgrln.errors import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, LgrlnError
from lgrln.evaluation.metrics import aggregate_metrics
from lgrln.evaluation.plotdata import write_branch_scores, write_loss_curve, write_time_embedding_correlation
from lgrln.model.graphs import dump_graphs
from lgrln.model.network import SummarizationNetwork, count_parameters, time_embedding_correlation
from lgrln.numerics.blob import read_blob
from lgrln.persistence.checkpoint import CheckpointStore
from lgrln.persistence.dataset import load_dataset, write_dataset
from lgrln.persistence.synth import SynthOptions, synth_dataset
from lgrln.summary.summarize import run_length_encode
from lgrln.training.crossval import crossval
from lgrln.training.gradsuite import run_gradient_suite
from lgrln.training.trainer import evaluate, graphs_for, infer, train
from lgrln.utils.env import load_env

logger = logging.getLogger(__name__)

TRAIN_LOG = "train_log.jsonl"
CORRELATION_POSITIONS = 64
REFERENCE_INPUT_DIM = 1024
REFERENCE_TOKEN_DIM = 768


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="lgrln", description="Graph-based video summarization")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    synth = subparsers.add_parser("synth", help="Generate a synthetic dataset")
    synth.add_argument("--out", required=True, help="Output directory")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--videos", type=int, default=10)
    synth.add_argument("--min-frames", type=int, default=60)
    synth.add_argument("--max-frames", type=int, default=120)
    synth.add_argument("--scenes", type=int, default=5)
    synth.add_argument("--annotators", type=int, default=3)
    synth.add_argument("--feature-dim", type=int, default=32)
    synth.add_argument("--with-queries", action="store_true")

    train_cmd = subparsers.add_parser("train", help="Train on a dataset and write a checkpoint")
    train_cmd.add_argument("--dataset", required=True, help="Dataset manifest or directory")
    train_cmd.add_argument("--out", required=True, help="Checkpoint directory")
    train_cmd.add_argument("--config", help="Configuration file")
    train_cmd.add_argument("--seed", type=int)
    train_cmd.add_argument("--emit-plotdata", metavar="DIR", help="Write CSV plot data here")
    train_cmd.add_argument("--dump-graphs", metavar="PATH", help="Write the temporal graphs as JSON")

    eval_cmd = subparsers.add_parser("eval", help="Evaluate a checkpoint, or cross-validate")
    eval_cmd.add_argument("--dataset", required=True)
    eval_cmd.add_argument("--checkpoint", help="Checkpoint directory; cross-validates when omitted")
    eval_cmd.add_argument("--config", help="Configuration file")
    eval_cmd.add_argument("--seed", type=int)
    eval_cmd.add_argument("--out", help="Also write the JSON rows here")

    summ = subparsers.add_parser("summarize", help="Summarize one video")
    summ.add_argument("--checkpoint", required=True)
    summ.add_argument("--features", required=True, help="LGRT n x D feature blob")
    summ.add_argument("--fps", type=float, default=2.0)
    summ.add_argument("--query-blob", help="LGRT L x D_t query token blob")
    summ.add_argument("--out", help="Write the JSON result here instead of stdout")
    summ.add_argument("--emit-plotdata", metavar="DIR")
    summ.add_argument("--dump-graphs", metavar="PATH")

    grad = subparsers.add_parser("gradcheck", help="Finite-difference gradient suite")
    grad.add_argument("--seed", type=int, default=0)
    grad.add_argument("--instances", type=int, default=20)
    grad.add_argument("--out", help="Also write the JSON report here")
    return parser


def resolve_config(path: Optional[str], seed: Optional[int], env: Dict[str, Optional[str]]) -> TrainConfig:
    """Config from ``--config``, else ``LGRLN_CONFIG`` if present, else defaults; seed overrides."""
    if path:
        config = load_config(path)
    elif env.get("LGRLN_CONFIG") and Path(str(env["LGRLN_CONFIG"])).exists():
        config = load_config(str(env["LGRLN_CONFIG"]))
    else:
        config = default_config()
    if seed is None and env.get("LGRLN_SEED"):
        seed = int(str(env["LGRLN_SEED"]))
    if seed is not None:
        data = config.model_dump(mode="json")
        data["seed"] = seed
        config = parse_config(data)
    return config


def _emit(rows: Iterable[Dict[str, Any]], out: Optional[str]) -> None:
    lines = [json.dumps(row) for row in rows]
    for line in lines:
        print(line)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text("\n".join(lines) + "\n")


def cmd_synth(args: argparse.Namespace, env: Dict[str, Optional[str]]) -> int:
    options = SynthOptions(
        n_videos=args.videos,
        n_frames_range=(args.min_frames, args.max_frames),
        n_scenes=args.scenes,
        n_annotators=args.annotators,
        seed=args.seed,
        with_queries=args.with_queries,
        feature_dim=args.feature_dim,
    )
    path = write_dataset(synth_dataset(options), args.out)
    print(json.dumps({"manifest": str(path), "videos": options.n_videos}))
    return EXIT_OK


def cmd_train(args: argparse.Namespace, env: Dict[str, Optional[str]]) -> int:
    config = resolve_config(args.config, args.seed, env)
    dataset = load_dataset(args.dataset)
    out = Path(args.out)
    if args.dump_graphs:
        dump_graphs(
            {v.id: graphs_for(v.n_frames, v.fps, config.tau, v.timestamps) for v in dataset},
            args.dump_graphs,
        )
    result = train(dataset, config, log_path=out / TRAIN_LOG)
    CheckpointStore(out).save(result.network)
    if args.emit_plotdata:
        write_loss_curve(result.rows, args.emit_plotdata)
        n = min(config.gbt.max_positions, CORRELATION_POSITIONS)
        write_time_embedding_correlation(
            time_embedding_correlation(result.network.time_table.data, n), args.emit_plotdata
        )
    final = result.rows[-1].model_dump()
    print(json.dumps({"checkpoint": str(out), **final}))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, env: Dict[str, Optional[str]]) -> int:
    dataset = load_dataset(args.dataset)
    rows: List[Dict[str, Any]] = []
    if args.checkpoint:
        network = CheckpointStore(args.checkpoint).load()
        videos = evaluate(network, dataset)
        rows.extend({"split": "video", **v.model_dump()} for v in videos)
        rows.append({"split": "aggregate", **aggregate_metrics(videos).as_dict()})
    else:
        config = resolve_config(args.config, args.seed, env)
        result = crossval(dataset, config)
        for fold in result.folds:
            rows.extend({"split": "video", "fold": fold.fold, **v.model_dump()} for v in fold.videos)
            rows.append({"split": "fold", "fold": fold.fold, **fold.summary.as_dict()})
        rows.append({"split": "aggregate", **result.mean.as_dict()})
    _emit(rows, args.out)
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace, env: Dict[str, Optional[str]]) -> int:
    network = CheckpointStore(args.checkpoint).load()
    features = read_blob(args.features).astype(np.float64)
    tokens = read_blob(args.query_blob).astype(np.float64) if args.query_blob else None
    result = infer(network, features, args.fps, tokens)
    if args.dump_graphs:
        dump_graphs({"video": graphs_for(features.shape[0], args.fps, network.config.tau)}, args.dump_graphs)
    if args.emit_plotdata:
        write_branch_scores(result.probabilities, result.branch_probabilities, args.emit_plotdata)
    payload = {
        "change_points": list(result.segmentation.change_points),
        "shot_scores": result.selection.shot_scores.tolist(),
        "selected_shots": result.selection.selected_shots,
        "frame_mask_rle": [list(run) for run in run_length_encode(result.selection.frame_mask)],
        "probabilities": result.probabilities.tolist(),
    }
    text = json.dumps(payload)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace, env: Dict[str, Optional[str]]) -> int:
    entries = run_gradient_suite(seed=args.seed, instances=args.instances)
    reference = SummarizationNetwork(default_config(), REFERENCE_INPUT_DIM, REFERENCE_TOKEN_DIM)
    report = {
        "operations": [
            {"operation": e.operation, "instances": e.instances, "max_error": e.max_error, "passed": e.passed}
            for e in entries
        ],
        "parameter_count": count_parameters(reference),
    }
    _emit([report], args.out)
    failed = [e.operation for e in entries if not e.passed]
    if failed:
        logger.error(f"Gradient check failed for: {', '.join(failed)}")
        return EXIT_NUMERIC
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "summarize": cmd_summarize,
    "gradcheck": cmd_gradcheck,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one CLI command and return its exit status."""
    env = load_env()
    logging.basicConfig(
        level=getattr(logging, str(env["LGRLN_LOG_LEVEL"]).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, env)
    except LgrlnError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
