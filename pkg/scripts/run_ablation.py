#!/usr/bin/env python
"""
Component ablation runner.

Cross-validates every combination of the three model switches (bi-threshold
aggregation, time embedding, biased cross-entropy) on one dataset and prints
one JSON row per combination.
"""

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from lgrln.config.config import TrainConfig, default_config, load_config, parse_config
from lgrln.errors import LgrlnError
from lgrln.persistence.dataset import load_dataset
from lgrln.training.crossval import crossval

logger = logging.getLogger(__name__)


def ablation_grid() -> List[Dict[str, object]]:
    """Dotted overrides for all eight switch combinations."""
    grid = []
    for aggregation, time_layers, mode in itertools.product(
        ("sum", "bi_threshold"), ([], [0]), ("mean", "biased")
    ):
        grid.append(
            {
                "gbt.aggregation": aggregation,
                "gbt.time_embed_layers": time_layers,
                "loss.mode": mode,
            }
        )
    return grid


def apply_overrides(config: TrainConfig, overrides: Dict[str, object]) -> TrainConfig:
    """Layer flat dotted overrides over a validated config."""
    data = config.model_dump(mode="json")
    data.update(overrides)
    return parse_config(data)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Component ablation over cross-validation")
    parser.add_argument("--dataset", required=True, help="Dataset manifest or directory")
    parser.add_argument("--config", help="Base configuration file")
    parser.add_argument("--epochs", type=int, help="Override the epoch count")
    parser.add_argument("--out", help="Write the JSON rows here as well")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        base = load_config(args.config) if args.config else default_config()
        if args.epochs is not None:
            base = apply_overrides(base, {"epochs": args.epochs})
        dataset = load_dataset(args.dataset)

        rows = []
        for overrides in ablation_grid():
            config = apply_overrides(base, overrides)
            mean = crossval(dataset, config).mean
            row = {**overrides, "f1_max": mean.f1_max, "f1_mean": mean.f1_mean}
            rows.append(row)
            print(json.dumps(row))
    except LgrlnError as e:
        logger.error(f"Ablation failed: {e}")
        return e.exit_code

    if args.out:
        Path(args.out).write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
