"""Checkpoint persistence module."""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Union

from pydantic import ValidationError

from lgrln.config.config import parse_config
from lgrln.errors import CheckpointError, ConfigurationError, DatasetLoadError, DimensionError
from lgrln.model.network import SummarizationNetwork
from lgrln.numerics.blob import read_blob, write_blob
from lgrln.persistence.dataset import MANIFEST_NAME
from lgrln.persistence.models import CHECKPOINT_FORMAT, CheckpointManifest
from lgrln.utils.files import atomic_write

logger = logging.getLogger(__name__)


class CheckpointStore:
    """Store for network checkpoints: one manifest plus one blob per parameter."""

    def __init__(self, checkpoint_dir: Union[str, Path]):
        """Initialize the checkpoint store.

        Args:
            checkpoint_dir: Directory holding (or receiving) the checkpoint
        """
        self.checkpoint_dir = Path(checkpoint_dir)
        self.manifest_path = self.checkpoint_dir / MANIFEST_NAME

    def save(self, network: SummarizationNetwork) -> Path:
        """Write every parameter, then the manifest.

        Returns:
            Path of the manifest
        """
        files = {}
        for name, tensor in network.parameters().items():
            rel = f"params/{name}.lgrt"
            write_blob(self.checkpoint_dir / rel, tensor.data, "f8")
            files[name] = rel
        manifest = CheckpointManifest(
            format=CHECKPOINT_FORMAT,
            input_dim=network.input_dim,
            token_dim=network.token_dim,
            config=network.config.model_dump(mode="json"),
            parameters=files,
            created_at=datetime.now().isoformat(),
        )
        atomic_write(self.manifest_path, manifest.model_dump_json(indent=2))
        logger.info(f"Saved checkpoint with {len(files)} tensors to {self.checkpoint_dir}")
        return self.manifest_path

    def load(self) -> SummarizationNetwork:
        """Rebuild the network stored in this directory.

        Raises:
            CheckpointError: If the manifest or a parameter blob is missing or invalid
        """
        try:
            with open(self.manifest_path, "r") as f:
                manifest = CheckpointManifest(**json.load(f))
        except FileNotFoundError as e:
            raise CheckpointError(f"No checkpoint manifest at {self.manifest_path}") from e
        except (json.JSONDecodeError, ValidationError, TypeError) as e:
            raise CheckpointError(f"Unreadable checkpoint manifest {self.manifest_path}: {e}") from e
        if manifest.format != CHECKPOINT_FORMAT:
            raise CheckpointError(f"{self.manifest_path} is not a checkpoint (format {manifest.format!r})")

        try:
            config = parse_config(manifest.config)
            network = SummarizationNetwork(config, manifest.input_dim, manifest.token_dim)
            state = {name: read_blob(self.checkpoint_dir / rel) for name, rel in manifest.parameters.items()}
            network.load_state_dict(state)
        except (ConfigurationError, DatasetLoadError, DimensionError) as e:
            raise CheckpointError(f"Invalid checkpoint {self.checkpoint_dir}: {e}") from e
        logger.info(f"Loaded checkpoint from {self.checkpoint_dir}")
        return network
