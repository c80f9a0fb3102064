"""On-disk manifest models for datasets and checkpoints."""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

DATASET_FORMAT = "lgrln-dataset"
CHECKPOINT_FORMAT = "lgrln-checkpoint"
MANIFEST_VERSION = 1


class VideoEntry(BaseModel):
    """One video of a dataset manifest; blob paths are relative to the manifest."""

    model_config = ConfigDict(extra="forbid")

    id: str
    n_frames: int = Field(..., ge=1)
    fps: float = Field(..., gt=0)
    features_blob: str
    annotations_blob: str
    importance_blob: Optional[str] = None
    change_points: Optional[List[int]] = None
    timestamps: Optional[List[float]] = None
    query_text: Optional[str] = None
    query_blob: Optional[str] = None


class DatasetManifest(BaseModel):
    """Dataset manifest: declared dimensions plus the video list."""

    model_config = ConfigDict(extra="forbid")

    format: str = DATASET_FORMAT
    version: int = MANIFEST_VERSION
    feature_dim: int = Field(..., ge=1)
    token_dim: Optional[int] = Field(default=None, ge=1)
    videos: List[VideoEntry] = Field(default_factory=list)


class CheckpointManifest(BaseModel):
    """Checkpoint manifest: config, dimensions and one blob per parameter."""

    model_config = ConfigDict(extra="forbid")

    format: str = CHECKPOINT_FORMAT
    version: int = MANIFEST_VERSION
    input_dim: int
    token_dim: Optional[int] = None
    config: Dict
    parameters: Dict[str, str]
    created_at: str
