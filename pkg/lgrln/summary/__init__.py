"""Shot segmentation and key-shot selection."""

from lgrln.summary.knapsack import knapsack_select
from lgrln.summary.kts import ShotSegmentation, kts_segment, segment_video
from lgrln.summary.summarize import SummarySelection, run_length_encode, summarize

__all__ = [
    "ShotSegmentation",
    "SummarySelection",
    "knapsack_select",
    "kts_segment",
    "run_length_encode",
    "segment_video",
    "summarize",
]
