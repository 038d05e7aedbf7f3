"""Joint image/text embedding with phrase localization on synthetic scenes."""

from ._semvis import (
    Dataset,
    Error,
    Session,
    default_config,
    dry_run,
    eval_retrieval,
    generate_dataset,
    large_scale_config,
    ranking_loss,
    read_dataset,
)

__all__ = [
    "Dataset",
    "Error",
    "Session",
    "default_config",
    "dry_run",
    "eval_retrieval",
    "generate_dataset",
    "large_scale_config",
    "ranking_loss",
    "read_dataset",
]
