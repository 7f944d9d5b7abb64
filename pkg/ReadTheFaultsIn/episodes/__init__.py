from .task import (
    TaskDataset,
    balanced_counts,
    build_tasks,
    derive_noisy_task,
    exclude_classes,
    merge_tasks,
    load_task,
    restrict_classes,
    save_task,
)
from .episode import Episode, check_protocol, episode_from_indices, read_replay, sample_episode, write_replay
from .split import MetaSplit, meta_split
