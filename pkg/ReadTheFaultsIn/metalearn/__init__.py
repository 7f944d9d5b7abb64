from .trainlog import EpochRecord, TrainLog
from .common import pooled_dataset
from .pretrain import (
    SupervisedResult,
    Teacher,
    distill_with_head,
    pretrain_embedding,
    pretrain_with_head,
    self_distill,
    supervised_step,
)
from .maml import Adapted, MetaResult, episode_gradients, inner_adapt, meta_train
from .unseen import AdaptationResult, adapt_to_unseen, build_unseen_split
