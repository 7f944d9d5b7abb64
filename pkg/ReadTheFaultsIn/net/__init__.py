from .layers import Layer
from .embedding import EmbeddingParams, ForwardCache, architecture, backward, embed, forward, init_params
from .losses import LossResult, accuracy, kl_divergence, softmax_cross_entropy
from .optim import LrSchedule, OptimizerState, clip_and_step, clip_gradients, global_norm, lr_at
from .checkpoint import checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint
from .gradcheck import gradient_check, projection_loss, squared_norm_loss
