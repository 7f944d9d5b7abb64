from .linear import LinearHead, auto_lr, fit_linear_head, head_objective, predict_linear
from .metric import MetricConfig, attention_weights, cosine_similarity, predict_metric
