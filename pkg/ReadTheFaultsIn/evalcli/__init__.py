from .report import EvalProtocol, EvalReport, print_reports, summary_table
from .evaluate import (
    EmbeddingClassifier,
    EpisodeClassifier,
    adaptation_curve,
    dump_embeddings,
    evaluate,
    noise_sweep,
)
from .cli import main
