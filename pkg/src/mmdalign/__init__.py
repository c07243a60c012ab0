"""Unsupervised cross-lingual word embedding alignment via kernel MMD matching."""

from .embeddings import (EmbeddingSpace, Lexicon, Vocabulary, load_embeddings,
                         load_lexicon, normalize, save_embeddings, save_lexicon)
from .evaluator import (BliReport, SimilarityReport, bli_accuracy,
                        frequency_bucket_report, pearson,
                        unsupervised_criterion, word_similarity)
from .initializer import InitConfig, build_initial_mapping, procrustes
from .lexicon import RetrievalConfig, csls_scores, induce_dictionary, refine
from .mmd import (KernelSpec, Projector, compress, fit_projector,
                  kernel_matrix, mmd2_batch, mmd2_gradient)
from .trainer import (TrainConfig, TrainHistory, TrainingDiverged, adam_step,
                      orthogonality_defect, orthogonality_retraction, train)

__version__ = "0.1.0"
