"""divergauge: diversity-gap measurement and conformative decoding toolkit."""

__version__ = "0.1.0"

from .decoding import (
    DecodeConfig,
    GenerationResult,
    LogProbVector,
    ValidSet,
    conformative_mix,
    generate_sequence,
    sample_token,
    truncate_nucleus,
    truncate_topk,
)
from .features import (
    EmbeddingMatrix,
    NGramProfile,
    SimilarityMatrix,
    embedding_kernel,
    hash_embeddings,
    ngram_kernel,
    ngram_profile,
    read_embeddings,
    tokenize,
    write_embeddings,
)
from .metrics import (
    MauveLiteConfig,
    MetricValue,
    PRResult,
    TTestResult,
    improved_precision_recall,
    mauve_lite,
    paired_ttest_one_tailed,
    truncated_entropy,
    vendi_score,
)
from .numerics import PointSet, Spectrum, SymMatrix, covariance_spectrum, kmeans, knn_radii, sym_eigendecompose
from .toylm import NGramLM, SharpenSpec, ToyLMProvider, sharpen_lm, train_ngram_lm
