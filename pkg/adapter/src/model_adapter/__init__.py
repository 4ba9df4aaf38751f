"""Model adapter: embeddings, incipit truncation, and logit serving for divergauge."""

__version__ = "0.1.0"

from .dgem import read_dgem, write_dgem
from .embed import model_embed, stub_embed
from .encodings import count_and_truncate_incipit
from .serve import HFBackend, StubBackend, TableBackend, serve
