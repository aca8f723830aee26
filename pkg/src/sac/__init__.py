"""Summary-augmented chunking (SAC) retrieval with document-mismatch evaluation."""
from .chunking import Chunk, ChunkConfig, split, split_corpus
from .config import RunConfig, load_config
from .corpus import BenchmarkCase, Corpus, Document, Span, load_benchmark, load_corpus
from .embedding import EmbeddingProviderConfig, HashEmbedder, RemoteEmbedder, cosine, hash_embed
from .errors import SacError
from .evaluation import char_precision_recall, drm, evaluate_run
from .index import Bm25Params, HybridWeights, Index, SearchResult, build_index, load_index, save_index
from .summarization import StubChatBackend, Summary, SummaryConfig, summarize_corpus, summarize_document
from .synthetic import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "Chunk", "ChunkConfig", "split", "split_corpus", "RunConfig", "load_config",
    "BenchmarkCase", "Corpus", "Document", "Span", "load_benchmark", "load_corpus",
    "EmbeddingProviderConfig", "HashEmbedder", "RemoteEmbedder", "cosine", "hash_embed",
    "SacError", "char_precision_recall", "drm", "evaluate_run",
    "Bm25Params", "HybridWeights", "Index", "SearchResult", "build_index", "load_index", "save_index",
    "StubChatBackend", "Summary", "SummaryConfig", "summarize_corpus", "summarize_document",
    "SyntheticSpec", "generate",
]
