"""Toolkit for Megatron-style indexed pretraining datasets (.bin/.idx):
create, inspect, sample, edit, search, and export without re-tokenizing."""

from .dtypes import DType, choose_dtype
from .editing import EditReceipt, inject_into_sample, overwrite_sequence, splice_sequence
from .errors import TokenForgeError
from .export import ExportSelection, export
from .format import (
    Dataset,
    DatasetIndex,
    DatasetWriter,
    TokenStore,
    build_dataset,
    parse_index,
    validate_dataset,
)
from .ingest import IngestRecord, ingest, ingest_file
from .manager import DatasetManager
from .order import (
    OrderConfig,
    SampleSpan,
    TrainingOrder,
    build_order,
    resolve_sample,
    resolve_step,
)
from .paths import DatasetPaths
from .rng import SplitMix64, rng_next, shuffle_in_place
from .sampling import SamplePolicy, sample_dataset
from .search import NextTokenDistribution, SuffixArrayIndex, build_index
from .service import SessionConfig, create_app, serve
from .tokenizers import byte_detokenize, byte_tokenize

__version__ = "0.1.0"

__all__ = [
    "DType",
    "choose_dtype",
    "EditReceipt",
    "inject_into_sample",
    "overwrite_sequence",
    "splice_sequence",
    "TokenForgeError",
    "ExportSelection",
    "export",
    "Dataset",
    "DatasetIndex",
    "DatasetWriter",
    "TokenStore",
    "build_dataset",
    "parse_index",
    "validate_dataset",
    "IngestRecord",
    "ingest",
    "ingest_file",
    "DatasetManager",
    "OrderConfig",
    "SampleSpan",
    "TrainingOrder",
    "build_order",
    "resolve_sample",
    "resolve_step",
    "DatasetPaths",
    "SplitMix64",
    "rng_next",
    "shuffle_in_place",
    "SamplePolicy",
    "sample_dataset",
    "NextTokenDistribution",
    "SuffixArrayIndex",
    "build_index",
    "SessionConfig",
    "create_app",
    "serve",
    "byte_detokenize",
    "byte_tokenize",
    "__version__",
]
