"""Dataset preparation for the neucache replay simulator.

Annotates corpora through a completion API with class-token logit bias,
extracts embeddings, generates calibrated synthetic datasets, and converts
published benchmark releases into the simulator's dataset directory schema.
The simulator is consumed only through that file schema and its CLI.
"""

__version__ = "0.1.0"

from .annotate import AnnotationJob, AnnotationResult, annotate, load_job, render_request
from .assemble import assemble_dataset, load_annotations
from .corpus import CorpusItem, load_corpus
from .embed import HashingEncoder, embed_items, make_encoder
from .fetch import REGISTRY, fetch_benchmark
from .schema import Record, write_dataset_dir
from .synth import SyntheticSpec, generate, generate_to_dir, teacher_stats
from .tokens import ReferenceTokenizer, validate_class_tokens

__all__ = [
    "AnnotationJob",
    "AnnotationResult",
    "CorpusItem",
    "HashingEncoder",
    "REGISTRY",
    "Record",
    "ReferenceTokenizer",
    "SyntheticSpec",
    "annotate",
    "assemble_dataset",
    "embed_items",
    "fetch_benchmark",
    "generate",
    "generate_to_dir",
    "load_annotations",
    "load_corpus",
    "load_job",
    "make_encoder",
    "render_request",
    "teacher_stats",
    "validate_class_tokens",
    "write_dataset_dir",
]
