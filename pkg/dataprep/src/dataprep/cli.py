"""Command-line entry point for dataset preparation.

Subcommands:

  annotate   run (or resume) an annotation job over a corpus
  embed      compute embeddings for a corpus
  assemble   join annotations + encoders into a simulator dataset directory
  synth      generate a synthetic dataset with a calibrated noisy teacher
  fetch      download and convert a registered benchmark release
  templates  list the bundled annotation job templates

Exit codes: 0 success, 1 invalid input/config, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import sys

import yaml

from .annotate import AnnotationError, annotate, load_job
from .assemble import AssembleError, assemble_dataset, load_annotations
from .client import ClientError, HttpCompletionClient
from .corpus import CorpusError, load_corpus
from .embed import EmbeddingError, embed_items, make_encoder, write_embeddings
from .fetch import REGISTRY, ChecksumError, SchemaDriftError, fetch_benchmark
from .synth import SynthError, SyntheticSpec, generate_to_dir
from .tokens import TokenizerError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


def template_path(name: str):
    return importlib.resources.files("dataprep") / "templates" / f"{name}.yaml"


def _load_job_arg(job_arg: str):
    candidate = template_path(job_arg)
    if candidate.is_file():
        return load_job(str(candidate))
    return load_job(job_arg)


def _cmd_annotate(args) -> int:
    corpus = load_corpus(args.corpus)
    job = _load_job_arg(args.job)
    client = HttpCompletionClient()
    result = annotate(corpus, job, client, args.out)
    print(f"completed {result.completed} items "
          f"({result.skipped_existing} already done, {len(result.pending)} pending)")
    print(f"spent {result.spent:g}; wrote {result.output_path}")
    return EXIT_OK if not result.pending else EXIT_RUNTIME


def _cmd_embed(args) -> int:
    corpus = load_corpus(args.corpus)
    encoder = make_encoder(args.encoder)
    embeddings = embed_items([(c.id, c.text) for c in corpus], encoder,
                             unit_norm=args.unit_norm)
    write_embeddings(embeddings, encoder.id, args.out)
    print(f"wrote {len(embeddings)} embeddings ({encoder.id}, dim={encoder.dim}) to {args.out}")
    return EXIT_OK


def _cmd_assemble(args) -> int:
    annotations = load_annotations(args.annotations)
    job = _load_job_arg(args.job)
    assemble_dataset(
        annotations,
        name=args.name or job.task,
        class_names=list(job.class_names),
        out_dir=args.out,
        feature_encoder=make_encoder(args.feature_encoder),
        embedding_encoder=make_encoder(args.embedding_encoder)
        if args.embedding_encoder else None,
        split_ratio=args.split_ratio,
        test_count=args.test_count,
        split_seed=args.split_seed,
    )
    print(f"wrote dataset to {args.out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise SynthError(f"{args.spec}: spec must be a mapping")
    if "class_names" in doc:
        doc["class_names"] = tuple(str(c) for c in doc["class_names"])
    elif "num_classes" in doc:
        doc["class_names"] = tuple(f"class_{i}" for i in range(doc.pop("num_classes")))
    try:
        spec = SyntheticSpec(**doc)
    except TypeError as exc:
        raise SynthError(f"{args.spec}: {exc}") from exc
    generate_to_dir(spec, args.out)
    print(f"wrote synthetic dataset to {args.out}")
    return EXIT_OK


def _cmd_fetch(args) -> int:
    fetch_benchmark(
        args.name,
        args.out,
        feature_encoder=make_encoder(args.feature_encoder),
        embedding_encoder=make_encoder(args.embedding_encoder)
        if args.embedding_encoder else None,
    )
    print(f"wrote benchmark {args.name} to {args.out}")
    return EXIT_OK


def _cmd_templates(_args) -> int:
    for name in sorted(REGISTRY):
        path = template_path(name)
        marker = "bundled" if path.is_file() else "missing"
        print(f"{name}: {marker}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neucache-dataprep",
        description="Produce datasets for the neucache replay simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("annotate", help="annotate a corpus via the completion API")
    p.add_argument("--corpus", required=True, help="corpus JSONL (id/text/gold)")
    p.add_argument("--job", required=True,
                   help="job spec YAML, or a bundled template name (e.g. isear)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("embed", help="compute embeddings for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--encoder", default="hashing:32",
                   help="hashing[:dim] | sentence-transformers:<model>")
    p.add_argument("--unit-norm", action="store_true")
    p.add_argument("--out", required=True, help="embeddings JSONL path")
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("assemble", help="build a dataset directory from annotations")
    p.add_argument("--annotations", required=True, help="annotations.jsonl from `annotate`")
    p.add_argument("--job", required=True, help="job spec (for class names)")
    p.add_argument("--name", help="dataset name (default: job task)")
    p.add_argument("--feature-encoder", default="hashing:32")
    p.add_argument("--embedding-encoder", help="default: same as features")
    p.add_argument("--split-ratio", type=float, default=0.8)
    p.add_argument("--test-count", type=int, help="fixed test size overriding the ratio")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="YAML spec file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("fetch", help="download and convert a benchmark release")
    p.add_argument("--name", required=True, choices=sorted(REGISTRY))
    p.add_argument("--feature-encoder", default="hashing:32")
    p.add_argument("--embedding-encoder")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fetch)

    p = sub.add_parser("templates", help="list bundled job templates")
    p.set_defaults(func=_cmd_templates)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (AnnotationError, AssembleError, CorpusError, EmbeddingError,
            SynthError, TokenizerError, ChecksumError, SchemaDriftError,
            KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ClientError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - unexpected failure surface
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
