"""Command-line surface: one subcommand per concern, JSONL on stdout.

Exit codes: 0 success, 1 domain error (code and detail on stderr),
2 usage error. Token lists are comma-separated decimals; @path reads
them from a file instead.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import jsonio
from .dtypes import DType
from .errors import TokenForgeError
from .export import ExportSelection
from .format import validate_dataset
from .ingest import ingest_file
from .manager import DatasetManager
from .order import OrderConfig, resolve_sample, resolve_step, save_order
from .sampling import SamplePolicy
from .service import SessionConfig, serve
from .tokenizers import get_tokenizer


def parse_tokens(value: str | None) -> list[int]:
    """Comma/whitespace-separated decimals, or @path indirection."""
    if not value:
        return []
    if value.startswith("@"):
        value = Path(value[1:]).read_text()
    parts = value.replace(",", " ").split()
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise click.UsageError(f"bad token list {value!r}: expected integers") from None


def parse_ranges(value: str | None) -> list[list[int]]:
    """start:end pairs, comma-separated."""
    if not value:
        return []
    out = []
    for part in value.split(","):
        try:
            start, end = part.split(":")
            out.append([int(start), int(end)])
        except ValueError:
            raise click.UsageError(f"bad range {part!r}: expected start:end") from None
    return out


def emit(payload) -> None:
    click.echo(jsonio.dumps(payload))


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TokenForgeError as e:
            click.echo(f"{e.code}: {e.detail}", err=True)
            sys.exit(1)

    return wrapper


dataset_option = click.option(
    "--dataset", "prefix", required=True, envvar="TOKENFORGE_DATASET",
    help="dataset path prefix shared by .bin/.idx (env: TOKENFORGE_DATASET)",
)


def order_options(fn):
    fn = click.option("--epochs", default=1, show_default=True)(fn)
    fn = click.option("--seed", default=0, show_default=True)(fn)
    fn = click.option("--batch-size", default=1, show_default=True)(fn)
    fn = click.option("--seq-len", default=64, show_default=True)(fn)
    return fn


def make_order_config(seq_len, batch_size, seed, epochs) -> OrderConfig:
    return OrderConfig(seed=seed, seq_len=seq_len, batch_size=batch_size, epochs=epochs)


@click.group()
def main():
    """Indexed pretraining dataset toolkit."""


@main.command()
@dataset_option
@guarded
def validate(prefix):
    """Check dataset invariants; prints one JSON line per violation."""
    report = validate_dataset(prefix)
    for entry in report:
        emit(entry)
    if report:
        click.echo(f"dataset invalid: {len(report)} violation(s)", err=True)
        sys.exit(1)


@main.command()
@click.option("--input", "source", required=True, type=click.Path(exists=True))
@click.option("--input-format", type=click.Choice(["jsonl", "csv"]), default=None)
@dataset_option
@click.option("--dtype", default="uint16", show_default=True)
@click.option("--tokenizer", default=None, help="tokenizer name for text records")
@guarded
def ingest(source, input_format, prefix, dtype, tokenizer):
    """Convert a JSONL/CSV corpus into a .bin/.idx dataset."""
    index = ingest_file(
        source, prefix,
        dtype=DType.from_name(dtype),
        tokenizer=get_tokenizer(tokenizer),
        input_format=input_format,
    )
    emit(
        {
            "sequence_count": index.sequence_count,
            "document_count": index.document_count,
            "total_tokens": index.total_tokens,
            "dtype": index.dtype.name,
        }
    )


@main.command()
@dataset_option
@click.option("--kind", type=click.Choice(["sequences", "documents", "batches", "token_range"]), required=True)
@click.option("--ids", default=None, help="comma-separated unit ids (steps for batches)")
@click.option("--ranges", default=None, help="start:end token ranges for token_range")
@click.option("--fields", default=None, help="comma-separated output fields")
@click.option("--format", "fmt", type=click.Choice(["jsonl", "csv"]), default="jsonl", show_default=True)
@click.option("--out", default=None, type=click.Path(), help="output file (default stdout)")
@click.option("--tokenizer", default=None, help="detokenizer name when exporting text")
@order_options
@guarded
def export(prefix, kind, ids, ranges, fields, fmt, out, tokenizer, seq_len, batch_size, seed, epochs):
    """Export a selection of the dataset as JSONL or CSV."""
    manager = DatasetManager(
        prefix, order_config=make_order_config(seq_len, batch_size, seed, epochs),
        detokenizer=tokenizer,
    )
    selection = ExportSelection(
        kind=kind,
        ids_or_ranges=parse_ranges(ranges) if kind == "token_range" else parse_tokens(ids),
        fields=[f.strip() for f in fields.split(",")] if fields else [],
        format=fmt,
    )
    if out:
        with open(out, "w", encoding="utf-8", newline="") as sink:
            n = manager.export(selection, sink)
        click.echo(f"wrote {n} record(s) to {out}", err=True)
    else:
        manager.export(selection, sys.stdout)


@main.group()
def inspect():
    """Read-side views of sequences, documents, and batches."""


@inspect.command("info")
@dataset_option
@click.option("--tokenizer", default=None)
@guarded
def inspect_info(prefix, tokenizer):
    manager = DatasetManager(prefix, tokenizer=tokenizer, detokenizer=tokenizer)
    emit(manager.info())


@inspect.command("sequence")
@dataset_option
@click.option("--id", "seq_id", type=int, required=True)
@click.option("--detokenize", is_flag=True)
@click.option("--tokenizer", default=None)
@guarded
def inspect_sequence(prefix, seq_id, detokenize, tokenizer):
    manager = DatasetManager(prefix, detokenizer=tokenizer)
    emit(manager.sequence_view(seq_id, detokenize=detokenize).to_dict())


@inspect.command("document")
@dataset_option
@click.option("--id", "doc_id", type=int, required=True)
@click.option("--detokenize", is_flag=True)
@click.option("--tokenizer", default=None)
@guarded
def inspect_document(prefix, doc_id, detokenize, tokenizer):
    manager = DatasetManager(prefix, detokenizer=tokenizer)
    emit(manager.document_view(doc_id, detokenize=detokenize))


@inspect.command("batch")
@dataset_option
@click.option("--step", type=int, required=True)
@click.option("--detokenize", is_flag=True)
@click.option("--tokenizer", default=None)
@order_options
@guarded
def inspect_batch(prefix, step, detokenize, tokenizer, seq_len, batch_size, seed, epochs):
    manager = DatasetManager(
        prefix, order_config=make_order_config(seq_len, batch_size, seed, epochs),
        detokenizer=tokenizer,
    )
    emit(manager.batch_view(step, detokenize=detokenize).to_dict())


@main.command()
@dataset_option
@click.option("--kind", type=click.Choice(["random_k", "length_range", "contains_ngram", "stride"]), required=True)
@click.option("--unit", type=click.Choice(["sequence", "sample"]), default="sequence", show_default=True)
@click.option("--k", type=int, default=None)
@click.option("--min-len", type=int, default=None)
@click.option("--max-len", type=int, default=None)
@click.option("--tokens", default=None, help="ngram for contains_ngram")
@click.option("--every", type=int, default=None)
@click.option("--start", type=int, default=0)
@click.option("--policy-seed", type=int, default=0, show_default=True)
@click.option("--limit", type=int, default=None)
@order_options
@guarded
def sample(prefix, kind, unit, k, min_len, max_len, tokens, every, start, policy_seed, limit,
           seq_len, batch_size, seed, epochs):
    """Select sequence or sample ids matching a policy."""
    manager = DatasetManager(prefix, order_config=make_order_config(seq_len, batch_size, seed, epochs))
    policy = SamplePolicy(
        kind=kind, unit=unit, seed=policy_seed, k=k, min_len=min_len, max_len=max_len,
        ngram=parse_tokens(tokens) or None, every=every, start=start,
    )
    emit({"unit": unit, "ids": manager.sample(policy, limit=limit)})


@main.group()
def edit():
    """Mutate the dataset (takes the writer lock)."""


@edit.command("overwrite")
@dataset_option
@click.option("--seq-id", type=int, default=None)
@click.option("--offset", type=int, default=None)
@click.option("--tokens", required=True)
@click.option("--random-positions", type=int, default=None,
              help="apply the payload at this many RNG-drawn (sequence, offset) targets")
@click.option("--seed", type=int, default=0, show_default=True)
@guarded
def edit_overwrite(prefix, seq_id, offset, tokens, random_positions, seed):
    """Length-preserving in-place overwrite."""
    manager = DatasetManager(prefix)
    payload = parse_tokens(tokens)
    if random_positions is not None:
        targets = manager.random_overwrite_positions(len(payload), random_positions, seed)
        for sid, off in targets:
            receipt = manager.overwrite(sid, off, payload)
            emit({"receipt": receipt.to_dict(), "dataset_version": receipt.version_after})
        return
    if seq_id is None or offset is None:
        raise click.UsageError("--seq-id and --offset are required without --random-positions")
    receipt = manager.overwrite(seq_id, offset, payload)
    emit({"receipt": receipt.to_dict(), "dataset_version": receipt.version_after})


@edit.command("splice")
@dataset_option
@click.option("--seq-id", type=int, required=True)
@click.option("--offset", type=int, required=True)
@click.option("--delete-count", type=int, default=0, show_default=True)
@click.option("--insert", default="", help="tokens to insert")
@click.option("--out-prefix", default=None)
@guarded
def edit_splice(prefix, seq_id, offset, delete_count, insert, out_prefix):
    """Length-changing edit streamed into a new dataset."""
    manager = DatasetManager(prefix)
    paths, receipt = manager.splice(seq_id, offset, delete_count, parse_tokens(insert), out_prefix)
    emit(
        {
            "prefix": paths.prefix,
            "bin": str(paths.bin),
            "idx": str(paths.idx),
            "receipt": receipt.to_dict(),
            "dataset_version": receipt.version_after,
        }
    )


@edit.command("inject")
@dataset_option
@click.option("--sample-id", type=int, required=True)
@click.option("--offset", type=int, required=True)
@click.option("--tokens", required=True)
@order_options
@guarded
def edit_inject(prefix, sample_id, offset, tokens, seq_len, batch_size, seed, epochs):
    """Overwrite a token run at a training-sample position."""
    manager = DatasetManager(prefix, order_config=make_order_config(seq_len, batch_size, seed, epochs))
    receipts = manager.inject(sample_id, offset, parse_tokens(tokens))
    emit(
        {
            "receipts": [r.to_dict() for r in receipts],
            "dataset_version": receipts[-1].version_after if receipts else manager.version,
        }
    )


@main.group()
def search():
    """Suffix-array n-gram queries."""


def _search_index(prefix):
    return DatasetManager(prefix).search_index()


@search.command("count")
@dataset_option
@click.option("--tokens", required=True)
@click.option("--within-document", is_flag=True)
@guarded
def search_count(prefix, tokens, within_document):
    emit({"count": _search_index(prefix).count(parse_tokens(tokens), within_document)})


@search.command("contains")
@dataset_option
@click.option("--tokens", required=True)
@click.option("--within-document", is_flag=True)
@guarded
def search_contains(prefix, tokens, within_document):
    emit({"contains": _search_index(prefix).contains(parse_tokens(tokens), within_document)})


@search.command("positions")
@dataset_option
@click.option("--tokens", required=True)
@click.option("--limit", type=int, default=None)
@click.option("--resolve", is_flag=True)
@click.option("--within-document", is_flag=True)
@guarded
def search_positions(prefix, tokens, limit, resolve, within_document):
    emit(
        {
            "positions": _search_index(prefix).positions_of(
                parse_tokens(tokens), limit=limit, resolve=resolve,
                within_document=within_document,
            )
        }
    )


@search.command("next")
@dataset_option
@click.option("--tokens", required=True)
@guarded
def search_next(prefix, tokens):
    emit(_search_index(prefix).next_token_distribution(parse_tokens(tokens)).to_dict())


@search.command("generate")
@dataset_option
@click.option("--prompt", default="")
@click.option("--length", type=int, default=32, show_default=True)
@click.option("--max-context", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@guarded
def search_generate(prefix, prompt, length, max_context, seed):
    emit(
        {
            "tokens": _search_index(prefix).sample_continuation(
                parse_tokens(prompt), length, max_context, seed
            )
        }
    )


@main.group()
def index():
    """Suffix-array index maintenance."""


@index.command("build")
@dataset_option
@guarded
def index_build(prefix):
    sa = DatasetManager(prefix).search_index(rebuild=True)
    emit({"total_tokens": sa.total_tokens, "dataset_version": sa.dataset_version})


@main.group()
def order():
    """Training-order reconstruction."""


@order.command("build")
@dataset_option
@order_options
@guarded
def order_build(prefix, seq_len, batch_size, seed, epochs):
    manager = DatasetManager(prefix)
    training_order = manager.order(make_order_config(seq_len, batch_size, seed, epochs))
    path = save_order(training_order, manager.dataset)
    emit(
        {
            "num_samples": training_order.num_samples,
            "num_steps": training_order.num_steps,
            "dataset_version": training_order.dataset_version,
            "path": str(path),
        }
    )


@order.command("step")
@dataset_option
@click.option("--step", type=int, required=True)
@order_options
@guarded
def order_step(prefix, step, seq_len, batch_size, seed, epochs):
    manager = DatasetManager(prefix)
    training_order = manager.order(make_order_config(seq_len, batch_size, seed, epochs))
    emit({"step": step, "sample_ids": [int(s) for s in resolve_step(training_order, step)]})


@order.command("sample")
@dataset_option
@click.option("--id", "sample_id", type=int, required=True)
@order_options
@guarded
def order_sample(prefix, sample_id, seq_len, batch_size, seed, epochs):
    manager = DatasetManager(prefix)
    training_order = manager.order(make_order_config(seq_len, batch_size, seed, epochs))
    spans = resolve_sample(training_order, manager.dataset, sample_id)
    emit(
        {
            "sample_id": sample_id,
            "spans": [
                {
                    "document_id": s.document_id,
                    "sequence_id": s.sequence_id,
                    "token_offset": s.token_offset,
                    "token_count": s.token_count,
                }
                for s in spans
            ],
        }
    )


@main.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--dataset", "prefix", default=None, envvar="TOKENFORGE_DATASET")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--tokenizer", default=None)
@click.option("--seq-len", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@guarded
def serve_cmd(config_path, prefix, host, port, tokenizer, seq_len, batch_size, seed, epochs):
    """Run the HTTP service (config file < flags < TOKENFORGE_PORT)."""
    if config_path:
        config = SessionConfig.from_file(config_path)
    elif prefix:
        config = SessionConfig(dataset=prefix)
    else:
        raise click.UsageError("either --config or --dataset is required")
    if prefix:
        config.dataset = prefix
    if host:
        config.host = host
    if port:
        config.port = port
    if tokenizer:
        config.tokenizer = tokenizer
        config.detokenizer = tokenizer
    base = config.order
    config.order = OrderConfig(
        seed=base.seed if seed is None else seed,
        seq_len=base.seq_len if seq_len is None else seq_len,
        batch_size=base.batch_size if batch_size is None else batch_size,
        epochs=base.epochs if epochs is None else epochs,
    )
    serve(config)


if __name__ == "__main__":
    main()
