"""HTTP facade: every library operation behind one /api/v1 endpoint.

All responses are JSON rendered by the shared serializer, so CLI and
service payloads are byte-identical. Domain errors map to 4xx bodies of
{"error", "detail"}; out-of-range ids on GET resources are 404s. Reads run
concurrently; mutations are serialized through one writer gate that also
holds reads off during in-place overwrites (no torn reads). Every response
carries an X-Dataset-Version header so clients can spot concurrent edits.
"""

from __future__ import annotations

import io
import json
import os
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from pydantic import BaseModel

from . import jsonio
from .errors import (
    BindFailure,
    DatasetInvalid,
    DocOutOfRange,
    PolicyInvalid,
    SampleOutOfRange,
    SeqOutOfRange,
    StepOutOfRange,
    TokenForgeError,
)
from .export import ExportSelection
from .format import validate_dataset
from .manager import DatasetManager
from .order import OrderConfig
from .sampling import DECLARATIVE_KINDS, SamplePolicy

_NOT_FOUND = (SeqOutOfRange, DocOutOfRange, StepOutOfRange, SampleOutOfRange)


@dataclass
class SessionConfig:
    dataset: str
    order: OrderConfig = field(default_factory=lambda: OrderConfig(seed=0, seq_len=64, batch_size=1))
    tokenizer: str | None = None
    detokenizer: str | None = None
    host: str = "127.0.0.1"
    port: int = 8321

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise DatasetInvalid(f"port {self.port} outside [1, 65535]")

    @classmethod
    def from_file(cls, path) -> "SessionConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        order = raw.pop("order", None)
        cfg = cls(**raw)
        if order:
            cfg.order = OrderConfig(**order)
        return cfg


class _Gate:
    """Many readers or one writer; writers block new readers while active."""

    def __init__(self):
        self._cond = threading.Condition()
        self._readers = 0
        self._writing = False

    def read(self):
        return _Held(self, write=False)

    def write(self):
        return _Held(self, write=True)

    def _acquire(self, write: bool):
        with self._cond:
            if write:
                while self._writing or self._readers:
                    self._cond.wait()
                self._writing = True
            else:
                while self._writing:
                    self._cond.wait()
                self._readers += 1

    def _release(self, write: bool):
        with self._cond:
            if write:
                self._writing = False
            else:
                self._readers -= 1
            self._cond.notify_all()


class _Held:
    def __init__(self, gate: _Gate, write: bool):
        self._gate = gate
        self._write = write

    def __enter__(self):
        self._gate._acquire(self._write)

    def __exit__(self, *exc):
        self._gate._release(self._write)


class TokensBody(BaseModel):
    tokens: list[int]
    within_document: bool = False


class PositionsBody(TokensBody):
    limit: int | None = None
    resolve: bool = False


class GenerateBody(BaseModel):
    prompt: list[int] = []
    length: int = 32
    max_context: int = 4
    seed: int = 0


class OverwriteBody(BaseModel):
    seq_id: int
    offset: int
    tokens: list[int]


class SpliceBody(BaseModel):
    seq_id: int
    offset: int
    delete_count: int
    insert_tokens: list[int]
    out_prefix: str | None = None


class InjectBody(BaseModel):
    sample_id: int
    offset_in_sample: int
    tokens: list[int]
    batch_size: int | None = None
    seq_len: int | None = None
    seed: int | None = None
    epochs: int | None = None


class SampleBody(BaseModel):
    kind: str
    unit: str = "sequence"
    seed: int = 0
    k: int | None = None
    min_len: int | None = None
    max_len: int | None = None
    ngram: list[int] | None = None
    every: int | None = None
    start: int = 0
    limit: int | None = None
    batch_size: int | None = None
    seq_len: int | None = None
    epochs: int | None = None


class ExportBody(BaseModel):
    kind: str
    ids: list[int] | None = None
    ranges: list[list[int]] | None = None
    fields: list[str] = []
    format: str = "jsonl"
    out_path: str | None = None
    batch_size: int | None = None
    seq_len: int | None = None
    seed: int | None = None
    epochs: int | None = None


class SwitchBody(BaseModel):
    prefix: str


def _merged_order(cfg: OrderConfig, seed=None, seq_len=None, batch_size=None, epochs=None) -> OrderConfig:
    return OrderConfig(
        seed=cfg.seed if seed is None else seed,
        seq_len=cfg.seq_len if seq_len is None else seq_len,
        batch_size=cfg.batch_size if batch_size is None else batch_size,
        epochs=cfg.epochs if epochs is None else epochs,
    )


def create_app(config: SessionConfig) -> FastAPI:
    report = validate_dataset(config.dataset)
    if report:
        raise DatasetInvalid(f"{config.dataset}: {report[0]['check']}: {report[0]['detail']}")
    app = FastAPI(title="tokenforge", version="1")
    state = {
        "manager": DatasetManager(
            config.dataset,
            order_config=config.order,
            tokenizer=config.tokenizer,
            detokenizer=config.detokenizer,
        ),
        "config": config,
    }
    gate = _Gate()

    def manager() -> DatasetManager:
        return state["manager"]

    def reply(payload) -> Response:
        return Response(
            content=jsonio.dumps(payload),
            media_type="application/json",
            headers={"X-Dataset-Version": str(manager().version)},
        )

    @app.exception_handler(TokenForgeError)
    def _domain_error(request: Request, exc: TokenForgeError):
        status = 404 if request.method == "GET" and isinstance(exc, _NOT_FOUND) else 400
        return Response(
            content=jsonio.dumps({"error": exc.code, "detail": exc.detail}),
            status_code=status,
            media_type="application/json",
        )

    @app.get("/api/v1/dataset/info")
    def dataset_info():
        with gate.read():
            return reply(manager().info())

    @app.get("/api/v1/sequences/{seq_id}")
    def sequence(seq_id: int, detokenize: bool = False):
        with gate.read():
            return reply(manager().sequence_view(seq_id, detokenize=detokenize).to_dict())

    @app.get("/api/v1/documents/{doc_id}")
    def document(doc_id: int, detokenize: bool = False):
        with gate.read():
            return reply(manager().document_view(doc_id, detokenize=detokenize))

    @app.get("/api/v1/batches/{step}")
    def batch(
        step: int,
        batch_size: int | None = None,
        seq_len: int | None = None,
        seed: int | None = None,
        epochs: int | None = None,
        detokenize: bool = False,
    ):
        with gate.read():
            m = manager()
            cfg = _merged_order(m.order_config, seed, seq_len, batch_size, epochs)
            return reply(m.batch_view(step, config=cfg, detokenize=detokenize).to_dict())

    @app.post("/api/v1/sample")
    def sample(body: SampleBody):
        with gate.read():
            if body.kind not in DECLARATIVE_KINDS:
                raise PolicyInvalid(
                    f"policy kind {body.kind!r} is not available over the service"
                )
            m = manager()
            policy = SamplePolicy(
                kind=body.kind, unit=body.unit, seed=body.seed, k=body.k,
                min_len=body.min_len, max_len=body.max_len, ngram=body.ngram,
                every=body.every, start=body.start,
            )
            # body.seed seeds the policy; the order keeps the session seed
            cfg = _merged_order(m.order_config, None, body.seq_len, body.batch_size, body.epochs)
            return reply({"unit": policy.unit, "ids": m.sample(policy, limit=body.limit, config=cfg)})

    @app.post("/api/v1/search/count")
    def search_count(body: TokensBody):
        with gate.read():
            return reply(
                {"count": manager().search_index().count(body.tokens, body.within_document)}
            )

    @app.post("/api/v1/search/contains")
    def search_contains(body: TokensBody):
        with gate.read():
            return reply(
                {"contains": manager().search_index().contains(body.tokens, body.within_document)}
            )

    @app.post("/api/v1/search/positions")
    def search_positions(body: PositionsBody):
        with gate.read():
            return reply(
                {
                    "positions": manager()
                    .search_index()
                    .positions_of(
                        body.tokens, limit=body.limit, resolve=body.resolve,
                        within_document=body.within_document,
                    )
                }
            )

    @app.post("/api/v1/search/next")
    def search_next(body: TokensBody):
        with gate.read():
            return reply(manager().search_index().next_token_distribution(body.tokens).to_dict())

    @app.post("/api/v1/search/generate")
    def search_generate(body: GenerateBody):
        with gate.read():
            return reply(
                {
                    "tokens": manager()
                    .search_index()
                    .sample_continuation(body.prompt, body.length, body.max_context, body.seed)
                }
            )

    @app.post("/api/v1/index/build")
    def index_build():
        with gate.write():
            m = manager()
            index = m.search_index(rebuild=True)
            return reply(
                {"total_tokens": index.total_tokens, "dataset_version": index.dataset_version}
            )

    @app.post("/api/v1/edits/overwrite")
    def edit_overwrite(body: OverwriteBody):
        with gate.write():
            receipt = manager().overwrite(body.seq_id, body.offset, body.tokens)
            return reply({"receipt": receipt.to_dict(), "dataset_version": receipt.version_after})

    @app.post("/api/v1/edits/splice")
    def edit_splice(body: SpliceBody):
        with gate.write():
            paths, receipt = manager().splice(
                body.seq_id, body.offset, body.delete_count, body.insert_tokens, body.out_prefix
            )
            return reply(
                {
                    "prefix": paths.prefix,
                    "bin": str(paths.bin),
                    "idx": str(paths.idx),
                    "receipt": receipt.to_dict(),
                    "dataset_version": receipt.version_after,
                }
            )

    @app.post("/api/v1/edits/inject")
    def edit_inject(body: InjectBody):
        with gate.write():
            m = manager()
            cfg = _merged_order(m.order_config, body.seed, body.seq_len, body.batch_size, body.epochs)
            receipts = m.inject(body.sample_id, body.offset_in_sample, body.tokens, config=cfg)
            return reply(
                {
                    "receipts": [r.to_dict() for r in receipts],
                    "dataset_version": receipts[-1].version_after if receipts else m.version,
                }
            )

    @app.post("/api/v1/export")
    def export_endpoint(body: ExportBody):
        with gate.read():
            m = manager()
            ids_or_ranges = body.ranges if body.kind == "token_range" else (body.ids or [])
            selection = ExportSelection(
                kind=body.kind, ids_or_ranges=ids_or_ranges or [],
                fields=list(body.fields), format=body.format,
            )
            cfg = _merged_order(m.order_config, body.seed, body.seq_len, body.batch_size, body.epochs)
            if body.out_path:
                with open(body.out_path, "w", encoding="utf-8", newline="") as sink:
                    n = m.export(selection, sink, config=cfg)
                return reply({"records_written": n, "path": body.out_path})
            sink = io.StringIO()
            n = m.export(selection, sink, config=cfg)
            return reply({"records_written": n, "data": sink.getvalue()})

    @app.post("/api/v1/dataset/switch")
    def dataset_switch(body: SwitchBody):
        with gate.write():
            report = validate_dataset(body.prefix)
            if report:
                raise DatasetInvalid(
                    f"{body.prefix}: {report[0]['check']}: {report[0]['detail']}"
                )
            old = state["config"]
            state["manager"] = DatasetManager(
                body.prefix,
                order_config=old.order,
                tokenizer=old.tokenizer,
                detokenizer=old.detokenizer,
            )
            return reply(manager().info())

    return app


def serve(config: SessionConfig) -> None:
    """Run the service until interrupted; TOKENFORGE_PORT overrides the port."""
    import uvicorn

    port = int(os.environ.get("TOKENFORGE_PORT", config.port))
    if not 1 <= port <= 65535:
        raise DatasetInvalid(f"port {port} outside [1, 65535]")
    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=port, log_level="warning")
    except (OSError, SystemExit) as e:
        raise BindFailure(f"could not serve on {config.host}:{port}: {e}") from e
