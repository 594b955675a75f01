"""Operator commands: ingest, serve, one-shot searches, corpus generation.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime error.
"""

import json
from pathlib import Path

import click

from .catalog import BundleError, IngestError, ingest_corpus, load_bundle
from .corpus_gen import FAMILIES, GenSpec, generate_corpus
from .labels import HttpLabelProvider, LabelConfigError, StubLabelProvider
from .meshes import MeshError
from .query_engine import (
    QueryError,
    parse_sketch_query,
    search_sketch,
    search_text_endpoint,
)


class DataError(click.ClickException):
    exit_code = 3


class RuntimeFailure(click.ClickException):
    exit_code = 4


def _load_index(index_dir: str):
    try:
        return load_bundle(index_dir)
    except BundleError as exc:
        raise DataError(str(exc)) from exc


@click.group()
def main():
    """Search engine for repositories of 3D-printable models."""


@main.command()
@click.argument("corpus", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path),
              help="Index directory to write.")
def ingest(corpus: Path, out_dir: Path):
    """Build a search index from a corpus directory."""
    try:
        ingest_corpus(corpus, out_dir)
    except (IngestError, MeshError, OSError) as exc:
        raise DataError(str(exc)) from exc
    report = json.loads((out_dir / "ingest_report.json").read_text())
    click.echo("{ingested} ingested, {with_spatial} spatial, "
               "{text_only} text-only".format(**report))
    if report["skipped"]:
        click.echo(f"{report['skipped']} skipped", err=True)
        for entry in report["errors"]:
            click.echo(f"  {entry['id']}: {entry['reason']}", err=True)


@main.command()
@click.option("--index", "index_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--labels-provider", type=click.Choice(["stub", "http"]),
              default="stub", show_default=True)
@click.option("--labels-endpoint", default=None,
              help="Label service URL (required with --labels-provider http).")
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Origin allowed to call the API; repeatable.")
def serve(index_dir, port, host, labels_provider, labels_endpoint, cors_origins):
    """Serve the REST API over an existing index."""
    from .service import ServiceConfig, create_app

    if labels_provider == "http":
        if not labels_endpoint:
            raise click.UsageError(
                "--labels-endpoint is required with --labels-provider http")
        try:
            provider = HttpLabelProvider(labels_endpoint)
        except LabelConfigError as exc:
            raise RuntimeFailure(str(exc)) from exc
    else:
        provider = StubLabelProvider()

    bundle = _load_index(index_dir)
    config = ServiceConfig(cors_origins=tuple(cors_origins),
                           label_provider=provider)
    app = create_app(bundle, config)
    import uvicorn

    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except OSError as exc:
        raise RuntimeFailure(str(exc)) from exc


@main.command("search-text")
@click.option("--index", "index_dir", required=True,
              type=click.Path(path_type=Path))
@click.argument("term")
@click.option("--limit", default=24, show_default=True)
def search_text_cmd(index_dir, term, limit):
    """Rank models against a text query."""
    bundle = _load_index(index_dir)
    try:
        results = search_text_endpoint(term, limit, 0, bundle)
    except QueryError as exc:
        raise DataError(str(exc)) from exc
    for res in results:
        record = bundle.record(res.artifact_id)
        click.echo(f"{res.rank:>3}  {res.artifact_id}  "
                   f"{res.text_score:.4f}  {record.name}")


@main.command("search-sketch")
@click.option("--index", "index_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--sketch", "sketch_file", required=True,
              type=click.Path(path_type=Path))
@click.option("--term", default=None, help="Optional text pre-filter.")
@click.option("--json", "as_json", is_flag=True,
              help="Emit the API result schema instead of a table.")
def search_sketch_cmd(index_dir, sketch_file, term, as_json):
    """Rank models against a sketch file in the wire format."""
    bundle = _load_index(index_dir)
    try:
        raw = Path(sketch_file).read_bytes()
    except OSError as exc:
        raise DataError(str(exc)) from exc
    try:
        query = parse_sketch_query(raw)
        if term is not None:
            query.term = term
        results = search_sketch(query, bundle)
    except QueryError as exc:
        raise DataError(f"bad sketch: {exc}") from exc

    if as_json:
        from .service import result_item

        click.echo(json.dumps([result_item(r, bundle) for r in results],
                              indent=2))
        return
    click.echo(f"{'rank':>4}  {'id':<24} {'name':<28} {'avg':>7} "
               f"{'sketch':>7} {'model':>7} {'scale':>10}")
    for res in results:
        record = bundle.record(res.artifact_id)
        m = res.match
        click.echo(f"{res.rank:>4}  {res.artifact_id:<24} {record.name:<28.28}"
                   f" {m.avg:>7.4f} {m.sketch_norm:>7.4f} {m.model_norm:>7.4f}"
                   f" {res.suggested_scale:>10.5g}")


@main.command("gen-corpus")
@click.option("--out", "out_dir", required=True,
              type=click.Path(path_type=Path))
@click.option("--n", "count", default=50, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--families", default=None,
              help=f"Comma-separated subset of: {', '.join(FAMILIES)}.")
def gen_corpus_cmd(out_dir, count, seed, families):
    """Write a seeded procedural corpus of parametric models."""
    chosen = FAMILIES
    if families is not None:
        chosen = tuple(f.strip() for f in families.split(",") if f.strip())
    try:
        spec = GenSpec(out_dir=out_dir, count=count, seed=seed,
                       families=chosen)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    models = generate_corpus(spec)
    click.echo(f"generated {len(models)} models under {out_dir}")


if __name__ == "__main__":
    main()
