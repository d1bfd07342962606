"""Command-line driver.

Subcommands: build-codebook, quantize, build-index, query, evaluate,
serve. Flags mirror the engine configuration fields and can also be set
through PBSEARCH_-prefixed environment variables. Every command is
deterministic given its inputs and seed.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import codebook as cb
from . import evaluation as ev
from .config import EngineConfig
from .model import (
    ImageBoW,
    load_corpus,
    load_keypoints,
    load_manifest,
    save_keypoints,
    sniff_format,
    validate_corpus,
)
from .search import build_index, load_index, query_topk_images
from .service import create_server
from .similarity import SimilarityConfig


def _opt(name: str, envvar: str, **kwargs):
    return click.option(name, envvar=envvar, show_default=True, **kwargs)


@click.group()
def main() -> None:
    """Profile-based sub-image search."""


@main.command("build-codebook")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
@_opt("--codebook-size", "PBSEARCH_CODEBOOK_SIZE", default=500, type=int)
@_opt("--restarts", "PBSEARCH_RESTARTS", default=10, type=int)
@_opt("--seed", "PBSEARCH_SEED", default=0, type=int)
def build_codebook_cmd(manifest: str, out: str, codebook_size: int, restarts: int, seed: int) -> None:
    """Cluster raw descriptors from MANIFEST into a codebook file."""
    images = load_corpus(manifest, mode="raw")
    if not images:
        raise click.ClickException(f"{manifest}: no images")
    points = np.vstack([img.descriptors for img in images if len(img)])
    try:
        book = cb.build_codebook(points, k=codebook_size, restarts=restarts, base_seed=seed)
    except ValueError as e:
        raise click.ClickException(str(e)) from None
    cb.save_codebook(book, out)
    click.echo(f"codebook: k={book.k} scatter={book.scatter!r} restart={book.seed - seed}")


@main.command("quantize")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.argument("codebook", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out-dir", required=True, type=click.Path(file_okay=False))
def quantize_cmd(manifest: str, codebook: str, out_dir: str) -> None:
    """Map raw descriptor files from MANIFEST to visual-word files."""
    book = cb.load_codebook(codebook)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for iid, path in load_manifest(manifest):
        raw = load_keypoints(path, mode="raw", image_id=iid)
        img = cb.quantize_image(raw, book)
        name = f"{iid}.pbow"
        save_keypoints(img, out / name)
        lines.append(f"{iid} {name}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    click.echo(f"quantized {len(lines)} images into {out}")


@main.command("build-index")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--out", required=True, type=click.Path(dir_okay=False))
@click.option("--codebook", type=click.Path(exists=True, dir_okay=False),
              help="Required when the manifest points at raw descriptor files.")
@_opt("--n0", "PBSEARCH_N0", default=50, type=int)
def build_index_cmd(manifest: str, out: str, codebook: str | None, n0: int) -> None:
    """Build the profile index of a corpus and write it (plus a .kp sidecar)."""
    book = cb.load_codebook(codebook) if codebook else None
    images: list[ImageBoW] = []
    for iid, path in load_manifest(manifest):
        kind = sniff_format(path)
        if kind == "raw":
            if book is None:
                raise click.ClickException(f"{path}: raw file needs --codebook")
            images.append(cb.quantize_image(load_keypoints(path, "raw", image_id=iid), book))
        else:
            images.append(load_keypoints(path, "quantized", image_id=iid))
    if not images:
        raise click.ClickException(f"{manifest}: no images")
    report = validate_corpus(images, images[0].codebook_size)
    if not report.ok:
        raise click.ClickException("corpus validation failed:\n" + report.summary())
    try:
        index = build_index(images, n0=n0)
    except ValueError as e:
        raise click.ClickException(str(e)) from None
    index.save(out)
    click.echo(f"indexed {index.n_images} images, {index.n_profiles} profiles -> {out}")


@main.command("query")
@click.argument("index_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("query_path", type=click.Path(exists=True, dir_okay=False))
@click.option("-k", default=10, show_default=True, type=int)
@click.option("--region", nargs=4, type=float, default=None,
              help="x_min y_min x_max y_max; keeps only query keypoints inside the box.")
@_opt("--lambda", "PBSEARCH_LAMBDA", default=1.0 / 3.0, type=float)
@_opt("--measure", "PBSEARCH_MEASURE", default="jaccard", type=click.Choice(["jaccard", "cosine"]))
def query_cmd(index_path: str, query_path: str, k: int, region, **cfg) -> None:
    """Rank indexed images against a query keypoint file.

    Prints one line per result: rank, image id, score, match center x, y.
    """
    index = load_index(index_path, similarity=SimilarityConfig(lam=cfg["lambda"], measure=cfg["measure"]))
    if index.coords is None:
        raise click.ClickException(f"{index_path}.kp sidecar missing; rebuild the index")
    query = load_keypoints(query_path, mode="quantized")
    if region:
        x0, y0, x1, y1 = region
        if not (x0 < x1 and y0 < y1):
            raise click.ClickException("degenerate region box")
        inside = (
            (query.coords[:, 0] >= x0)
            & (query.coords[:, 0] <= x1)
            & (query.coords[:, 1] >= y0)
            & (query.coords[:, 1] <= y1)
        )
        if int(inside.sum()) < 2:
            raise click.ClickException("region contains fewer than 2 keypoints")
        query = ImageBoW(query.image_id, query.coords[inside], query.words[inside], query.codebook_size)
    try:
        results = query_topk_images(query, index, k=k)
    except ValueError as e:
        raise click.ClickException(str(e)) from None
    for rank, r in enumerate(results, start=1):
        mx, my = index.center_coords(r.image_id, r.db_center_index)
        click.echo(f"{rank} {r.image_id} {r.score:.6f} {mx!r} {my!r}")


@main.command("evaluate")
@click.option("-o", "--out", default="report", show_default=True,
              help="Output prefix; writes <out>.txt and <out>.csv.")
@_opt("--seed", "PBSEARCH_SEED", default=0, type=int)
@_opt("--images", "PBSEARCH_IMAGES", default=1000, type=int)
@_opt("--queries", "PBSEARCH_QUERIES", default=52, type=int)
@_opt("--hosts-per-query", "PBSEARCH_HOSTS_PER_QUERY", default=12, type=int)
@_opt("--confusers-per-query", "PBSEARCH_CONFUSERS_PER_QUERY", default=6, type=int)
@_opt("--codebook-size", "PBSEARCH_CODEBOOK_SIZE", default=500, type=int)
@_opt("--n0", "PBSEARCH_N0", default=50, type=int)
@_opt("--lambda", "PBSEARCH_LAMBDA", default=1.0 / 3.0, type=float)
@_opt("--measure", "PBSEARCH_MEASURE", default="jaccard", type=click.Choice(["jaccard", "cosine"]))
def evaluate_cmd(out: str, seed: int, images: int, queries: int, hosts_per_query: int,
                 confusers_per_query: int, codebook_size: int, n0: int, **cfg) -> None:
    """Generate the planted synthetic corpus, run all methods, write reports."""
    params = ev.CorpusParams(
        n_images=images,
        n_queries=queries,
        hosts_per_query=hosts_per_query,
        confusers_per_query=confusers_per_query,
        codebook_size=codebook_size,
    )
    config = EngineConfig(n0=n0, lam=cfg["lambda"], measure=cfg["measure"],
                          codebook_size=codebook_size, seed=seed)
    try:
        corpus, query_images, gt = ev.make_planted_corpus(seed, params)
        report = ev.run_report(corpus, query_images, gt, config)
    except (ValueError, RuntimeError) as e:
        raise click.ClickException(f"evaluation failed (seed={seed}): {e}") from None
    txt = Path(f"{out}.txt")
    csv = Path(f"{out}.csv")
    txt.write_text(report.table(), encoding="utf-8")
    csv.write_text("\n".join(report.csv_lines()) + "\n", encoding="utf-8")
    click.echo(report.table())
    click.echo(f"wrote {txt} and {csv}")


@main.command("serve")
@click.argument("index_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--bind", default="127.0.0.1:8080", show_default=True,
              help="host:port to listen on.")
@click.option("--ui-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Optionally serve a static UI from this directory at /.")
@_opt("--lambda", "PBSEARCH_LAMBDA", default=1.0 / 3.0, type=float)
@_opt("--measure", "PBSEARCH_MEASURE", default="jaccard", type=click.Choice(["jaccard", "cosine"]))
def serve_cmd(index_path: str, bind: str, ui_dir: str | None, **cfg) -> None:
    """Serve the HTTP query API over an index file."""
    host, _, port_s = bind.rpartition(":")
    try:
        port = int(port_s)
    except ValueError:
        raise click.ClickException(f"bad --bind {bind!r}") from None
    index = load_index(index_path, similarity=SimilarityConfig(lam=cfg["lambda"], measure=cfg["measure"]))
    try:
        server = create_server(index, host=host or "127.0.0.1", port=port, ui_dir=ui_dir)
    except ValueError as e:
        raise click.ClickException(str(e)) from None
    click.echo(f"serving {index.n_images} images on http://{server.server_address[0]}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


if __name__ == "__main__":
    main(sys.argv[1:])
