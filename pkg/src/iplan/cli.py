"""Command-line entry points: train, generate, repair, evaluate, serve."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import click
import numpy as np

from . import data as data_mod
from . import io as io_mod
from . import metrics as metrics_mod
from .config import AppConfig, load_config, load_models, save_config
from .core import RESOLUTION, Layout, Room, render_layout
from .repair import RepairConfig, RepairProblem, repair as run_repair
from .session import run_auto

VARIANT_NAMES = {"I": "full", "II": "typed", "III": "auto"}


@click.group()
def main() -> None:
    """Step-wise floorplan synthesis pipeline."""


@main.command()
@click.option("--n", type=int, default=20, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth(n: int, out: str, seed: int) -> None:
    """Generate a synthetic corpus for desk-scale runs."""
    rng = np.random.default_rng(seed)
    layouts = data_mod.synth_corpus(n, rng=rng)
    data_mod.save_corpus(layouts, data_mod.SYNTH_REGISTRY, out, seed=seed)
    click.echo(f"wrote {n} layouts to {out}")


@main.group()
def train() -> None:
    """Train one of the pipeline models."""


def _load_training_corpus(corpus_dir: str):
    manifest = data_mod.load_manifest(corpus_dir)
    corpus = data_mod.load_corpus(corpus_dir, manifest)
    return corpus, manifest.registry


@train.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--epochs", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def bcvae(corpus_dir: str, out: str, epochs: int, seed: int) -> None:
    """Train the room-type sampler."""
    from . import typegen

    corpus, registry = _load_training_corpus(corpus_dir)
    cfg = typegen.TypeVaeConfig(epochs=epochs)
    model, trace = typegen.train_type_vae(corpus, registry, cfg, np.random.default_rng(seed))
    typegen.save_checkpoint(model, registry, out)
    click.echo(f"final rec={trace[-1]['rec']:.4f} kl={trace[-1]['kl']:.4f} -> {out}")


@train.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--steps", type=int, default=1500, show_default=True)
@click.option("--width", type=float, default=0.25, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def locator(corpus_dir: str, out: str, steps: int, width: float, seed: int) -> None:
    """Train the room-center locator."""
    from . import locator as locator_mod

    corpus, registry = _load_training_corpus(corpus_dir)
    cfg = locator_mod.LocatorConfig(steps=steps, width_factor=width)

    def report(step: int, loss: float) -> None:
        if step % 50 == 0:
            click.echo(f"step {step}: loss {loss:.1f}")

    net, _ = locator_mod.train_locator(
        corpus, registry, cfg, np.random.default_rng(seed), progress=report
    )
    locator_mod.save_checkpoint(net, registry, out)
    click.echo(f"saved {out}")


@train.command()
@click.option("--corpus", "corpus_dir", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--iterations", type=int, default=300, show_default=True)
@click.option("--warmup", type=int, default=100, show_default=True,
              help="Iterations of box regression only, before the critic joins.")
@click.option("--mask-prefit", type=int, default=200, show_default=True,
              help="Supervised warm-start iterations for the mask net.")
@click.option("--seed", type=int, default=0, show_default=True)
def partitioner(corpus_dir, out, iterations, warmup, mask_prefit, seed) -> None:
    """Train the room-partition generator and critic."""
    from . import partitioner as part_mod

    corpus, registry = _load_training_corpus(corpus_dir)
    cfg = part_mod.PartitionerConfig(
        iterations=iterations, box_warmup_iters=warmup, mask_prefit_iters=mask_prefit
    )

    def report(it: int, record: dict) -> None:
        if it % 20 == 0:
            click.echo(f"iter {it}: box {record.get('box_term', float('nan')):.4f}")

    gen, critic, _ = part_mod.train_partitioner(
        corpus, registry, cfg, np.random.default_rng(seed), progress=report
    )
    part_mod.save_checkpoint(gen, critic, registry, out, cfg.max_rooms)
    click.echo(f"saved {out}")


@main.command()
@click.option("--variant", type=click.Choice(["I", "II", "III"]), required=True)
@click.option("--boundary", "boundary_file", type=click.Path(exists=True), required=True,
              help="iplan-layout/1 file supplying the boundary (and, for I/II, types/centers)")
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--render", "render_file", type=click.Path(), default=None)
def generate(variant, boundary_file, config_file, seed, out, render_file) -> None:
    """Run the pipeline end to end for one boundary."""
    cfg = load_config(config_file)
    models = load_models(cfg)
    source, _ = io_mod.load_layout(boundary_file)
    types = centers = None
    if variant in ("I", "II"):
        types = [room.type_id for room in source.rooms]
    if variant == "I":
        centers = [room.center for room in source.rooms]
    layout, _session = run_auto(
        models, source.boundary, VARIANT_NAMES[variant], seed, types=types, centers=centers
    )
    io_mod.save_layout(layout, cfg.registry, out)
    if render_file:
        io_mod.save_image(render_layout(layout), render_file)
    click.echo(f"generated {layout.n_rooms} rooms -> {out}")


@main.command(name="repair")
@click.option("--in", "in_file", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--trace", "trace_file", type=click.Path(), default=None)
@click.option("--max-iters", type=int, default=500, show_default=True)
def repair_cmd(in_file: str, out: str, trace_file: str | None, max_iters: int) -> None:
    """Geometrically repair the boxes of a layout file."""
    layout, registry = io_mod.load_layout(in_file)
    problem = RepairProblem(
        layout.boundary, np.array([room.box for room in layout.rooms], dtype=np.float64)
    )
    result = run_repair(problem, RepairConfig(max_iters=max_iters))
    rooms = []
    for room, box in zip(layout.rooms, result.boxes):
        top = int(np.clip(round(box[0]), 0, RESOLUTION - 1))
        left = int(np.clip(round(box[1]), 0, RESOLUTION - 1))
        bottom = int(np.clip(round(box[2]), top + 1, RESOLUTION))
        right = int(np.clip(round(box[3]), left + 1, RESOLUTION))
        center = (
            int(np.clip(room.center[0], top, bottom - 1)),
            int(np.clip(room.center[1], left, right - 1)),
        )
        rooms.append(Room(type_id=room.type_id, center=center, box=(top, left, bottom, right)))
    io_mod.save_layout(Layout(boundary=layout.boundary, rooms=tuple(rooms)), registry, out)
    if trace_file:
        with open(trace_file, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "L_cov", "L_int"])
            writer.writerows(result.trace)
    click.echo(
        f"repair: L {result.losses[0]:.6f} -> {result.losses[-1]:.6f} "
        f"in {result.iterations} iterations"
    )


@main.command()
@click.option("--gen", "gen_dir", type=click.Path(exists=True), required=True)
@click.option("--real", "real_dir", type=click.Path(exists=True), required=True)
@click.option("--report", type=click.Path(), required=True)
def evaluate(gen_dir: str, real_dir: str, report: str) -> None:
    """Compute the three distribution metrics between two corpora."""
    gen_corpus = data_mod.load_corpus(gen_dir)
    real_corpus = data_mod.load_corpus(real_dir)
    registry = data_mod.load_manifest(real_dir).registry
    payload = {
        "fid_img": metrics_mod.fid_img(gen_corpus, real_corpus),
        "fid_area": metrics_mod.fid_area(gen_corpus, real_corpus, registry),
        "fid_type": metrics_mod.fid_type(gen_corpus, real_corpus, registry),
        "n_gen": len(gen_corpus),
        "n_real": len(real_corpus),
        "extractor_id": metrics_mod.extractor_id(None),
    }
    Path(report).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(json.dumps(payload, indent=2))


@main.command()
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Static directory with the browser designer build.")
def serve(port: int, host: str, config_file: str, ui_dir: str | None) -> None:
    """Serve the session API (and optionally the designer UI)."""
    import uvicorn

    from .service import create_app, mount_ui

    cfg = load_config(config_file)
    models = load_models(cfg)
    app = create_app(models, session_dir=cfg.session_dir)
    if ui_dir:
        mount_ui(app, ui_dir)
    uvicorn.run(app, host=host, port=port)


@main.command(name="init-config")
@click.option("--out", type=click.Path(), required=True)
@click.option("--model-dir", type=click.Path(), default="models", show_default=True)
def init_config(out: str, model_dir: str) -> None:
    """Write a starter config pointing at a model directory."""
    cfg = AppConfig(
        model_paths={
            "bcvae": str(Path(model_dir) / "bcvae.pt"),
            "locator": str(Path(model_dir) / "locator.pt"),
            "partitioner": str(Path(model_dir) / "partitioner.pt"),
        }
    )
    save_config(cfg, out)
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
