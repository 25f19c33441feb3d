"""Command-line entry points: gen, build, render, psnr, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .geometry import BuildConfig


@click.group()
def main():
    """Octree LOD preprocessing, streaming and rendering for particle data."""


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--points", "n_points", default=100_000, show_default=True)
@click.option("--clusters", "n_clusters", default=8, show_default=True)
@click.option("--snapshots", "n_snapshots", default=2, show_default=True)
@click.option("--box", "box_size", default=100.0, show_default=True)
@click.option("--plummer-scale", default=1.0, show_default=True)
@click.option("--drift", "drift_speed", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def gen(out_dir, n_points, n_clusters, n_snapshots, box_size, plummer_scale, drift_speed, seed):
    """Generate a synthetic multi-snapshot dataset."""
    from .ingest import SynthConfig, gen_synthetic, write_dataset

    cfg = SynthConfig(
        n_points=n_points,
        n_clusters=n_clusters,
        n_snapshots=n_snapshots,
        plummer_scale=plummer_scale,
        box_size=box_size,
        drift_speed=drift_speed,
        seed=seed,
    )
    paths = write_dataset(gen_synthetic(cfg), out_dir)
    click.echo(f"wrote {len(paths)} snapshots to {out_dir}")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--node-capacity", default=16000, show_default=True)
@click.option("--alpha", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-depth", default=20, show_default=True)
@click.option("--workers", default=1, show_default=True)
def build(in_dir, out_dir, node_capacity, alpha, seed, max_depth, workers):
    """Build the LOD dataset from raw snapshots."""
    from .builder import build as run_build
    from .ingest import snapshot_paths

    cfg = BuildConfig(
        node_capacity=node_capacity, density_exponent=alpha, seed=seed, max_depth=max_depth
    )
    summary = run_build(snapshot_paths(in_dir), cfg, out_dir, workers=workers)
    click.echo(
        f"built {summary.intervals} intervals, nodes per interval {summary.node_counts}, "
        f"{summary.bytes_written} block bytes"
    )
    if summary.overfull_leaves or summary.missing_ids or summary.clamped_points:
        click.echo(
            f"warnings: overfull_leaves={summary.overfull_leaves} "
            f"missing_ids={summary.missing_ids} clamped_points={summary.clamped_points}",
            err=True,
        )


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--camera", "camera_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--t", "time", default=0.0, show_default=True)
@click.option("--full", is_flag=True, help="Render every leaf (full stored detail).")
@click.option("--tau", default=2.0, show_default=True)
@click.option("--budget", default=200_000, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def render(dataset_dir, camera_path, time, full, tau, budget, out_path):
    """Render a PFM image (plus a tone-mapped .ppm preview) from a dataset."""
    from .dataset import Dataset
    from .engine import Camera, all_leaves_cut, select_cut
    from .imageio import write_pfm, write_ppm_preview
    from .render import render_cut

    cam = Camera.from_dict(json.loads(Path(camera_path).read_text()))
    with Dataset(dataset_dir) as ds:
        s, alpha = ds.interval_for_time(time)
        if full:
            cut = all_leaves_cut(ds.index(s), s, ds.root_box)
        else:
            cut = select_cut(ds.index(s), s, ds.root_box, cam, tau, budget)
        img = render_cut(ds, cut, cam, alpha)
    write_pfm(img, out_path)
    write_ppm_preview(img, Path(out_path).with_suffix(".ppm"))
    click.echo(f"rendered {cut.total_points} points from {len(cut.entries)} blocks to {out_path}")


@main.command()
@click.argument("image_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("image_b", type=click.Path(exists=True, dir_okay=False))
def psnr(image_a, image_b):
    """Print the PSNR (dB) of image B against reference image A."""
    from .imageio import read_pfm
    from .render import image_psnr

    value = image_psnr(read_pfm(image_a), read_pfm(image_b))
    click.echo(f"{value:.4f}")


@main.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--addr", default="127.0.0.1:8000", show_default=True)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path(file_okay=False))
def serve(dataset_dir, addr, frontend_dir):
    """Serve a built dataset (and optionally the web viewer) over HTTP."""
    from .server import serve as run_serve

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        click.echo(f"invalid --addr {addr!r}, expected HOST:PORT", err=True)
        sys.exit(2)
    run_serve(dataset_dir, host=host, port=int(port), frontend_dir=frontend_dir)


if __name__ == "__main__":
    main()
