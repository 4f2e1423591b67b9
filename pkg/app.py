"""
Command line interface for the clumped nuclei splitter

Komutlar:
- segment    : görüntü (veya dizin) böl, etiket maskesi + teşhis çıktıları yaz
- synth      : sentetik kümelenmiş çekirdek görüntüsü + ground truth üret
- evaluate   : tahmin ve ground truth dizinlerini karşılaştır, CSV yaz
- benchmark  : tohumlu sentetik korpus üzerinde uçtan uca ölçüm
- init-config: varsayılan konfigürasyon dosyasını yaz

Çıkış kodları: 0 başarı, 1 kullanım hatası, 2 işleme hatası.
"""

import asyncio
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

# Add project root to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config.settings import PipelineConfig, load_config, save_config
from pipeline.batch import batch_evaluate, evaluate_directories, list_images, run_benchmark, run_concurrently
from pipeline.orchestrator import json_safe, run_pipeline, setup_logging
from services.debug_export import (draw_ellipse_overlay, draw_label_overlay, draw_paths_overlay,
                                   export_contour_csvs, export_pairs_json, export_paths_json, segment_outputs)
from services.image_io import load_image, save_image_png, save_label_png, save_mask_png
from services.synthetic import SyntheticSpec, generate_synthetic_clump, synthetic_corpus
from utils.errors import ConfigError, SegmentationError, SyntheticSpecError
from utils.image_prep import BinaryMask

logger = logging.getLogger("cli")
console = Console()

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2


class SplitterCLI(click.Group):
    """click group that maps every failure onto the 0/1/2 exit codes"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                              standalone_mode=False, **extra)
            code = rv if isinstance(rv, int) else EXIT_OK
        except click.UsageError as e:
            e.show()
            code = EXIT_USAGE
        except click.ClickException as e:
            e.show()
            code = EXIT_USAGE
        except click.Abort:
            console.print("[red]Aborted![/red]")
            code = EXIT_USAGE
        except ConfigError as e:
            console.print(f"[red]❌ Configuration error:[/red] {e}")
            code = EXIT_USAGE
        except (SegmentationError, OSError) as e:
            console.print(f"[red]❌ Processing failed:[/red] {e}")
            code = EXIT_FAILURE
        if standalone_mode:
            sys.exit(code)
        return code


def _config(path: Optional[str], workers: Optional[int] = None) -> PipelineConfig:
    cfg = load_config(path)
    if workers is not None:
        cfg = cfg.model_copy(update={"workers": workers})
    return cfg


def _segment_one(image_path: Path, cfg: PipelineConfig, out_dir: Path, flags: Dict[str, bool]) -> Dict[str, Any]:
    started = time.perf_counter()
    img = load_image(image_path)
    result = run_pipeline(img, cfg)
    files = segment_outputs(out_dir, image_path.stem)

    save_label_png(files["labels"], result.labels)
    save_mask_png(files["mask"], BinaryMask(result.labels.labels > 0))
    diagnostics = {"input": str(image_path), "config": cfg.model_dump(), **result.diagnostics}
    files["diagnostics"].write_text(json.dumps(json_safe(diagnostics), indent=2), encoding="utf-8")

    context = result.context
    if flags["overlay"]:
        draw_label_overlay(files["overlay"], img, result.labels)
    if flags["debug_contours"]:
        export_contour_csvs(files["contours"], context["geometry"].contours, context["profiles"])
    if flags["debug_pairs"]:
        export_pairs_json(files["pairs"], result.diagnostics)
    if flags["debug_ellipses"]:
        draw_ellipse_overlay(files["ellipses"], img, context["plans"], context["candidates"])
    if flags["debug_paths"]:
        export_paths_json(files["paths_json"], result.paths)
        draw_paths_overlay(files["paths_png"], img, result.paths)

    return {
        "file": image_path.name,
        "objects": result.labels.count,
        "paths": len(result.paths),
        "fallback": result.diagnostics["n_fallback_paths"],
        "seconds": time.perf_counter() - started,
    }


@click.group(cls=SplitterCLI)
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also write a full DEBUG log here.")
def cli(log_level: str, log_file: Optional[str]):
    """Split clumped nuclei in fluorescence microscopy images."""
    setup_logging(log_level.upper(), log_file)


@cli.command()
@click.argument("input_path", metavar="INPUT", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="output", show_default=True)
@click.option("--overlay", is_flag=True, help="Label overlay PNG.")
@click.option("--debug-contours", is_flag=True, help="Per-contour (index, x, y, s, kappa) CSV.")
@click.option("--debug-pairs", is_flag=True, help="JSON dump of every pair and its scores.")
@click.option("--debug-ellipses", is_flag=True, help="Fitted ellipses and committed chords PNG.")
@click.option("--debug-paths", is_flag=True, help="Dividing paths as RLE JSON plus overlay PNG.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Concurrent images for a directory input.")
def segment(input_path, config_path, out_dir, overlay, debug_contours, debug_pairs, debug_ellipses,
            debug_paths, workers):
    """Segment one image, or every PNG/TIFF below a directory."""
    cfg = _config(config_path, workers)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    flags = dict(overlay=overlay, debug_contours=debug_contours, debug_pairs=debug_pairs,
                 debug_ellipses=debug_ellipses, debug_paths=debug_paths)

    source = Path(input_path)
    images = sorted(list_images(source).values()) if source.is_dir() else [source]
    failures: List[str] = []

    def work(image_path: Path) -> Optional[Dict[str, Any]]:
        try:
            return _segment_one(image_path, cfg, out, flags)
        except (SegmentationError, OSError) as exc:
            if len(images) == 1:
                raise
            logger.error(f"{image_path.name}: {exc}")
            failures.append(image_path.name)
            return None

    summaries = asyncio.run(run_concurrently(images, work, cfg.workers, desc="Segmenting"))

    table = Table(title="Segmentation", show_lines=False)
    for column in ("file", "objects", "paths", "fallback", "seconds"):
        table.add_column(column, justify="left" if column == "file" else "right")
    for row in filter(None, summaries):
        table.add_row(row["file"], str(row["objects"]), str(row["paths"]), str(row["fallback"]),
                      f"{row['seconds']:.2f}")
    console.print(table)
    console.print(f"[green]✅ Outputs written to {out}[/green]")

    if failures:
        raise SegmentationError(f"{len(failures)} of {len(images)} image(s) failed: {', '.join(sorted(failures))}")


@cli.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="SyntheticSpec JSON file.")
@click.option("--seed", type=int, default=None, help="Override the noise seed of the spec.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--corpus", type=click.IntRange(min=1), default=None,
              help="Instead of --spec, write the seeded two/three-nucleus benchmark corpus of this size.")
def synth(spec_path, seed, out_dir, corpus):
    """Render synthetic clumps into OUT/images and their ground truth into OUT/gt."""
    if (spec_path is None) == (corpus is None):
        raise click.UsageError("give exactly one of --spec or --corpus")

    if corpus is not None:
        named = [(f"clump_{k:03d}", spec) for k, spec in enumerate(synthetic_corpus(corpus, seed if seed is not None else 7))]
    else:
        try:
            spec = SyntheticSpec.model_validate_json(Path(spec_path).read_text(encoding="utf-8"))
        except ValidationError as exc:
            raise click.BadParameter(str(exc), param_hint="--spec") from exc
        if seed is not None:
            spec = spec.model_copy(update={"seed": seed})
        named = [(Path(spec_path).stem, spec)]

    out = Path(out_dir)
    for name, spec in named:
        try:
            img, gt = generate_synthetic_clump(spec)
        except SyntheticSpecError as exc:
            raise click.BadParameter(str(exc), param_hint="--spec") from exc
        save_image_png(out / "images" / f"{name}.png", img)
        save_label_png(out / "gt" / f"{name}.png", gt)
    console.print(f"[green]✅ {len(named)} synthetic image(s) written to {out}[/green]")


@cli.command()
@click.option("--pred", "pred_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--gt", "gt_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--iou-min", type=click.FloatRange(0.0, 1.0, min_open=True), default=None)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--segment", "run_segmentation", is_flag=True, help="PRED holds raw images; segment them first.")
@click.option("--workers", type=click.IntRange(min=1), default=None)
def evaluate(pred_dir, gt_dir, out_csv, iou_min, config_path, run_segmentation, workers):
    """Score label masks in PRED against GT; (mean, std) per group to OUT."""
    cfg = _config(config_path, workers)
    if iou_min is not None:
        cfg = cfg.model_copy(update={"iou_min": iou_min})
    out = Path(out_csv)

    if run_segmentation:
        report = batch_evaluate(pred_dir, gt_dir, cfg, out.parent / f"{out.stem}_runs")
        out.parent.mkdir(parents=True, exist_ok=True)
        report.aggregate.to_csv(out, index=False)
    else:
        report = evaluate_directories(pred_dir, gt_dir, cfg.iou_min, out, cfg.workers)

    table = Table(title="Aggregate metrics")
    for column in report.aggregate.columns:
        table.add_column(str(column), justify="right")
    for record in report.aggregate.itertuples(index=False):
        table.add_row(*(f"{v:.4f}" if isinstance(v, float) else str(v) for v in record))
    console.print(table)
    if report.unpaired:
        console.print(f"[yellow]⚠️ {len(report.unpaired)} unpaired file(s) skipped[/yellow]")
    console.print(f"[green]✅ {len(report.rows)} image(s) scored, CSV written to {out}[/green]")
    if report.failed:
        raise SegmentationError(f"{len(report.failed)} image(s) could not be scored: {', '.join(report.failed)}")


@cli.command()
@click.option("--n", "n_cases", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Write benchmark.json and benchmark.csv here.")
@click.option("--workers", type=click.IntRange(min=1), default=None)
def benchmark(n_cases, seed, config_path, out_dir, workers):
    """End-to-end run over the seeded synthetic corpus."""
    cfg = _config(config_path, workers)
    started = time.perf_counter()
    summary = run_benchmark(n_cases, seed, cfg)
    elapsed = time.perf_counter() - started

    console.print(Panel(
        f"[yellow]Clumps:[/yellow] {summary.n_cases}\n"
        f"[yellow]Correct object count:[/yellow] {summary.count_accuracy:.1%}\n"
        f"[yellow]Mean matched Jaccard:[/yellow] {summary.mean_jaccard:.4f}\n"
        f"[yellow]Duration:[/yellow] {elapsed:.1f}s",
        title="🧪 Synthetic benchmark", border_style="cyan",
    ))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.json").write_text(json.dumps(json_safe({"seed": seed, **summary.to_dict()}), indent=2),
                                            encoding="utf-8")
        summary.aggregate.to_csv(out / "benchmark.csv", index=False)
        console.print(f"[green]✅ Results saved to {out}[/green]")


@cli.command("init-config")
@click.argument("path", type=click.Path(dir_okay=False))
def init_config(path):
    """Write the default configuration, one documented key per line."""
    save_config(PipelineConfig(), path)
    console.print(f"[green]✅ Default configuration written to {path}[/green]")


if __name__ == "__main__":
    cli()
