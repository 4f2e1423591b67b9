# two_nuclei_demo.py - sentetik iki çekirdek kümesini uçtan uca böl
"""
Quick end-to-end demo on a synthetic two-nucleus clump.

Run: python demo/two_nuclei_demo.py [OUT_DIR]
"""

import os
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.settings import PipelineConfig
from pipeline.orchestrator import SegmentationPipeline, setup_logging
from services.debug_export import draw_ellipse_overlay, draw_label_overlay, draw_paths_overlay
from services.image_io import save_image_png, save_label_png
from services.synthetic import generate_synthetic_clump, two_nucleus_spec
from utils.eval_metrics import evaluate_masks

console = Console()


def run_demo(out_dir: Path) -> int:
    console.print("🔬 [bold]TWO NUCLEI DEMO[/bold]")
    console.print("=" * 50)

    img, gt = generate_synthetic_clump(two_nucleus_spec())
    console.print(f"✅ Synthetic clump {img.shape}, {gt.count} nuclei in ground truth")

    def progress_callback(stage_name, progress, status, current_step):
        if status in ("completed", "failed"):
            console.print(f"[{stage_name}] {progress}% - {status}")

    pipeline = SegmentationPipeline(PipelineConfig(), progress_callback=progress_callback)
    result = pipeline.run(img)
    report = evaluate_masks(result.labels, gt)

    table = Table(title="📈 Demo results")
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("objects", str(result.labels.count))
    table.add_row("dividing paths", str(len(result.paths)))
    table.add_row("fallback paths", str(result.diagnostics["n_fallback_paths"]))
    for metric in ("jaccard", "precision", "recall", "f1", "hausdorff"):
        table.add_row(metric, f"{getattr(report, metric):.4f}")
    console.print(table)

    out_dir.mkdir(parents=True, exist_ok=True)
    save_image_png(out_dir / "clump.png", img)
    save_label_png(out_dir / "clump_labels.png", result.labels)
    draw_label_overlay(out_dir / "clump_overlay.png", img, result.labels)
    draw_ellipse_overlay(out_dir / "clump_ellipses.png", img, result.context["plans"], result.context["candidates"])
    draw_paths_overlay(out_dir / "clump_paths.png", img, result.paths)
    console.print(f"[green]💾 Images saved to {out_dir}[/green]")

    if result.labels.count == gt.count:
        console.print("\n🎉 Clump split into the right number of nuclei")
        return 0
    console.print("\n❌ Object count does not match the ground truth")
    return 1


if __name__ == "__main__":
    setup_logging("WARNING")
    sys.exit(run_demo(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")))
