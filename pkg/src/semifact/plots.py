"""Figure rendering for stored results: ratio curves from a grid-search
surface and F1-versus-shot-count curves. Each figure is written next to a
delimited copy of the plotted data.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def render_ratio_curves(
    surface: dict[tuple[int, int], float], out_dir: str | Path, stem: str = "ratio_curves"
) -> list[Path]:
    """One line per context ratio: dev micro-F1 against the entity ratio."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    png_path = out / f"{stem}.png"
    csv_path = out / f"{stem}.csv"

    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity_ratio", "context_ratio", "micro_f1"])
        for (e, c), f1 in sorted(surface.items()):
            writer.writerow([e, c, f1])

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for c in sorted({c for _, c in surface}):
        points = sorted((e, f1) for (e, cc), f1 in surface.items() if cc == c)
        ax.plot(
            [p[0] for p in points],
            [p[1] for p in points],
            marker="o",
            label=f"context 1:{c}",
        )
    ax.set_xlabel("entity-level augmentation ratio")
    ax.set_ylabel("dev micro-F1")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [png_path, csv_path]


def load_shot_rows(path: str | Path) -> list[dict]:
    """Rows of k_shot,variant,micro_f1 from a delimited file."""
    rows: list[dict] = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                {
                    "k_shot": int(record["k_shot"]),
                    "variant": record["variant"],
                    "micro_f1": float(record["micro_f1"]),
                }
            )
    return rows


def render_shot_curves(
    rows: list[dict], out_dir: str | Path, stem: str = "shot_curves"
) -> list[Path]:
    """One line per variant: micro-F1 against the number of shots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    png_path = out / f"{stem}.png"
    csv_path = out / f"{stem}.csv"

    ordered = sorted(rows, key=lambda r: (r["variant"], r["k_shot"]))
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k_shot", "variant", "micro_f1"])
        for row in ordered:
            writer.writerow([row["k_shot"], row["variant"], row["micro_f1"]])

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for variant in sorted({r["variant"] for r in rows}):
        points = sorted((r["k_shot"], r["micro_f1"]) for r in rows if r["variant"] == variant)
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o", label=variant)
    ax.set_xlabel("training sentences per entity type")
    ax.set_ylabel("micro-F1")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return [png_path, csv_path]
