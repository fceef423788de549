"""Render scalesim CSV outputs to image files.

Two figure kinds:

  loss-boxplot   one box per policy from a scalesim-losses-v1 file,
                 ordered best (lowest median total loss) to worst.
  trace-overlay  demand, the policy's capacity target, and live hosts on a
                 shared time axis from a scalesim-plotdata-v1 file.

Usage (module or the `plotkit-render` console script):

  python -m plotkit.render --kind loss-boxplot  --in losses.csv   --out box.png
  python -m plotkit.render --kind trace-overlay --in plotdata.csv --out run.png

A file that fails schema validation or contains no data rows exits nonzero
and writes nothing.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from statistics import median

import matplotlib

matplotlib.use("Agg")  # file renderer only; never needs a display

import matplotlib.pyplot as plt

from .schemas import EmptyDataError, SchemaError, read_losses, read_plotdata

__all__ = ["build_loss_boxplot", "build_trace_overlay", "main"]

KINDS = ("loss-boxplot", "trace-overlay")


def build_loss_boxplot(rows: list[dict]):
    """Figure with one total-loss box per policy, best median first."""
    by_policy: dict[str, list[float]] = {}
    for row in rows:
        by_policy.setdefault(row["policy"], []).append(row["total_loss"])
    order = sorted(by_policy, key=lambda name: median(by_policy[name]))
    alphas = sorted({row["alpha"] for row in rows})
    n_runs = len(rows)

    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(order), 4.5))
    ax.boxplot([by_policy[name] for name in order], tick_labels=order,
               patch_artist=True)
    ax.set_ylabel("total pinball loss")
    ax.set_xlabel("policy")
    alpha_txt = ", ".join(f"{a:g}" for a in alphas)
    ax.set_title(f"loss per policy (alpha {alpha_txt}, {n_runs} runs)")
    ax.grid(True, axis="y", linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    return fig


def build_trace_overlay(cols: dict[str, list]):
    """Figure overlaying demand, capacity target, and live hosts over time."""
    t = cols["t"]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.plot(t, cols["demand"], label="demand", linewidth=1.0)
    ax.step(t, cols["quantile_target"], where="post", label="capacity target",
            linewidth=1.0)
    ax.step(t, cols["live_hosts"], where="post", label="live hosts",
            linewidth=1.0)
    n_warmup = sum(1 for v in cols["quantile_target"] if math.isnan(v))
    if n_warmup:
        ax.axvspan(t[0], t[min(n_warmup, len(t) - 1)], color="grey", alpha=0.15,
                   label="warmup (unscored)")
    ax.set_xlabel("step")
    ax.set_ylabel("hosts")
    ax.set_title("demand vs. fleet")
    ax.legend(loc="best")
    fig.tight_layout()
    return fig


def _render(kind: str, in_path: Path, out_path: Path) -> None:
    if kind == "loss-boxplot":
        fig = build_loss_boxplot(read_losses(in_path))
    else:
        fig = build_trace_overlay(read_plotdata(in_path))
    try:
        fig.savefig(out_path, dpi=120)
    finally:
        plt.close(fig)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit-render",
        description="render a figure from a scalesim CSV file",
    )
    parser.add_argument("--kind", required=True, choices=KINDS,
                        help="figure kind")
    parser.add_argument("--in", dest="infile", required=True, metavar="CSV",
                        help="input CSV (schema is checked)")
    parser.add_argument("--out", required=True, metavar="IMG",
                        help="output image path (format from extension)")
    args = parser.parse_args(argv)

    try:
        _render(args.kind, Path(args.infile), Path(args.out))
    except (SchemaError, EmptyDataError, OSError) as exc:
        print(f"plotkit-render: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
