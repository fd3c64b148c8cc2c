#!/usr/bin/env python3
"""Render comparison figures from benchmark trace directories.

Reads every ``*.csv`` in a trace directory (the bench CLI's schema: a
``# key = value`` metadata block above a fixed seven-column header), draws one
curve per algorithm label, and writes a PNG.  Gap, residual and objective
error go on a log-scale vertical axis; the anchoring parameter is linear.

Usage:
    plots.py <trace-dir> --metric gap --xaxis iterations --out fig.png

Values at or below zero cannot sit on a log axis; they are clipped to 1e-16
and drawn with a triangular marker so converged points remain visible.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from dataclasses import dataclass
from pathlib import Path

TRACE_HEADER = "k,phi,m_residual,residual,gap,objective_error,elapsed_seconds"
COLUMNS = TRACE_HEADER.split(",")

METRICS = ("gap", "residual", "objective_error", "phi")
LOG_METRICS = ("gap", "residual", "objective_error")
XAXES = ("iterations", "seconds")

LOG_CLIP = 1e-16

# fixed palette, assigned to labels in sorted order so figures are stable
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

LABEL_TEXT = {
    "cp": "CP",
    "hcp": "HCP",
    "restarted_hcp": "Restarted HCP",
    "acp": "aCP",
    "restarted_acp": "Restarted aCP",
}


class TraceError(ValueError):
    """A trace file is malformed or lacks the requested data."""


@dataclass
class Trace:
    path: Path
    label: str
    metadata: dict[str, str]
    rows: list[dict[str, float | None]]


def read_trace(path: Path) -> Trace:
    metadata: dict[str, str] = {}
    rows: list[dict[str, float | None]] = []
    header_seen = False
    with path.open() as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = (part.strip() for part in body.split("=", 1))
                    metadata[key] = value
                continue
            if not header_seen:
                if line != TRACE_HEADER:
                    raise TraceError(f"{path.name}: unexpected header {line!r}")
                header_seen = True
                continue
            fields = line.split(",")
            if len(fields) != len(COLUMNS):
                raise TraceError(f"{path.name}: malformed row {line!r}")
            rows.append({col: (float(tok) if tok else None)
                         for col, tok in zip(COLUMNS, fields)})
    if not header_seen:
        raise TraceError(f"{path.name}: no trace header found")
    label = metadata.get("algorithm", path.stem)
    return Trace(path=path, label=label, metadata=metadata, rows=rows)


def load_trace_dir(trace_dir: Path) -> list[Trace]:
    paths = sorted(trace_dir.glob("*.csv"))
    if not paths:
        raise TraceError(f"no *.csv traces in {trace_dir}")
    traces = [read_trace(path) for path in paths]
    shared = [("problem", ), ("variant", ), ("seed", )]
    for key, in shared:
        values = {t.metadata.get(key) for t in traces}
        if len(values) > 1:
            raise TraceError(f"traces disagree on {key}: {sorted(map(str, values))}")
    return traces


def extract_curve(trace: Trace, metric: str, xaxis: str):
    xs, ys = [], []
    for row in trace.rows:
        y = row[metric]
        if y is None:
            continue
        xs.append(row["k"] if xaxis == "iterations" else row["elapsed_seconds"])
        ys.append(y)
    if not ys:
        raise TraceError(
            f"trace {trace.path.name!r} has no values for metric {metric!r}")
    return xs, ys


def build_curves(traces: list[Trace], metric: str, xaxis: str):
    """(label, xs, ys) per trace, sorted by label for stable color assignment."""
    curves = []
    for trace in sorted(traces, key=lambda t: t.label):
        xs, ys = extract_curve(trace, metric, xaxis)
        curves.append((trace.label, xs, ys))
    return curves


def data_digest(curves) -> str:
    """Hash of the plotted arrays; identical inputs must render identical data."""
    digest = hashlib.sha256()
    for label, xs, ys in curves:
        digest.update(label.encode())
        for value in xs:
            digest.update(repr(float(value)).encode())
        for value in ys:
            digest.update(repr(float(value)).encode())
    return digest.hexdigest()


def draw(curves, metric: str, xaxis: str, metadata: dict[str, str]):
    """Build the matplotlib figure for a curve set; returns ``(fig, ax)``."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7.0, 4.6), dpi=130)
    logscale = metric in LOG_METRICS
    for index, (label, xs, ys) in enumerate(curves):
        color = PALETTE[index % len(PALETTE)]
        text = LABEL_TEXT.get(label, label)
        if logscale:
            clipped_x = [x for x, y in zip(xs, ys) if y <= LOG_CLIP]
            drawn = [max(y, LOG_CLIP) for y in ys]
            ax.semilogy(xs, drawn, label=text, color=color, linewidth=1.4)
            if clipped_x:
                ax.semilogy(clipped_x, [LOG_CLIP] * len(clipped_x), linestyle="",
                            marker="v", markersize=4, color=color)
        else:
            ax.plot(xs, ys, label=text, color=color, linewidth=1.4)
    ax.set_xlabel("iteration k" if xaxis == "iterations" else "elapsed seconds")
    ax.set_ylabel(metric.replace("_", " "))
    title = " ".join(filter(None, (metadata.get("problem"), metadata.get("variant"),
                                   f"seed {metadata.get('seed')}" if metadata.get("seed") else "")))
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, ax


def render(trace_dir, metric: str, xaxis: str, out_image) -> str:
    """Render the figure and return the digest of the plotted data."""
    if metric not in METRICS:
        raise TraceError(f"unknown metric {metric!r}; choose from {METRICS}")
    if xaxis not in XAXES:
        raise TraceError(f"unknown xaxis {xaxis!r}; choose from {XAXES}")
    traces = load_trace_dir(Path(trace_dir))
    curves = build_curves(traces, metric, xaxis)
    fig, _ax = draw(curves, metric, xaxis, traces[0].metadata)
    fig.savefig(out_image)
    import matplotlib.pyplot as plt
    plt.close(fig)
    return data_digest(curves)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Render comparison figures from benchmark trace CSVs.")
    parser.add_argument("trace_dir")
    parser.add_argument("--metric", required=True, choices=METRICS)
    parser.add_argument("--xaxis", default="iterations", choices=XAXES)
    parser.add_argument("--out", required=True)
    parser.add_argument("--print-digest", action="store_true",
                        help="print the sha256 of the plotted data arrays")
    args = parser.parse_args(argv)
    try:
        digest = render(args.trace_dir, args.metric, args.xaxis, args.out)
    except TraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.print_digest:
        print(digest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
