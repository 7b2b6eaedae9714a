"""Critical-difference chart rendering as standalone SVG text.

The layout follows the usual convention for these charts: a horizontal axis
in average-rank units (best rank 1 on the left), method stems dropping from
their average rank to staggered labels on alternating sides, thick bars
joining methods whose ranks are within one critical difference, and a CD
ruler above the axis for scale. Everything is emitted by string assembly so
identical reports give identical bytes.
"""

from __future__ import annotations

from .stats import CdReport

WIDTH = 640
MARGIN = 60
AXIS_Y = 80
RULER_Y = 30
BAR_START = 14  # offset below the axis where group bars begin
BAR_STEP = 10
LABEL_STEP = 18
FONT = "font-family=\"sans-serif\" font-size=\"12\""


def rank_to_x(rank: float, k: int, width: int = WIDTH, margin: int = MARGIN) -> float:
    """Affine map from average-rank space [1, k] to pixel x."""
    if k < 2:
        raise ValueError("need at least 2 methods to lay out an axis")
    span = width - 2 * margin
    return margin + (float(rank) - 1.0) / (k - 1.0) * span


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_cd_chart(report: CdReport) -> str:
    """Render one report; returns the complete SVG document text."""
    k = len(report.methods)
    order = sorted(range(k), key=lambda j: (report.avg_ranks[j], j))
    n_left = (k + 1) // 2
    bar_rows = len(report.groups)
    label_rows = max(n_left, k - n_left)
    height = AXIS_Y + BAR_START + bar_rows * BAR_STEP + label_rows * LABEL_STEP + 40

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">',
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
    ]

    # CD ruler: a bracket of length cd in rank units, anchored at rank 1.
    ruler_end = rank_to_x(1.0 + report.cd, k)
    lines.append(
        f'<line class="cd-ruler" x1="{_fmt(rank_to_x(1.0, k))}" y1="{RULER_Y}" '
        f'x2="{_fmt(ruler_end)}" y2="{RULER_Y}" stroke="black" stroke-width="1"/>'
    )
    for x in (rank_to_x(1.0, k), ruler_end):
        lines.append(
            f'<line x1="{_fmt(x)}" y1="{RULER_Y - 4}" x2="{_fmt(x)}" '
            f'y2="{RULER_Y + 4}" stroke="black" stroke-width="1"/>'
        )
    lines.append(
        f'<text x="{_fmt((rank_to_x(1.0, k) + ruler_end) / 2.0)}" y="{RULER_Y - 8}" '
        f'{FONT} text-anchor="middle">CD = {report.cd:.3f} '
        f'(&#945; = {report.alpha:.2f})</text>'
    )

    # Axis with integer rank ticks.
    lines.append(
        f'<line class="axis" x1="{MARGIN}" y1="{AXIS_Y}" x2="{WIDTH - MARGIN}" '
        f'y2="{AXIS_Y}" stroke="black" stroke-width="1"/>'
    )
    for r in range(1, k + 1):
        x = rank_to_x(float(r), k)
        lines.append(
            f'<line x1="{_fmt(x)}" y1="{AXIS_Y}" x2="{_fmt(x)}" y2="{AXIS_Y - 5}" '
            f'stroke="black" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{_fmt(x)}" y="{AXIS_Y - 10}" {FONT} text-anchor="middle">{r}</text>'
        )

    # Group bars sit just below the axis, one row each.
    bars_bottom = AXIS_Y + BAR_START + max(0, bar_rows - 1) * BAR_STEP
    for row, group in enumerate(report.groups):
        ranks = [report.avg_ranks[report.methods.index(m)] for m in group]
        y = AXIS_Y + BAR_START + row * BAR_STEP
        lines.append(
            f'<line class="group-bar" x1="{_fmt(rank_to_x(min(ranks), k) - 3)}" y1="{y}" '
            f'x2="{_fmt(rank_to_x(max(ranks), k) + 3)}" y2="{y}" '
            f'stroke="black" stroke-width="4"/>'
        )

    # Method stems and labels, best ranks on the left side.
    for pos, j in enumerate(order):
        name = report.methods[j]
        rank = report.avg_ranks[j]
        x = rank_to_x(rank, k)
        left = pos < n_left
        row = pos if left else k - 1 - pos
        label_y = bars_bottom + BAR_STEP + (row + 1) * LABEL_STEP
        label_x = MARGIN - 10 if left else WIDTH - MARGIN + 10
        anchor = "end" if left else "start"
        lines.append(
            f'<polyline fill="none" stroke="black" stroke-width="1" points='
            f'"{_fmt(x)},{AXIS_Y} {_fmt(x)},{label_y} {_fmt(label_x)},{label_y}"/>'
        )
        lines.append(
            f'<text class="method" x="{_fmt(label_x)}" y="{label_y - 3}" {FONT} '
            f'text-anchor="{anchor}">{_escape(name)} ({rank:.2f})</text>'
        )

    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def save_cd_chart(report: CdReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_cd_chart(report))
