"""Deterministic SVG renderings of outlier reports. No raster output."""

import numpy as np

from .outliers import OutlierReport

__all__ = ["heatmap_svg", "distance_svg"]

# cell code -> fill: clean, cellwise, rowwise, both
_HEATMAP_FILL = {0: "#f5f5f0", 1: "#e08214", 2: "#8073ac", 3: "#c51b1b"}


def _svg_header(width, height):
    return (
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )


def _fmt(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


def heatmap_svg(report: OutlierReport, cell_size=12, variable_names=None) -> str:
    """Cell map with rows grouped; black rules separate the groups.

    Codes: clean, cellwise only, rowwise only, both flagged.
    """
    codes = report.heatmap_codes()
    order = np.lexsort((np.arange(report.n), report.labels))
    n, p = codes.shape
    left, top = 40, 20
    width = left + p * cell_size + 20
    height = top + n * cell_size + 20
    parts = [_svg_header(width, height)]
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    for draw_row, row in enumerate(order):
        y = top + draw_row * cell_size
        for col in range(p):
            fill = _HEATMAP_FILL[int(codes[row, col])]
            parts.append(
                f'<rect x="{left + col * cell_size}" y="{y}" '
                f'width="{cell_size}" height="{cell_size}" fill="{fill}" '
                'stroke="#ffffff" stroke-width="0.5"/>'
            )
    # group separators
    boundaries = np.flatnonzero(np.diff(report.labels[order])) + 1
    for b in boundaries:
        y = top + int(b) * cell_size
        parts.append(
            f'<line x1="{left}" y1="{y}" x2="{left + p * cell_size}" y2="{y}" '
            'stroke="black" stroke-width="2"/>'
        )
    # group labels on the left margin
    groups, starts = np.unique(report.labels[order], return_index=True)
    for g, start in zip(groups, starts):
        size = int(np.sum(report.labels == g))
        y = top + (int(start) + size / 2.0) * cell_size
        parts.append(
            f'<text x="{left - 6}" y="{_fmt(y + 4)}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{int(g)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def distance_svg(report: OutlierReport, width=640, height=320) -> str:
    """Row Mahalanobis distances by row position with the flagging cutoff."""
    order = np.lexsort((np.arange(report.n), report.labels))
    dist = report.row_distances[order]
    flags = report.row_flags[order]
    left, right, top, bottom = 50, 15, 15, 35
    plot_w = width - left - right
    plot_h = height - top - bottom
    d_max = max(float(dist.max()), report.row_threshold) * 1.08
    n = dist.shape[0]

    def sx(i):
        return left + plot_w * (i + 0.5) / n

    def sy(v):
        return top + plot_h * (1.0 - v / d_max)

    parts = [_svg_header(width, height)]
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    parts.append(
        f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="#444444"/>'
    )
    y_thr = sy(report.row_threshold)
    parts.append(
        f'<line x1="{left}" y1="{_fmt(y_thr)}" x2="{left + plot_w}" y2="{_fmt(y_thr)}" '
        'stroke="#c51b1b" stroke-dasharray="6 3"/>'
    )
    boundaries = np.flatnonzero(np.diff(report.labels[order])) + 1
    for b in boundaries:
        x = left + plot_w * float(b) / n
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{top}" x2="{_fmt(x)}" y2="{top + plot_h}" '
            'stroke="#bbbbbb" stroke-width="1"/>'
        )
    for i in range(n):
        fill = "#c51b1b" if flags[i] else "#4477aa"
        parts.append(
            f'<circle cx="{_fmt(sx(i))}" cy="{_fmt(sy(float(dist[i])))}" '
            f'r="2.5" fill="{fill}"/>'
        )
    for frac in (0.0, 0.5, 1.0):
        v = frac * d_max
        parts.append(
            f'<text x="{left - 6}" y="{_fmt(sy(v) + 4)}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{v:.1f}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.0f}" y="{height - 10}" font-size="12" '
        'text-anchor="middle" font-family="sans-serif">rows grouped by class</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
