"""Minimal SVG line charts, written directly without a plotting stack."""

from __future__ import annotations

from pathlib import Path

_WIDTH, _HEIGHT = 640, 400
_MARGIN = 55
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return [out_lo + (v - lo) / span * (out_hi - out_lo) for v in values]


def line_chart(series: dict, title: str, x_label: str, y_label: str) -> str:
    """Render named y-series (all sharing x = 1..n) as an SVG string."""
    if not series:
        raise ValueError("need at least one series")
    n = max(len(ys) for ys in series.values())
    all_y = [y for ys in series.values() for y in ys]
    y_lo, y_hi = min(all_y + [0.0]), max(all_y)
    left, right = _MARGIN, _WIDTH - 20
    top, bottom = 30, _HEIGHT - _MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
        f'<text x="{(left + right) // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
        f'<text x="15" y="{(top + bottom) // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {(top + bottom) // 2})">{y_label}</text>',
        f'<text x="{left - 6}" y="{bottom + 4}" text-anchor="end" font-size="10">{y_lo:.3g}</text>',
        f'<text x="{left - 6}" y="{top + 4}" text-anchor="end" font-size="10">{y_hi:.3g}</text>',
    ]
    for idx, (name, ys) in enumerate(series.items()):
        if not ys:
            continue
        xs = _scale(list(range(1, len(ys) + 1)), 1, max(n, 2), left, right)
        ysc = _scale(ys, y_lo, y_hi, bottom, top)
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ysc))
        color = _COLORS[idx % len(_COLORS)]
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{right - 5}" y="{top + 16 + 16 * idx}" text-anchor="end" '
            f'font-size="12" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_training_plot(history, path) -> None:
    """Objects/relations reconstruction error vs epoch."""
    svg = line_chart(
        {"objects": history.obj_err, "relations": history.rel_err},
        title="Reconstruction error per epoch",
        x_label="epoch",
        y_label="reconstruction error",
    )
    Path(path).write_text(svg)
