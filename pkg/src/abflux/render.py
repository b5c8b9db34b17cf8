"""Dependency-free SVG charts for run artifacts.

Deterministic by construction: fixed palette, fixed float formatting, no
timestamps.  The same numbers always render to the same bytes.
"""

from __future__ import annotations

import numpy as np

__all__ = ["line_chart", "heatmap", "bar_chart"]

PALETTE = ("#4464ad", "#d1495b", "#3a9e5f", "#8a5fbf", "#d98032", "#2a8f9d", "#5b5b5b")
_FONT = 'font-family="Helvetica, Arial, sans-serif"'


def _fmt(x: float) -> str:
    return format(float(x), ".6g")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _header(width: int, height: int) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _limits(lo: float, hi: float) -> tuple:
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise ValueError("chart data must be finite")
    if lo == hi:
        pad = 1.0 if lo == 0.0 else 0.05 * abs(lo)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Axes:
    """Pixel mapping plus the frame, ticks, and labels of one plot area."""

    def __init__(self, width, height, xmin, xmax, ymin, ymax, title, x_label, y_label):
        self.left, self.right = 74.0, width - 24.0
        self.top, self.bottom = 40.0, height - 52.0
        self.xmin, self.xmax = _limits(xmin, xmax)
        self.ymin, self.ymax = _limits(ymin, ymax)
        self.parts = []
        w, h = width, height
        self.parts.append(
            f'<rect x="{self.left:.2f}" y="{self.top:.2f}" width="{self.right - self.left:.2f}" '
            f'height="{self.bottom - self.top:.2f}" fill="none" stroke="#333333" stroke-width="1"/>'
        )
        if title:
            self.parts.append(
                f'<text x="{w / 2:.2f}" y="24" {_FONT} font-size="15" text-anchor="middle">{_esc(title)}</text>'
            )
        if x_label:
            self.parts.append(
                f'<text x="{(self.left + self.right) / 2:.2f}" y="{h - 14:.2f}" {_FONT} '
                f'font-size="12" text-anchor="middle">{_esc(x_label)}</text>'
            )
        if y_label:
            cy = (self.top + self.bottom) / 2
            self.parts.append(
                f'<text x="18" y="{cy:.2f}" {_FONT} font-size="12" text-anchor="middle" '
                f'transform="rotate(-90 18 {cy:.2f})">{_esc(y_label)}</text>'
            )
        for t in np.linspace(self.xmin, self.xmax, 5):
            px = self.px(t)
            self.parts.append(
                f'<line x1="{px:.2f}" y1="{self.bottom:.2f}" x2="{px:.2f}" y2="{self.bottom + 5:.2f}" '
                f'stroke="#333333" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{px:.2f}" y="{self.bottom + 18:.2f}" {_FONT} font-size="10" '
                f'text-anchor="middle">{_fmt(t)}</text>'
            )
        for t in np.linspace(self.ymin, self.ymax, 5):
            py = self.py(t)
            self.parts.append(
                f'<line x1="{self.left - 5:.2f}" y1="{py:.2f}" x2="{self.left:.2f}" y2="{py:.2f}" '
                f'stroke="#333333" stroke-width="1"/>'
            )
            self.parts.append(
                f'<text x="{self.left - 8:.2f}" y="{py + 3:.2f}" {_FONT} font-size="10" '
                f'text-anchor="end">{_fmt(t)}</text>'
            )

    def px(self, x: float) -> float:
        return self.left + (x - self.xmin) / (self.xmax - self.xmin) * (self.right - self.left)

    def py(self, y: float) -> float:
        return self.bottom - (y - self.ymin) / (self.ymax - self.ymin) * (self.bottom - self.top)


def line_chart(series, *, title="", x_label="", y_label="", width=760, height=460) -> str:
    """Overlayed polylines; ``series`` is a list of (label, x, y) triples."""
    if not series:
        raise ValueError("need at least one series")
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape or x.ndim != 1 or x.size < 2:
            raise ValueError("each series needs matching 1D x and y with at least two points")
        cleaned.append((str(label), x, y))
    ax = _Axes(
        width,
        height,
        min(float(x.min()) for _, x, _ in cleaned),
        max(float(x.max()) for _, x, _ in cleaned),
        min(float(y.min()) for _, _, y in cleaned),
        max(float(y.max()) for _, _, y in cleaned),
        title,
        x_label,
        y_label,
    )
    parts = _header(width, height) + ax.parts
    for i, (label, x, y) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{ax.px(a):.2f},{ax.py(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
    ly = ax.top + 14
    for i, (label, _, _) in enumerate(cleaned):
        color = PALETTE[i % len(PALETTE)]
        parts.append(
            f'<line x1="{ax.right - 150:.2f}" y1="{ly:.2f}" x2="{ax.right - 126:.2f}" y2="{ly:.2f}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{ax.right - 120:.2f}" y="{ly + 4:.2f}" {_FONT} font-size="11">{_esc(label)}</text>'
        )
        ly += 16
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _lerp_color(t: float) -> str:
    stops = ((32, 37, 76), (42, 157, 143), (233, 196, 106))
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        a, b, u = stops[0], stops[1], t / 0.5
    else:
        a, b, u = stops[1], stops[2], (t - 0.5) / 0.5
    rgb = tuple(int(round(p + (q - p) * u)) for p, q in zip(a, b))
    return f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"


def heatmap(values, *, title="", x_label="", y_label="", x_ticks=None, y_ticks=None,
            width=760, height=460) -> str:
    """Grid of colored cells; row 0 renders at the top.

    ``x_ticks``/``y_ticks`` are per-column/per-row label strings, thinned
    automatically when dense.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim != 2 or v.size == 0:
        raise ValueError("heatmap needs a non-empty 2D array")
    if not np.all(np.isfinite(v)):
        raise ValueError("heatmap data must be finite")
    nr, nc = v.shape
    vmin, vmax = float(v.min()), float(v.max())
    span = vmax - vmin if vmax > vmin else 1.0

    left, right, top, bottom = 74.0, width - 86.0, 40.0, height - 52.0
    cw, ch = (right - left) / nc, (bottom - top) / nr
    parts = _header(width, height)
    if title:
        parts.append(
            f'<text x="{width / 2:.2f}" y="24" {_FONT} font-size="15" text-anchor="middle">{_esc(title)}</text>'
        )
    for i in range(nr):
        for j in range(nc):
            color = _lerp_color((v[i, j] - vmin) / span)
            parts.append(
                f'<rect x="{left + j * cw:.2f}" y="{top + i * ch:.2f}" width="{cw + 0.5:.2f}" '
                f'height="{ch + 0.5:.2f}" fill="{color}"/>'
            )
    parts.append(
        f'<rect x="{left:.2f}" y="{top:.2f}" width="{right - left:.2f}" height="{bottom - top:.2f}" '
        f'fill="none" stroke="#333333" stroke-width="1"/>'
    )
    if x_ticks is not None:
        if len(x_ticks) != nc:
            raise ValueError("x_ticks must label every column")
        step = max(1, int(np.ceil(nc / 10)))
        for j in range(0, nc, step):
            parts.append(
                f'<text x="{left + (j + 0.5) * cw:.2f}" y="{bottom + 16:.2f}" {_FONT} font-size="10" '
                f'text-anchor="middle">{_esc(str(x_ticks[j]))}</text>'
            )
    if y_ticks is not None:
        if len(y_ticks) != nr:
            raise ValueError("y_ticks must label every row")
        step = max(1, int(np.ceil(nr / 12)))
        for i in range(0, nr, step):
            parts.append(
                f'<text x="{left - 8:.2f}" y="{top + (i + 0.5) * ch + 3:.2f}" {_FONT} font-size="10" '
                f'text-anchor="end">{_esc(str(y_ticks[i]))}</text>'
            )
    if x_label:
        parts.append(
            f'<text x="{(left + right) / 2:.2f}" y="{height - 14:.2f}" {_FONT} font-size="12" '
            f'text-anchor="middle">{_esc(x_label)}</text>'
        )
    if y_label:
        cy = (top + bottom) / 2
        parts.append(
            f'<text x="18" y="{cy:.2f}" {_FONT} font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 18 {cy:.2f})">{_esc(y_label)}</text>'
        )
    bx = right + 22
    for k in range(24):
        t0 = 1.0 - (k + 1) / 24
        parts.append(
            f'<rect x="{bx:.2f}" y="{top + k * (bottom - top) / 24:.2f}" width="16" '
            f'height="{(bottom - top) / 24 + 0.5:.2f}" fill="{_lerp_color(t0)}"/>'
        )
    parts.append(
        f'<text x="{bx + 20:.2f}" y="{top + 8:.2f}" {_FONT} font-size="10">{_fmt(vmax)}</text>'
    )
    parts.append(
        f'<text x="{bx + 20:.2f}" y="{bottom:.2f}" {_FONT} font-size="10">{_fmt(vmin)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(items, *, title="", value_label="", width=760, height=320) -> str:
    """Horizontal bars of value/threshold ratios with a threshold marker.

    ``items`` is a list of (label, value, threshold, passed); bars are green
    when passed, red otherwise, and the vertical line marks ratio 1.
    """
    if not items:
        raise ValueError("need at least one bar")
    left, right, top, bottom = 170.0, width - 120.0, 56.0, height - 40.0
    row_h = (bottom - top) / len(items)
    cap = 1.5
    parts = _header(width, height)
    if title:
        parts.append(
            f'<text x="{width / 2:.2f}" y="24" {_FONT} font-size="15" text-anchor="middle">{_esc(title)}</text>'
        )
    if value_label:
        parts.append(
            f'<text x="{(left + right) / 2:.2f}" y="{height - 12:.2f}" {_FONT} font-size="12" '
            f'text-anchor="middle">{_esc(value_label)}</text>'
        )
    for i, (label, value, threshold, passed) in enumerate(items):
        if threshold <= 0:
            raise ValueError("thresholds must be positive")
        ratio = min(cap, float(value) / float(threshold))
        y0 = top + i * row_h + 0.18 * row_h
        bar_w = max(1.0, ratio / cap * (right - left))
        color = "#3a9e5f" if passed else "#d1495b"
        parts.append(
            f'<rect x="{left:.2f}" y="{y0:.2f}" width="{bar_w:.2f}" height="{0.64 * row_h:.2f}" '
            f'fill="{color}"/>'
        )
        parts.append(
            f'<text x="{left - 8:.2f}" y="{y0 + 0.32 * row_h + 4:.2f}" {_FONT} font-size="11" '
            f'text-anchor="end">{_esc(str(label))}</text>'
        )
        parts.append(
            f'<text x="{left + bar_w + 6:.2f}" y="{y0 + 0.32 * row_h + 4:.2f}" {_FONT} '
            f'font-size="10">{_fmt(value)}</text>'
        )
    marker = left + 1.0 / cap * (right - left)
    parts.append(
        f'<line x1="{marker:.2f}" y1="{top - 8:.2f}" x2="{marker:.2f}" y2="{bottom:.2f}" '
        f'stroke="#333333" stroke-width="1" stroke-dasharray="4 3"/>'
    )
    parts.append(
        f'<text x="{marker:.2f}" y="{top - 14:.2f}" {_FONT} font-size="10" '
        f'text-anchor="middle">tolerance</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
