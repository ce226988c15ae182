"""
Static SVG charts.

Every function returns the SVG document as a string. Coordinates are
written with two decimals so identical inputs give identical bytes.
"""
import math
from dataclasses import dataclass, field
from html import escape

import numpy as np

PALETTE = ('#007AFF', '#FF9500', '#34C759', '#AF52DE', '#FF3B30', '#5AC8FA', '#8E8E93')
MARGIN = {'top': 50, 'right': 30, 'bottom': 60, 'left': 70}

STYLE = """  <style>
    text { font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Roboto, sans-serif; }
    .grid-line { stroke: #e0e0e0; stroke-width: 1; }
    .axis { stroke: #333; stroke-width: 1; }
  </style>
"""


def _f(value: float) -> str:
    return f'{value:.2f}'


def _open(width: float, height: float) -> str:
    svg = f'<svg width="{_f(width)}" height="{_f(height)}" xmlns="http://www.w3.org/2000/svg">\n'
    svg += STYLE
    svg += f'  <rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>\n'
    return svg


def _title(text: str, x: float, y: float, size: int = 16) -> str:
    return (
        f'  <text x="{_f(x)}" y="{_f(y)}" text-anchor="middle" font-size="{size}" '
        f'font-weight="bold">{escape(text)}</text>\n'
    )


def diverging_color(value: float, limit: float) -> str:
    """Map ``value`` in [-limit, limit] to blue (negative), white (0), red (positive)."""
    t = 0.0 if limit <= 0 else max(-1.0, min(1.0, value / limit))
    if t >= 0:
        r, g, b = 255, round(255 * (1 - t)), round(255 * (1 - t))
    else:
        r, g, b = round(255 * (1 + t)), round(255 * (1 + t)), 255
    return f'#{r:02x}{g:02x}{b:02x}'


def gray(value: float, low: float, high: float) -> str:
    t = 0.0 if high <= low else (value - low) / (high - low)
    level = round(255 * max(0.0, min(1.0, t)))
    return f'#{level:02x}{level:02x}{level:02x}'


def heatmap(
    values: np.ndarray,
    column_labels: list[str],
    row_labels: list[str],
    title: str,
    separator_after: int | None = None,
    cell: float = 18.0,
) -> str:
    """
    Signed heatmap with a diverging color scale.

    Args:
        values: (rows, columns) matrix.
        column_labels: One label per column, drawn rotated under the grid.
        row_labels: One label per row.
        title: Chart title.
        separator_after: Draw a vertical line after this many columns.
        cell: Cell size in pixels.
    """
    values = np.asarray(values, dtype=np.float64)
    n_rows, n_cols = values.shape
    left, top = MARGIN['left'], MARGIN['top']
    width = left + n_cols * cell + MARGIN['right'] + 60
    height = top + n_rows * cell + 90
    limit = float(np.abs(values).max()) if values.size else 0.0

    svg = _open(width, height)
    svg += _title(title, width / 2, 25)
    for i in range(n_rows):
        y = top + i * cell
        svg += (
            f'  <text x="{_f(left - 6)}" y="{_f(y + cell * 0.7)}" text-anchor="end" '
            f'font-size="11" fill="#333">{escape(row_labels[i])}</text>\n'
        )
        for j in range(n_cols):
            x = left + j * cell
            svg += (
                f'  <rect x="{_f(x)}" y="{_f(y)}" width="{_f(cell)}" height="{_f(cell)}" '
                f'fill="{diverging_color(values[i, j], limit)}">\n'
            )
            svg += f'    <title>{escape(row_labels[i])} / {escape(column_labels[j])}: {values[i, j]:.4f}</title>\n'
            svg += '  </rect>\n'
    bottom = top + n_rows * cell
    for j, label in enumerate(column_labels):
        x = left + (j + 0.6) * cell
        svg += (
            f'  <text x="{_f(x)}" y="{_f(bottom + 8)}" font-size="9" fill="#333" '
            f'transform="rotate(90, {_f(x)}, {_f(bottom + 8)})">{escape(label)}</text>\n'
        )
    if separator_after is not None and 0 < separator_after < n_cols:
        x = left + separator_after * cell
        svg += f'  <line x1="{_f(x)}" y1="{_f(top - 4)}" x2="{_f(x)}" y2="{_f(bottom + 4)}" stroke="#000" stroke-width="2"/>\n'

    legend_x = left + n_cols * cell + 15
    for k, level in enumerate((1.0, 0.5, 0.0, -0.5, -1.0)):
        y = top + k * cell
        svg += f'  <rect x="{_f(legend_x)}" y="{_f(y)}" width="12" height="{_f(cell)}" fill="{diverging_color(level, 1.0)}"/>\n'
        svg += f'  <text x="{_f(legend_x + 16)}" y="{_f(y + cell * 0.7)}" font-size="9" fill="#666">{level * limit:.2g}</text>\n'
    svg += '</svg>\n'
    return svg


@dataclass
class Series:
    """One polyline: label plus x/y values."""

    label: str
    x: list[float]
    y: list[float]


@dataclass
class Panel:
    """One plot area with its own axes."""

    title: str
    series: list[Series] = field(default_factory=list)
    x_label: str = ''
    y_label: str = ''


def _log_ticks(low: float, high: float) -> list[float]:
    return [10.0 ** e for e in range(math.floor(low), math.ceil(high) + 1)]


def _panel(panel: Panel, ox: float, oy: float, width: float, height: float, log_x: bool, log_y: bool) -> str:
    def tx(v: float) -> float | None:
        if log_x:
            return math.log10(v) if v > 0 else None
        return v

    def ty(v: float) -> float | None:
        if log_y:
            return math.log10(v) if v > 0 else None
        return v

    points = [
        [(tx(x), ty(y)) for x, y in zip(s.x, s.y) if tx(x) is not None and ty(y) is not None
         and math.isfinite(x) and math.isfinite(y)]
        for s in panel.series
    ]
    xs = [p[0] for pts in points for p in pts]
    ys = [p[1] for pts in points for p in pts]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    inner_w = width - MARGIN['left'] - MARGIN['right']
    inner_h = height - MARGIN['top'] - MARGIN['bottom']
    left, top = ox + MARGIN['left'], oy + MARGIN['top']

    def px(v: float) -> float:
        return left + (v - x_lo) / (x_hi - x_lo) * inner_w

    def py(v: float) -> float:
        return top + inner_h - (v - y_lo) / (y_hi - y_lo) * inner_h

    svg = _title(panel.title, ox + width / 2, oy + 30, size=13)
    svg += f'  <rect x="{_f(left)}" y="{_f(top)}" width="{_f(inner_w)}" height="{_f(inner_h)}" fill="none" class="axis"/>\n'

    y_ticks = _log_ticks(y_lo, y_hi) if log_y else list(np.linspace(y_lo, y_hi, 5))
    for tick in y_ticks:
        value = math.log10(tick) if log_y else tick
        if not y_lo - 1e-12 <= value <= y_hi + 1e-12:
            continue
        y = py(value)
        svg += f'  <line x1="{_f(left)}" y1="{_f(y)}" x2="{_f(left + inner_w)}" y2="{_f(y)}" class="grid-line"/>\n'
        svg += f'  <text x="{_f(left - 6)}" y="{_f(y + 4)}" text-anchor="end" font-size="10" fill="#666">{tick:.3g}</text>\n'
    x_values = sorted({x for s in panel.series for x in s.x if tx(x) is not None})
    for tick in x_values if len(x_values) <= 12 else x_values[:: max(1, len(x_values) // 8)]:
        x = px(tx(tick))
        svg += f'  <text x="{_f(x)}" y="{_f(top + inner_h + 16)}" text-anchor="middle" font-size="10" fill="#666">{tick:.3g}</text>\n'
    if panel.x_label:
        svg += f'  <text x="{_f(left + inner_w / 2)}" y="{_f(top + inner_h + 36)}" text-anchor="middle" font-size="11" fill="#333">{escape(panel.x_label)}</text>\n'
    if panel.y_label:
        svg += (
            f'  <text x="{_f(ox + 14)}" y="{_f(top + inner_h / 2)}" text-anchor="middle" font-size="11" fill="#333" '
            f'transform="rotate(-90, {_f(ox + 14)}, {_f(top + inner_h / 2)})">{escape(panel.y_label)}</text>\n'
        )

    for index, (series, pts) in enumerate(zip(panel.series, points)):
        color = PALETTE[index % len(PALETTE)]
        if pts:
            coords = ' '.join(f'{_f(px(x))},{_f(py(y))}' for x, y in pts)
            svg += f'  <polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>\n'
        legend_y = top + 12 + index * 14
        svg += f'  <rect x="{_f(left + inner_w - 110)}" y="{_f(legend_y - 9)}" width="10" height="10" fill="{color}"/>\n'
        svg += f'  <text x="{_f(left + inner_w - 96)}" y="{_f(legend_y)}" font-size="10" fill="#333">{escape(series.label)}</text>\n'
    return svg


def line_panels(
    panels: list[Panel],
    title: str,
    columns: int = 2,
    log_x: bool = True,
    log_y: bool = True,
    panel_size: tuple[float, float] = (420.0, 300.0),
) -> str:
    """Grid of line charts, log-log by default; non-positive points are skipped on log axes."""
    columns = max(1, min(columns, len(panels)))
    rows = math.ceil(len(panels) / columns)
    pw, ph = panel_size
    width, height = columns * pw, rows * ph + 40
    svg = _open(width, height)
    svg += _title(title, width / 2, 24, size=18)
    for index, panel in enumerate(panels):
        ox = (index % columns) * pw
        oy = 40 + (index // columns) * ph
        svg += _panel(panel, ox, oy, pw, ph, log_x, log_y)
    svg += '</svg>\n'
    return svg


def scatter(
    truth: np.ndarray,
    predicted: np.ndarray,
    title: str,
    annotation: str = '',
    size: float = 420.0,
) -> str:
    """Predicted-vs-true scatter with the identity line."""
    truth = np.asarray(truth, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    finite = np.isfinite(truth) & np.isfinite(predicted)
    values = np.concatenate([truth[finite], predicted[finite]])
    low, high = (float(values.min()), float(values.max())) if values.size else (0.0, 1.0)
    if high == low:
        low, high = low - 0.5, high + 0.5
    pad = 0.05 * (high - low)
    low, high = low - pad, high + pad

    inner = size - MARGIN['left'] - MARGIN['right']
    left, top = MARGIN['left'], MARGIN['top']

    def p(v: float, vertical: bool) -> float:
        t = (v - low) / (high - low) * inner
        return top + inner - t if vertical else left + t

    svg = _open(size, top + inner + MARGIN['bottom'])
    svg += _title(title, size / 2, 25)
    svg += f'  <rect x="{_f(left)}" y="{_f(top)}" width="{_f(inner)}" height="{_f(inner)}" fill="none" class="axis"/>\n'
    svg += (
        f'  <line x1="{_f(p(low, False))}" y1="{_f(p(low, True))}" x2="{_f(p(high, False))}" '
        f'y2="{_f(p(high, True))}" stroke="#8E8E93" stroke-dasharray="5,5"/>\n'
    )
    for tick in np.linspace(low, high, 5):
        svg += f'  <text x="{_f(p(tick, False))}" y="{_f(top + inner + 16)}" text-anchor="middle" font-size="10" fill="#666">{tick:.3g}</text>\n'
        svg += f'  <text x="{_f(left - 6)}" y="{_f(p(tick, True) + 4)}" text-anchor="end" font-size="10" fill="#666">{tick:.3g}</text>\n'
    for t, q in zip(truth[finite], predicted[finite]):
        svg += f'  <circle cx="{_f(p(t, False))}" cy="{_f(p(q, True))}" r="2.5" fill="#007AFF" opacity="0.6"/>\n'
    svg += f'  <text x="{_f(left + inner / 2)}" y="{_f(top + inner + 36)}" text-anchor="middle" font-size="11" fill="#333">true</text>\n'
    svg += (
        f'  <text x="{_f(18)}" y="{_f(top + inner / 2)}" text-anchor="middle" font-size="11" fill="#333" '
        f'transform="rotate(-90, 18, {_f(top + inner / 2)})">predicted</text>\n'
    )
    if annotation:
        svg += f'  <text x="{_f(left + 8)}" y="{_f(top + 16)}" font-size="11" fill="#333">{escape(annotation)}</text>\n'
    svg += '</svg>\n'
    return svg


def image_gallery(truth: np.ndarray, reconstruction: np.ndarray, title: str, pixel: float = 6.0) -> str:
    """
    Per sample, truth above reconstruction, one tile per band.

    Args:
        truth: (S, H, W, C) images.
        reconstruction: Same shape as ``truth``.
    """
    truth = np.asarray(truth, dtype=np.float64)
    reconstruction = np.asarray(reconstruction, dtype=np.float64)
    samples, h, w, bands = truth.shape
    gap = 8.0
    tile_w, tile_h = w * pixel, h * pixel
    block_w = bands * (tile_w + gap) + 3 * gap
    width = MARGIN['left'] + samples * block_w
    height = MARGIN['top'] + 2 * (tile_h + gap) + 30
    low = float(min(truth.min(), reconstruction.min()))
    high = float(max(truth.max(), reconstruction.max()))

    svg = _open(width, height)
    svg += _title(title, width / 2, 25)
    for label, row in (('truth', 0), ('recon', 1)):
        y = MARGIN['top'] + row * (tile_h + gap) + tile_h / 2
        svg += f'  <text x="{_f(MARGIN["left"] - 8)}" y="{_f(y)}" text-anchor="end" font-size="11" fill="#333">{label}</text>\n'
    for s in range(samples):
        for row, images in enumerate((truth, reconstruction)):
            for band in range(bands):
                ox = MARGIN['left'] + s * block_w + band * (tile_w + gap)
                oy = MARGIN['top'] + row * (tile_h + gap)
                for i in range(h):
                    for j in range(w):
                        svg += (
                            f'  <rect x="{_f(ox + j * pixel)}" y="{_f(oy + i * pixel)}" width="{_f(pixel)}" '
                            f'height="{_f(pixel)}" fill="{gray(images[s, i, j, band], low, high)}"/>\n'
                        )
    svg += '</svg>\n'
    return svg
