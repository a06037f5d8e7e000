"""Minimal SVG rendering for convergence curves (no plotting dependencies)."""

import math

__all__ = ["render_convergence_svg"]

_WIDTH, _HEIGHT = 760, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 170, 30, 50
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
_FLOOR = 1e-18  # display clamp for exact zeros on the log axis


def _ticks(lo, hi, count=6):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def render_convergence_svg(series, x_label="iteration", y_label="relative residual", title=None):
    """Render series of (label, xs, ys) as an SVG string.

    The y axis is log10-scaled (values clamped at a tiny positive floor);
    each series becomes exactly one ``path`` element, with a legend entry
    taken from its label.
    """
    series = [(label, list(xs), [max(float(v), _FLOOR) for v in ys]) for label, xs, ys in series]
    if not series or any(len(xs) == 0 or len(xs) != len(ys) for _, xs, ys in series):
        raise ValueError("every series needs matching, non-empty x and y data")

    x_min = min(min(xs) for _, xs, _ in series)
    x_max = max(max(xs) for _, xs, _ in series)
    ly_min = min(min(math.log10(v) for v in ys) for _, _, ys in series)
    ly_max = max(max(math.log10(v) for v in ys) for _, _, ys in series)
    if x_max == x_min:
        x_max = x_min + 1.0
    if ly_max - ly_min < 0.5:
        ly_max += 0.5
        ly_min -= 0.5

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w

    def sy(v):
        ly = math.log10(v)
        return _MARGIN_T + (ly_max - ly) / (ly_max - ly_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_HEIGHT - _MARGIN_B}" x2="{_WIDTH - _MARGIN_R}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="20" text-anchor="middle" '
            f'font-size="14">{title}</text>'
        )
    for xt in _ticks(x_min, x_max):
        px = sx(xt)
        parts.append(
            f'<line x1="{px:.1f}" y1="{_HEIGHT - _MARGIN_B}" x2="{px:.1f}" '
            f'y2="{_HEIGHT - _MARGIN_B + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{_HEIGHT - _MARGIN_B + 18}" text-anchor="middle" '
            f'font-size="11">{xt:.6g}</text>'
        )
    for lyt in _ticks(ly_min, ly_max):
        py = _MARGIN_T + (ly_max - lyt) / (ly_max - ly_min) * plot_h
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{py:.1f}" x2="{_MARGIN_L}" '
            f'y2="{py:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{py + 4:.1f}" text-anchor="end" '
            f'font-size="11">1e{lyt:.1f}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 10}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">{y_label}</text>'
    )

    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = " ".join(
            ("M" if i == 0 else "L") + f"{sx(x):.2f},{sy(v):.2f}" for i, (x, v) in enumerate(zip(xs, ys))
        )
        parts.append(f'<path d="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly0 = _MARGIN_T + 14 + 18 * idx
        parts.append(
            f'<rect x="{_WIDTH - _MARGIN_R + 12}" y="{ly0 - 9}" width="14" height="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN_R + 32}" y="{ly0 - 2}" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
