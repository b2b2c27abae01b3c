"""Minimal dependency-free SVG line charts for the comparison curves."""

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 56, 16, 28, 40


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def svg_line_chart(series, title="", xlabel="", ylabel="", width=640, height=400):
    """Render labeled (xs, ys) series as an SVG string.

    ``series`` is a list of (label, xs, ys) with equal-length numeric
    sequences; axes are scaled to the union of all points.
    """
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)]
    if not pts:
        raise ValueError("nothing to plot")
    xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
    ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def px(x):
        return _MARGIN_L + (x - xlo) / (xhi - xlo) * plot_w

    def py(y):
        return _MARGIN_T + plot_h - (y - ylo) / (yhi - ylo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif">{title}</text>',
    ]
    axis = (
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_MARGIN_T + plot_h}" stroke="black"/>'
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T + plot_h}" '
        f'x2="{_MARGIN_L + plot_w}" y2="{_MARGIN_T + plot_h}" stroke="black"/>'
    )
    out.append(axis)
    for tx in _ticks(xlo, xhi):
        out.append(
            f'<line x1="{px(tx):.1f}" y1="{_MARGIN_T + plot_h}" '
            f'x2="{px(tx):.1f}" y2="{_MARGIN_T + plot_h + 4}" stroke="black"/>'
            f'<text x="{px(tx):.1f}" y="{_MARGIN_T + plot_h + 16}" '
            f'text-anchor="middle" font-size="10" font-family="sans-serif">'
            f"{tx:g}</text>"
        )
    for ty in _ticks(ylo, yhi):
        out.append(
            f'<line x1="{_MARGIN_L - 4}" y1="{py(ty):.1f}" x2="{_MARGIN_L}" '
            f'y2="{py(ty):.1f}" stroke="black"/>'
            f'<text x="{_MARGIN_L - 6}" y="{py(ty) + 3:.1f}" text-anchor="end" '
            f'font-size="10" font-family="sans-serif">{ty:.4g}</text>'
        )
    out.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{height - 8}" '
        f'text-anchor="middle" font-size="11" font-family="sans-serif">'
        f"{xlabel}</text>"
        f'<text x="14" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-size="11" font-family="sans-serif" '
        f'transform="rotate(-90 14 {_MARGIN_T + plot_h / 2:.1f})">{ylabel}</text>'
    )
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        ly = _MARGIN_T + 14 + 16 * k
        out.append(
            f'<line x1="{width - 150}" y1="{ly - 4}" x2="{width - 126}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{width - 120}" y="{ly}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    out.append("</svg>")
    return "\n".join(out)
