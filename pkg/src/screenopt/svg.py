"""Minimal SVG output: filled cell rasters, polylines, and a small color ramp.

Kept deliberately tiny so plots need no plotting dependency.  Coordinates are
mapped from a data window to a fixed-size canvas with the y axis flipped so
larger x2 sits higher, matching the usual orientation of the type square.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


class SvgCanvas:
    def __init__(self, window: tuple[float, float, float, float], size: int = 560, pad: int = 20):
        self.x0, self.x1, self.y0, self.y1 = window
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError("svg window must have positive extent")
        self.size = size
        self.pad = pad
        self.parts: list[str] = []

    def _map(self, x: float, y: float) -> tuple[float, float]:
        sx = self.pad + (x - self.x0) / (self.x1 - self.x0) * self.size
        sy = self.pad + (self.y1 - y) / (self.y1 - self.y0) * self.size
        return sx, sy

    def rect(self, x: float, y: float, w: float, h: float, color: str) -> None:
        sx, sy = self._map(x, y + h)
        sw = w / (self.x1 - self.x0) * self.size
        sh = h / (self.y1 - self.y0) * self.size
        self.parts.append(
            f'<rect x="{sx:.2f}" y="{sy:.2f}" width="{sw:.2f}" height="{sh:.2f}" '
            f'fill="{color}" stroke="none"/>'
        )

    def polyline(self, points, color: str = "#000000", width: float = 2.0) -> None:
        coords = " ".join(
            "{:.2f},{:.2f}".format(*self._map(px, py)) for px, py in points
        )
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width:.2f}"/>'
        )

    def text(self, x: float, y: float, s: str, size: int = 14) -> None:
        sx, sy = self._map(x, y)
        self.parts.append(f'<text x="{sx:.2f}" y="{sy:.2f}" font-size="{size}">{s}</text>')

    def write(self, path) -> None:
        total = self.size + 2 * self.pad
        body = "\n".join(self.parts)
        with open(path, "w", encoding="ascii") as fh:
            fh.write(
                f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" '
                f'viewBox="0 0 {total} {total}">\n{body}\n</svg>\n'
            )


def ramp_color(value: float) -> str:
    """Two-segment blue -> white -> red ramp on [0, 1]."""
    v = min(max(float(value), 0.0), 1.0)
    if v < 0.5:
        f = v / 0.5
        r, g, b = int(40 + 215 * f), int(60 + 195 * f), 255
    else:
        f = (v - 0.5) / 0.5
        r, g, b = 255, int(255 - 195 * f), int(255 - 215 * f)
    return f"#{r:02x}{g:02x}{b:02x}"


REGION_COLORS = {
    0: "#d9d9d9",  # excluded
    1: "#74a9cf",  # blunt bunching
    2: "#a6d96a",  # targeted, above diagonal
    3: "#fdae61",  # targeted, below diagonal
    4: "#f2f0f7",  # customized
}


def render_region_map(region_map, interface=None, path="regions.svg") -> None:
    params = region_map.params
    a, h, n = params.a, params.h, params.n
    canvas = SvgCanvas((a, a + 1, a, a + 1))
    for i in range(n):
        for j in range(n):
            color = REGION_COLORS[int(region_map.labels[i, j])]
            canvas.rect(a + (i - 0.5) * h, a + (j - 0.5) * h, h, h, color)
    if interface is not None:
        pts = np.stack(
            [0.5 * (interface.s + interface.t), 0.5 * (interface.t - interface.s)],
            axis=-1,
        )
        canvas.polyline(pts, color="#c51b8a", width=3.0)
    canvas.polyline(
        [(a, a), (a + 1, a), (a + 1, a + 1), (a, a + 1), (a, a)],
        color="#333333",
        width=1.5,
    )
    canvas.write(path)


def render_field(field, path="field.svg") -> None:
    params = field.params
    a, h, n = params.a, params.h, params.n
    vals = np.where(np.isfinite(field.values), field.values, np.nan)
    lo = float(np.nanmin(vals))
    hi = float(np.nanmax(vals))
    span = max(hi - lo, 1e-300)
    canvas = SvgCanvas((a, a + 1, a, a + 1))
    for i in range(n):
        for j in range(n):
            v = vals[i, j]
            color = "#ffffff" if not np.isfinite(v) else ramp_color((v - lo) / span)
            canvas.rect(a + (i - 0.5) * h, a + (j - 0.5) * h, h, h, color)
    canvas.write(path)


def render_intensity(hist, path="intensity.svg") -> None:
    e1, e2, mass = hist.edges1, hist.edges2, hist.mass
    canvas = SvgCanvas((float(e1[0]), float(e1[-1]), float(e2[0]), float(e2[-1])))
    top = float(mass.max()) or 1.0
    for k in range(mass.shape[0]):
        for ell in range(mass.shape[1]):
            # log-ish scaling so the bunching ridge stays visible next to
            # the diffuse customized mass
            level = np.sqrt(mass[k, ell] / top)
            canvas.rect(
                float(e1[k]),
                float(e2[ell]),
                float(e1[k + 1] - e1[k]),
                float(e2[ell + 1] - e2[ell]),
                ramp_color(level),
            )
    canvas.write(path)
