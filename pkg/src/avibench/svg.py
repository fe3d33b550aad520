"""Minimal SVG line/scatter plots for ROC, reliability and timeline figures."""

from __future__ import annotations

from html import escape
from pathlib import Path

WIDTH, HEIGHT = 420, 380
MARGIN = dict(left=56, right=16, top=32, bottom=48)
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class Figure:
    def __init__(self, title="", xlabel="", ylabel="", xlim=(0.0, 1.0), ylim=(0.0, 1.0)):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlim, self.ylim = xlim, ylim
        self.body: list[str] = []
        self.legend: list[tuple[str, str]] = []

    def _x(self, v):
        lo, hi = self.xlim
        span = (hi - lo) or 1.0
        return MARGIN["left"] + (v - lo) / span * (WIDTH - MARGIN["left"] - MARGIN["right"])

    def _y(self, v):
        lo, hi = self.ylim
        span = (hi - lo) or 1.0
        return HEIGHT - MARGIN["bottom"] - (v - lo) / span * (HEIGHT - MARGIN["top"] - MARGIN["bottom"])

    def _colour(self):
        return COLOURS[len(self.legend) % len(COLOURS)]

    def line(self, xs, ys, label="", colour=None, dashed=False):
        colour = colour or self._colour()
        pts = " ".join(f"{_fmt(self._x(x))},{_fmt(self._y(y))}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="4 3"' if dashed else ""
        self.body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} points="{pts}"/>')
        if label:
            self.legend.append((label, colour))
        return self

    def points(self, xs, ys, label="", colour=None, errors=None):
        colour = colour or self._colour()
        for i, (x, y) in enumerate(zip(xs, ys)):
            cx, cy = _fmt(self._x(x)), _fmt(self._y(y))
            if errors is not None:
                lo, hi = errors[i]
                self.body.append(f'<line x1="{cx}" y1="{_fmt(self._y(lo))}" x2="{cx}" y2="{_fmt(self._y(hi))}" '
                                 f'stroke="{colour}"/>')
            self.body.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{colour}"/>')
        if label:
            self.legend.append((label, colour))
        return self

    def render(self) -> str:
        x0, x1 = self._x(self.xlim[0]), self._x(self.xlim[1])
        y0, y1 = self._y(self.ylim[0]), self._y(self.ylim[1])
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
               f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(x1 - x0)}" height="{_fmt(y0 - y1)}" '
               f'fill="none" stroke="#333"/>']
        for i in range(6):
            fx = self.xlim[0] + i * (self.xlim[1] - self.xlim[0]) / 5
            fy = self.ylim[0] + i * (self.ylim[1] - self.ylim[0]) / 5
            out.append(f'<text x="{_fmt(self._x(fx))}" y="{_fmt(y0 + 14)}" text-anchor="middle">{fx:g}</text>')
            out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(self._y(fy) + 4)}" text-anchor="end">{fy:g}</text>')
        out.append(f'<text x="{_fmt((x0 + x1) / 2)}" y="{HEIGHT - 10}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(14,{_fmt((y0 + y1) / 2)}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{_fmt((x0 + x1) / 2)}" y="18" text-anchor="middle" font-size="13">'
                   f'{escape(self.title)}</text>')
        out.extend(self.body)
        for i, (label, colour) in enumerate(self.legend):
            y = _fmt(y1 + 14 + 14 * i)
            out.append(f'<rect x="{_fmt(x1 - 120)}" y="{_fmt(y1 + 6 + 14 * i)}" width="10" height="10" fill="{colour}"/>')
            out.append(f'<text x="{_fmt(x1 - 106)}" y="{y}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(), encoding="utf-8")
        return path


def roc_figure(curves, title="ROC") -> Figure:
    """`curves`: iterable of (label, RocCurve)."""
    fig = Figure(title, "false positive rate", "true positive rate")
    fig.line([0, 1], [0, 1], colour="#999", dashed=True)
    for label, c in curves:
        fig.line(c.fpr, c.tpr, label)
    return fig


def calibration_figure(tables, title="Calibration") -> Figure:
    """`tables`: iterable of (label, CalibrationTable); empty bins are skipped."""
    fig = Figure(title, "mean predicted", "empirical positive rate")
    fig.line([0, 1], [0, 1], colour="#999", dashed=True)
    for label, t in tables:
        live = [b for b in t.bins if b.count]
        colour = fig._colour()
        fig.line([b.mean_predicted for b in live], [b.empirical_rate for b in live], label, colour)
        fig.points([b.mean_predicted for b in live], [b.empirical_rate for b in live], colour=colour)
    return fig
