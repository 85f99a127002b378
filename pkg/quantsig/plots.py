"""Static SVG line charts for prediction-vs-actual and ROC figures.

Output is a pure function of the input numbers: coordinates are printed
with fixed precision and nothing depends on fonts or external files.
"""

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from quantsig.metrics import RocCurve

WIDTH, HEIGHT = 800, 500
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 180, 40, 60
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")
DASH = "6,4"


@dataclass(frozen=True)
class Trace:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    color: str = PALETTE[0]


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _ticks(low: float, high: float, count: int = 5) -> List[float]:
    if high == low:
        return [low]
    return [low + (high - low) * i / (count - 1) for i in range(count)]


class _Canvas:
    def __init__(self, x_range: Tuple[float, float], y_range: Tuple[float, float]):
        self.x_low, self.x_high = x_range
        self.y_low, self.y_high = y_range
        self.plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        self.plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(self, x: float) -> float:
        span = (self.x_high - self.x_low) or 1.0
        return MARGIN_LEFT + (x - self.x_low) / span * self.plot_w

    def py(self, y: float) -> float:
        span = (self.y_high - self.y_low) or 1.0
        return MARGIN_TOP + self.plot_h - (y - self.y_low) / span * self.plot_h


def _text(parent: ET.Element, x: float, y: float, content: str, anchor: str = "middle", size: int = 12, **extra):
    element = ET.SubElement(parent, "text", {"x": _fmt(x), "y": _fmt(y), "text-anchor": anchor,
                                             "font-size": str(size), "font-family": "sans-serif", **extra})
    element.text = content
    return element


def line_chart(traces: Sequence[Trace], title: str, x_label: str, y_label: str,
               x_range: Optional[Tuple[float, float]] = None, y_range: Optional[Tuple[float, float]] = None,
               x_tick_labels: Optional[Dict[float, str]] = None) -> str:
    """Render traces on shared axes; points outside the ranges are clipped to the plot area."""
    all_x = np.concatenate([np.asarray(t.x, dtype=float) for t in traces]) if traces else np.zeros(1)
    all_y = np.concatenate([np.asarray(t.y, dtype=float) for t in traces]) if traces else np.zeros(1)
    x_range = x_range or (float(all_x.min()), float(all_x.max()))
    y_range = y_range or (float(all_y.min()), float(all_y.max()))
    canvas = _Canvas(x_range, y_range)

    svg = ET.Element("svg", {"xmlns": "http://www.w3.org/2000/svg", "width": str(WIDTH),
                             "height": str(HEIGHT), "viewBox": f"0 0 {WIDTH} {HEIGHT}"})
    ET.SubElement(svg, "rect", {"x": "0", "y": "0", "width": str(WIDTH), "height": str(HEIGHT), "fill": "white"})
    defs = ET.SubElement(svg, "defs")
    clip = ET.SubElement(defs, "clipPath", {"id": "plot-area"})
    ET.SubElement(clip, "rect", {"x": str(MARGIN_LEFT), "y": str(MARGIN_TOP),
                                 "width": str(canvas.plot_w), "height": str(canvas.plot_h)})
    _text(svg, WIDTH / 2, 24, title, size=16)

    axes = ET.SubElement(svg, "g", {"stroke": "black", "stroke-width": "1"})
    bottom = MARGIN_TOP + canvas.plot_h
    ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT), "y1": _fmt(bottom),
                                 "x2": _fmt(MARGIN_LEFT + canvas.plot_w), "y2": _fmt(bottom)})
    ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT), "y1": str(MARGIN_TOP),
                                 "x2": str(MARGIN_LEFT), "y2": _fmt(bottom)})
    for tick in _ticks(*x_range):
        ET.SubElement(axes, "line", {"x1": _fmt(canvas.px(tick)), "y1": _fmt(bottom),
                                     "x2": _fmt(canvas.px(tick)), "y2": _fmt(bottom + 5)})
        label = (x_tick_labels or {}).get(tick, f"{tick:.2f}")
        _text(svg, canvas.px(tick), bottom + 20, label, size=11)
    for tick in _ticks(*y_range):
        ET.SubElement(axes, "line", {"x1": str(MARGIN_LEFT - 5), "y1": _fmt(canvas.py(tick)),
                                     "x2": str(MARGIN_LEFT), "y2": _fmt(canvas.py(tick))})
        _text(svg, MARGIN_LEFT - 8, canvas.py(tick) + 4, f"{tick:.2f}", anchor="end", size=11)
    _text(svg, MARGIN_LEFT + canvas.plot_w / 2, HEIGHT - 15, x_label)
    _text(svg, 18, MARGIN_TOP + canvas.plot_h / 2, y_label,
          transform=f"rotate(-90 18 {_fmt(MARGIN_TOP + canvas.plot_h / 2)})")

    lines = ET.SubElement(svg, "g", {"clip-path": "url(#plot-area)", "fill": "none", "stroke-width": "1.5"})
    legend = ET.SubElement(svg, "g")
    for position, trace in enumerate(traces):
        points = " ".join(f"{_fmt(canvas.px(x))},{_fmt(canvas.py(y))}" for x, y in zip(trace.x, trace.y))
        attributes = {"points": points, "stroke": trace.color}
        if trace.dashed:
            attributes["stroke-dasharray"] = DASH
        ET.SubElement(lines, "polyline", attributes)

        entry_y = MARGIN_TOP + 10 + 20 * position
        entry_x = WIDTH - MARGIN_RIGHT + 15
        swatch = {"x1": str(entry_x), "y1": str(entry_y), "x2": str(entry_x + 25), "y2": str(entry_y),
                  "stroke": trace.color, "stroke-width": "2"}
        if trace.dashed:
            swatch["stroke-dasharray"] = DASH
        ET.SubElement(legend, "line", swatch)
        _text(legend, entry_x + 32, entry_y + 4, trace.label, anchor="start", size=11)

    return ET.tostring(svg, encoding="unicode") + "\n"


def price_chart(dates: Sequence, actual: Sequence[float], predicted: Sequence[float], title: str) -> str:
    """Predicted closes as a solid line, actual closes dashed, over the given dates."""
    x = list(range(len(dates)))
    ticks = _ticks(0.0, float(max(len(dates) - 1, 0)))
    tick_labels = {tick: str(dates[int(round(tick))]) for tick in ticks} if dates else {}
    traces = [
        Trace("Predicted", x, list(predicted), dashed=False, color=PALETTE[0]),
        Trace("Actual", x, list(actual), dashed=True, color=PALETTE[1]),
    ]
    return line_chart(traces, title, "Date", "Close", x_tick_labels=tick_labels)


def roc_chart(curves: Dict[str, RocCurve], title: str = "ROC", zoom: bool = False) -> str:
    """One trace per model plus the chance diagonal; `zoom` shows FPR in [0, 0.5] and TPR in [0.5, 1]."""
    traces = [Trace(f"{label} (AUC {curve.auc:.3f})", curve.fpr, curve.tpr, color=PALETTE[i % len(PALETTE)])
              for i, (label, curve) in enumerate(curves.items())]
    traces.append(Trace("Chance", [0.0, 1.0], [0.0, 1.0], dashed=True, color="#999999"))
    x_range, y_range = ((0.0, 0.5), (0.5, 1.0)) if zoom else ((0.0, 1.0), (0.0, 1.0))
    return line_chart(traces, title, "False positive rate", "True positive rate", x_range=x_range, y_range=y_range)
